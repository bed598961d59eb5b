#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "ait/digest.hpp"

namespace ait {

/// Counter-based generator: block n is SHA-256(key || n as 8 big-endian
/// bytes), consumed as four 64-bit words. Streams are fully determined by
/// the key, independent of platform and standard library.
class CounterRng {
 public:
  explicit CounterRng(const Sha256& key) : key_(key) {}
  /// Key = SHA-256 of the 8 big-endian bytes of `seed`.
  static CounterRng from_seed(std::uint64_t seed);
  /// Per-step stream: key = SHA-256(run_seed || actor_id || step_index).
  static CounterRng for_step(std::uint64_t run_seed, std::string_view actor_id, std::uint64_t step_index);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  Sha256 key_;
  std::uint64_t counter_ = 0;
  std::uint64_t block_[4]{};
  int pos_ = 4;
  std::optional<double> spare_normal_;
};

}  // namespace ait
