#include "ait/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ait {

namespace {

void put_be64(std::string& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

CounterRng CounterRng::from_seed(std::uint64_t seed) {
  std::string buf;
  put_be64(buf, seed);
  return CounterRng(sha256(buf));
}

CounterRng CounterRng::for_step(std::uint64_t run_seed, std::string_view actor_id, std::uint64_t step_index) {
  std::string buf;
  put_be64(buf, run_seed);
  buf.append(actor_id);
  put_be64(buf, step_index);
  return CounterRng(sha256(buf));
}

std::uint64_t CounterRng::next_u64() {
  if (pos_ == 4) {
    std::uint8_t buf[40];
    std::copy(key_.begin(), key_.end(), buf);
    for (int i = 0; i < 8; ++i) buf[32 + i] = static_cast<std::uint8_t>(counter_ >> (8 * (7 - i)));
    ++counter_;
    auto d = sha256(std::span<const std::uint8_t>(buf, sizeof buf));
    for (int w = 0; w < 4; ++w) {
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v = (v << 8) | d[w * 8 + i];
      block_[w] = v;
    }
    pos_ = 0;
  }
  return block_[pos_++];
}

double CounterRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t CounterRng::below(std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  for (;;) {
    auto v = next_u64();
    if (v < limit) return v % n;
  }
}

double CounterRng::normal() {
  if (spare_normal_) {
    double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  return r * std::cos(a);
}

}  // namespace ait
