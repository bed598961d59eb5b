#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>

namespace ait {

using Millis = std::chrono::milliseconds;

/// Monotonic time source for liveness bookkeeping and retry backoff.
/// Tests substitute FakeClock so timed behavior runs instantly.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
  virtual void sleep_for(Millis d) = 0;
};

class SteadyClock final : public Clock {
 public:
  Millis now() const override;
  void sleep_for(Millis d) override;
  static SteadyClock& instance();
};

class FakeClock final : public Clock {
 public:
  Millis now() const override { return Millis(now_ms_.load()); }
  /// Advances time instead of blocking.
  void sleep_for(Millis d) override { now_ms_ += d.count(); }
  void advance(Millis d) { now_ms_ += d.count(); }

 private:
  std::atomic<std::int64_t> now_ms_{0};
};

std::int64_t unix_millis();

/// 26-character Crockford base32 id: 48-bit millisecond timestamp followed by
/// 80 random bits, strictly increasing within a process.
std::string make_run_id();

}  // namespace ait
