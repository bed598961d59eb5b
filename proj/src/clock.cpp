#include "ait/clock.hpp"

#include <array>
#include <mutex>
#include <random>
#include <thread>

namespace ait {

Millis SteadyClock::now() const {
  return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now().time_since_epoch());
}

void SteadyClock::sleep_for(Millis d) { std::this_thread::sleep_for(d); }

SteadyClock& SteadyClock::instance() {
  static SteadyClock c;
  return c;
}

std::int64_t unix_millis() {
  return std::chrono::duration_cast<Millis>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string make_run_id() {
  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  static std::mutex mu;
  static std::uint64_t last_ms = 0;
  static std::array<std::uint8_t, 10> rnd{};
  static std::mt19937_64 gen{std::random_device{}()};

  std::lock_guard lock(mu);
  auto ms = static_cast<std::uint64_t>(unix_millis());
  if (ms <= last_ms) {
    ms = last_ms;
    // Same millisecond: bump the random part so ids stay strictly increasing.
    for (int i = 9; i >= 0; --i)
      if (++rnd[i] != 0) break;
  } else {
    last_ms = ms;
    for (auto& b : rnd) b = static_cast<std::uint8_t>(gen());
    rnd[0] &= 0x7f;  // headroom for increments
  }

  std::string id(26, '0');
  for (int i = 9; i >= 0; --i) {
    id[i] = kAlphabet[ms & 31];
    ms >>= 5;
  }
  // 80 random bits -> 16 base32 chars
  unsigned __int128 r = 0;
  for (auto b : rnd) r = (r << 8) | b;
  for (int i = 25; i >= 10; --i) {
    id[i] = kAlphabet[static_cast<unsigned>(r & 31)];
    r >>= 5;
  }
  return id;
}

}  // namespace ait
