#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace darslab {

// splitmix64 finalizer. Bijective on 64 bits with good avalanche, which is
// all we need to turn (key, counter) pairs into independent-looking draws.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based random stream. Every output is a pure function of the folded
// key and the draw index, so results do not depend on which worker thread
// consumes the stream or how work is chunked. Streams for distinct purposes
// are derived by folding a domain tag plus a path of ids into the key.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t k = mix64(seed + kGoldenGamma);
    for (std::uint64_t p : path) k = mix64(k ^ (p + kGoldenGamma));
    return RngStream(k);
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGoldenGamma); }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) via 128-bit multiply; bias is below 2^-64 per
  // draw, far under anything observable at our sample counts.
  int next_below(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  // Standard normal, Box-Muller. The second value of each pair is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps the log finite
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Domain tags keep suite generation, training rollouts, evaluation rollouts
// and batch ordering on non-colliding streams even when seeds coincide.
namespace stream_domain {
inline constexpr std::uint64_t kSuiteShape = 0x5348;
inline constexpr std::uint64_t kSuiteFeature = 0x4645;
inline constexpr std::uint64_t kTrainRollout = 0x5452;
inline constexpr std::uint64_t kEvalRollout = 0x4556;
inline constexpr std::uint64_t kBatchOrder = 0x4f52;
}  // namespace stream_domain

}  // namespace darslab
