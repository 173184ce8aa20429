#pragma once

#include <cstdint>
#include <random>

namespace pcm {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream) pair. Streams keep the
/// consumers of one experiment seed from sharing draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  // Top 53 bits; unlike std::uniform_real_distribution this is the same on
  // every standard library.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

namespace stream {
inline constexpr std::uint64_t kColor = 1;
inline constexpr std::uint64_t kCameras = 2;
inline constexpr std::uint64_t kOutliers = 3;
inline constexpr std::uint64_t kMatches = 4;
inline constexpr std::uint64_t kSceneInit = 5;
inline constexpr std::uint64_t kTrain = 6;
inline constexpr std::uint64_t kEval = 7;
inline constexpr std::uint64_t kSurface = 8;
}  // namespace stream

}  // namespace pcm
