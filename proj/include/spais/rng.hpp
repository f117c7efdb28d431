#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace spais {

/// splitmix64 finalizer. Every seed in the project is derived through it.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `index` of `parent`. Stable across thread counts
/// because it depends only on the logical position of the stream.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent ^ mix64(index ^ 0xD1B54A32D192ED03ULL));
}

template <class... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index,
                                    Rest... rest) noexcept {
  return derive_seed(derive_seed(parent, index), static_cast<std::uint64_t>(rest)...);
}

/// Stream tags used when deriving seeds inside the estimators.
enum class Stream : std::uint64_t {
  kRollout = 1,
  kAccept = 2,
  kPretrain = 3,
  kTrial = 4,
  kGroundTruth = 5,
};

constexpr std::uint64_t stream_seed(std::uint64_t parent, Stream stream,
                                    std::uint64_t a) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(stream), a);
}

constexpr std::uint64_t stream_seed(std::uint64_t parent, Stream stream, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(stream), a, b);
}

/// Seeded generator with platform-independent uniform and normal draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe to take the log of.
  double uniform_positive() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() {
    const double u1 = uniform_positive();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace spais
