#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tpca {

namespace detail {

// SplitMix64 finalizer; full-avalanche hash of a 64-bit word.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

/// Counter-based pseudo-random generator. The i-th output is a hash of
/// (key + i*gamma), so a (seed, stream) pair names a reproducible sequence
/// independent of how many values other streams have consumed. Streams with
/// distinct ids never share outputs, which makes parallel trials
/// deterministic regardless of scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive_key(seed, stream)), counter_(0), has_cached_(false), cached_(0.0) {}

  /// Child generator for substream `i`; independent of this one's position.
  CounterRng substream(std::uint64_t i) const {
    CounterRng child(0, 0);
    child.key_ = detail::mix64(key_ ^ detail::mix64((i + 1) * 0x632BE59BD9B4E019ULL));
    return child;
  }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform double in (0, 1].
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via the Box-Muller transform (pairs cached).
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  void fill_gaussian(double* dst, std::size_t count, double stddev) {
    for (std::size_t i = 0; i < count; ++i) dst[i] = stddev * next_gaussian();
  }

  void fill_gaussian(float* dst, std::size_t count, double stddev) {
    for (std::size_t i = 0; i < count; ++i)
      dst[i] = static_cast<float>(stddev * next_gaussian());
  }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return detail::mix64(detail::mix64(seed + detail::kGolden) ^
                         detail::mix64(stream * 0xD1B54A32D192ED03ULL + 1));
  }

  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_cached_;
  double cached_;
};

/// Hash-folds a list of indices into one seed, for naming nested streams
/// like (master, cell, trial) without coordination.
inline std::uint64_t derive_seed(std::uint64_t seed) { return detail::mix64(seed + detail::kGolden); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t head, Rest... rest) {
  return derive_seed(detail::mix64(seed ^ detail::mix64(head + 0x9FB21C651E98DF25ULL)), rest...);
}

}  // namespace tpca
