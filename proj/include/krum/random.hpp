#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace krum {

/// Finalizer of SplitMix64; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Substream domains. Each consumer of randomness gets its own tag so that
/// e.g. honest draws never share a stream with the adversary.
enum class StreamDomain : std::uint64_t {
  honest_worker = 1,
  adversary = 2,
  trial = 3,
  generic = 4,
};

/// Counter-based random stream.
///
/// A stream is identified by (master seed, domain, a, b), typically
/// (seed, honest_worker, worker_id, round). The identity is hashed into the
/// initial state of a SplitMix64 generator, so any stream can be created
/// independently of any other and evaluation order never changes results.
/// Normal variates use the Marsaglia polar method, so sequences are
/// identical across standard library implementations.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Stream(std::uint64_t seed) noexcept : state_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr Stream derive(std::uint64_t master_seed, StreamDomain domain, std::uint64_t a,
                                 std::uint64_t b = 0) noexcept {
    std::uint64_t s = mix64(master_seed + 0x9e3779b97f4a7c15ULL);
    s = mix64(s ^ (static_cast<std::uint64_t>(domain) * 0xd1b54a32d192ed03ULL));
    s = mix64(s ^ (a + 0x8cb92ba72f3d8dd7ULL));
    s = mix64(s ^ (b + 0xaef17502108ef2d9ULL));
    return Stream(s);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, bound), bound > 0 (Lemire's nearly-divisionless method).
  std::uint64_t index(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal variate.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace krum
