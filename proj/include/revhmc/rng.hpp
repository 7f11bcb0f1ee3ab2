#ifndef REVHMC_RNG_HPP
#define REVHMC_RNG_HPP

#include <revhmc/core.hpp>

#include <cmath>
#include <cstdint>
#include <random>

namespace revhmc {

namespace detail {
// splitmix64 finalizer, used to decorrelate (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Seedable random source: mt19937_64 with an explicit Box-Muller normal
/// generator, so draws are identical wherever the same binary runs.
/// Substreams are derived from (master seed, stream id); one stream per chain.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(detail::mix64(detail::mix64(seed) ^ detail::mix64(~stream))) {}

  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    // u1 in (0,1] so that log(u1) is finite
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = normal();
    return g;
  }

 private:
  std::mt19937_64 engine_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace revhmc

#endif
