#pragma once

// Seeded random streams with platform-stable output.
//
// All samplers are built on top of mt19937_64 (whose output sequence is fixed
// by the standard) and explicit arithmetic, so a (seed, call sequence) pair
// produces identical draws on any conforming platform. Distribution classes
// from <random> are deliberately not used; their algorithms are
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace pgvi {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace detail

/// Derives an independent stream seed from a root seed and a stream name.
/// Adding a new named consumer never perturbs existing streams.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = detail::splitmix64(root ^ detail::fnv1a(stream));
  return detail::splitmix64(h + 0x632be59bd9b4e019ULL * (index + 1));
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  Rng stream(std::string_view name, std::uint64_t index = 0) {
    return Rng(derive_seed(seed_base_ ^ gen_(), name, index));
  }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_pos() { return 1.0 - uniform(); }

  std::uint64_t bits() { return gen_(); }

  /// Uniform integer in [0, n).
  std::int64_t uniform_int(std::int64_t n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection to avoid modulo bias.
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
  }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Poisson by CDF inversion; exact and stream-stable for the small rates
  /// used here (<= 10).
  int poisson(double rate) {
    if (rate < 0.0) throw std::invalid_argument("poisson: negative rate");
    if (rate == 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-rate);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 2000) {
      ++k;
      p *= rate / k;
      cdf += p;
    }
    return k;
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// One draw from Dirichlet(alpha) via normalized gammas.
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha) {
    Eigen::VectorXd g(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) g[i] = gamma(alpha[i]);
    const double total = g.sum();
    if (total <= 0.0) {
      // All gammas underflowed; fall back to the argmax of alpha.
      Eigen::VectorXd p = Eigen::VectorXd::Zero(alpha.size());
      Eigen::Index imax;
      alpha.maxCoeff(&imax);
      p[imax] = 1.0;
      return p;
    }
    return g / total;
  }

  /// Index draw proportional to nonnegative weights.
  int categorical(const Eigen::VectorXd& weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

private:
  static constexpr double two_pi = 6.283185307179586476925286766559;
  std::mt19937_64 gen_;
  std::uint64_t seed_base_ = 0x5851f42d4c957f2dULL;
};

} // namespace pgvi
