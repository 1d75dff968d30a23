#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pgvi {

/// Numerically stable logistic function.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  if (x > 35.0) return x + std::exp(-x);
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

/// log(cosh(x)); stable for large |x| where cosh overflows.
inline double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

/// log of the binomial coefficient C(n, k) for real-valued nonnegative n, k.
inline double log_binom(double n, double k) {
  if (k < 0.0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// First moment of PG(b, w): b/(2w)·tanh(w/2).
/// The removable singularity at w=0 is bridged by the Taylor series
/// b/4·(1 − w²/12) below 1e-4, accurate to ~1e-16.
inline double pg_mean(double b, double w) {
  if (b < 0.0 || w < 0.0) {
    throw std::invalid_argument("pg_mean: arguments must be nonnegative");
  }
  if (b == 0.0) return 0.0;
  if (w < 1e-4) {
    return 0.25 * b * (1.0 - w * w / 12.0);
  }
  return b / (2.0 * w) * std::tanh(0.5 * w);
}

} // namespace pgvi
