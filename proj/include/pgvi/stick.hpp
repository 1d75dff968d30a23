#pragma once

// Logistic stick-breaking map between R^(K-1) and the K-simplex.

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "pgvi/numeric.hpp"

namespace pgvi {

/// Maps zeta in R^(K-1) to a probability vector of length K: entry k takes
/// the fraction sigma(zeta_k) of the stick remaining after entries 1..k-1;
/// the last entry is the leftover stick, so the output sums to one by
/// construction.
inline Eigen::VectorXd stick_breaking_transform(const Eigen::VectorXd& zeta) {
  for (Eigen::Index k = 0; k < zeta.size(); ++k) {
    if (!std::isfinite(zeta[k])) {
      throw std::invalid_argument("stick_breaking_transform: non-finite input");
    }
  }
  const Eigen::Index km1 = zeta.size();
  Eigen::VectorXd p(km1 + 1);
  double remaining = 1.0;
  for (Eigen::Index k = 0; k < km1; ++k) {
    const double s = sigmoid(zeta[k]);
    p[k] = s * remaining;
    remaining *= (1.0 - s);
  }
  p[km1] = remaining;
  return p;
}

/// Latent location whose plug-in stick transform is the uniform distribution
/// over K categories: zeta_k = logit(1/(K-k+1)), k = 1..K-1.
inline Eigen::VectorXd uniform_stick_location(int num_categories) {
  if (num_categories < 2) {
    throw std::invalid_argument("uniform_stick_location: need K >= 2");
  }
  Eigen::VectorXd zeta(num_categories - 1);
  for (int k = 0; k < num_categories - 1; ++k) {
    zeta[k] = -std::log(static_cast<double>(num_categories - 1 - k));
  }
  return zeta;
}

} // namespace pgvi
