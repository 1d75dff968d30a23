#pragma once

// Correlation-agnostic baseline: independent Dirichlet posterior per covariate.

#include <stdexcept>
#include <utility>

#include <Eigen/Core>

#include "pgvi/count_data.hpp"
#include "pgvi/rng.hpp"

namespace pgvi {

struct DirichletModel {
  Eigen::MatrixXd alpha; // C x K, positive concentrations
  CountMatrix counts;

  Eigen::Index C() const { return alpha.rows(); }
  Eigen::Index K() const { return alpha.cols(); }
};

inline DirichletModel make_dirichlet_model(CountMatrix counts, Eigen::MatrixXd alpha) {
  if (alpha.rows() != counts.C() || alpha.cols() != counts.K()) {
    throw std::invalid_argument("dirichlet: alpha shape must match counts");
  }
  if ((alpha.array() <= 0.0).any()) {
    throw std::invalid_argument("dirichlet: alpha entries must be positive");
  }
  return {std::move(alpha), std::move(counts)};
}

/// Flat prior (all-ones alpha): unvisited covariates predict uniform.
inline DirichletModel make_flat_dirichlet_model(CountMatrix counts) {
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Ones(counts.C(), counts.K());
  return {std::move(alpha), std::move(counts)};
}

inline Eigen::MatrixXd dirichlet_posterior_mean(const DirichletModel& model) {
  Eigen::MatrixXd post = model.counts.counts + model.alpha;
  for (Eigen::Index c = 0; c < post.rows(); ++c) {
    post.row(c) /= post.row(c).sum();
  }
  return post;
}

inline Eigen::MatrixXd dirichlet_posterior_sample(const DirichletModel& model, Rng& rng) {
  Eigen::MatrixXd probs(model.C(), model.K());
  for (Eigen::Index c = 0; c < model.C(); ++c) {
    const Eigen::VectorXd a = (model.counts.counts.row(c) + model.alpha.row(c)).transpose();
    probs.row(c) = rng.dirichlet(a).transpose();
  }
  return probs;
}

} // namespace pgvi
