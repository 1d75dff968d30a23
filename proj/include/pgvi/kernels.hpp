#pragma once

// Squared-exponential covariances over finite covariate spaces,
// parametrized by a scale theta and a length-scale l:
//   (Sigma_theta)_{cc'} = theta * exp(-d(c,c')^2 / l^2).

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pgvi/linalg.hpp"

namespace pgvi {

struct KernelSpec {
  double theta = 1.0;
  double lengthscale = 1.0;
  Eigen::MatrixXd distance; // C x C, symmetric, zero diagonal

  Eigen::Index C() const { return distance.rows(); }
};

inline void validate_distance_matrix(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) {
    throw std::invalid_argument("distance matrix must be square");
  }
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) {
      throw std::invalid_argument("distance matrix must have zero diagonal");
    }
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      if (!(d(i, j) >= 0.0) || d(i, j) != d(j, i)) {
        throw std::invalid_argument("distance matrix must be symmetric and nonnegative");
      }
    }
  }
}

inline void validate_kernel_spec(const KernelSpec& spec) {
  if (!(spec.theta > 0.0)) throw std::invalid_argument("kernel: theta must be positive");
  if (!(spec.lengthscale > 0.0)) throw std::invalid_argument("kernel: lengthscale must be positive");
  validate_distance_matrix(spec.distance);
}

/// Covariance matrix theta * exp(-d^2/l^2), built symmetrically so that the
/// result is symmetric to the last bit and its diagonal equals theta exactly.
inline Eigen::MatrixXd build_covariance(const KernelSpec& spec) {
  validate_kernel_spec(spec);
  const Eigen::Index C = spec.C();
  const double inv_l2 = 1.0 / (spec.lengthscale * spec.lengthscale);
  Eigen::MatrixXd sigma(C, C);
  for (Eigen::Index i = 0; i < C; ++i) {
    sigma(i, i) = spec.theta;
    for (Eigen::Index j = i + 1; j < C; ++j) {
      const double d = spec.distance(i, j);
      const double v = spec.theta * std::exp(-d * d * inv_l2);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  }
  return sigma;
}

/// Euclidean distances between 2-D integer grid coordinates.
inline Eigen::MatrixXd grid_distance(const std::vector<std::pair<int, int>>& positions) {
  const Eigen::Index C = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(C, C);
  for (Eigen::Index i = 0; i < C; ++i) {
    for (Eigen::Index j = i + 1; j < C; ++j) {
      const double dx = positions[i].first - positions[j].first;
      const double dy = positions[i].second - positions[j].second;
      const double v = std::sqrt(dx * dx + dy * dy);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

/// Euclidean distances between queue-length vectors after dividing each
/// coordinate by its buffer size.
inline Eigen::MatrixXd queue_distance(const std::vector<Eigen::VectorXd>& states,
                                      const Eigen::VectorXd& buffers) {
  const Eigen::Index C = static_cast<Eigen::Index>(states.size());
  for (const auto& s : states) {
    if (s.size() != buffers.size()) {
      throw std::invalid_argument("queue_distance: state/buffer dimension mismatch");
    }
  }
  if ((buffers.array() <= 0.0).any()) {
    throw std::invalid_argument("queue_distance: buffers must be positive");
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(C, C);
  for (Eigen::Index i = 0; i < C; ++i) {
    for (Eigen::Index j = i + 1; j < C; ++j) {
      const double v = ((states[i] - states[j]).array() / buffers.array()).matrix().norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

/// Kernel with cached base matrix Sigma~ = exp(-d^2/l^2) and its Cholesky
/// pieces. The base is hyper-parameter independent apart from l, so the
/// closed-form theta update can reuse its inverse across EM steps. If the
/// base needs diagonal jitter to factorize, the jittered copy is kept so
/// that the matrix and its inverse stay consistent.
class CovarianceModel {
public:
  explicit CovarianceModel(KernelSpec spec) : spec_(std::move(spec)) {
    validate_kernel_spec(spec_);
    rebuild_base();
  }

  const KernelSpec& spec() const { return spec_; }
  double theta() const { return spec_.theta; }
  double lengthscale() const { return spec_.lengthscale; }
  Eigen::Index C() const { return spec_.C(); }

  const Eigen::MatrixXd& base() const { return base_; }
  const Eigen::MatrixXd& base_inverse() const { return base_inv_; }
  double base_logdet() const { return base_logdet_; }
  double base_jitter() const { return chol_.jitter; }

  Eigen::MatrixXd covariance() const { return spec_.theta * base_; }
  Eigen::MatrixXd precision() const { return base_inv_ / spec_.theta; }
  double logdet() const {
    return static_cast<double>(C()) * std::log(spec_.theta) + base_logdet_;
  }

  /// d Sigma_theta / d theta = Sigma~.
  const Eigen::MatrixXd& d_cov_d_theta() const { return base_; }

  /// d Sigma_theta / d l = Sigma_theta .* (2 d^2 / l^3), elementwise.
  Eigen::MatrixXd d_cov_d_lengthscale() const {
    const double l = spec_.lengthscale;
    Eigen::MatrixXd g = spec_.theta * base_.array() *
                        (2.0 * spec_.distance.array().square() / (l * l * l));
    return g;
  }

  void set_theta(double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("set_theta: theta must be positive");
    spec_.theta = theta;
  }

  void set_lengthscale(double l) {
    if (!(l > 0.0)) throw std::invalid_argument("set_lengthscale: l must be positive");
    spec_.lengthscale = l;
    rebuild_base();
  }

private:
  void rebuild_base() {
    KernelSpec unit = spec_;
    unit.theta = 1.0;
    base_ = build_covariance(unit);
    chol_ = cholesky_with_jitter(base_, "covariance base");
    if (chol_.jitter > 0.0) {
      base_.diagonal().array() += chol_.jitter;
    }
    base_inv_ = chol_.inverse();
    symmetrize(base_inv_);
    base_logdet_ = chol_.logdet();
  }

  KernelSpec spec_;
  Eigen::MatrixXd base_;
  Eigen::MatrixXd base_inv_;
  Cholesky chol_;
  double base_logdet_ = 0.0;
};

} // namespace pgvi
