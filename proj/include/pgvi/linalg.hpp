#pragma once

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pgvi/errors.hpp"

namespace pgvi {

struct Cholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0; // absolute value added to the diagonal, 0 if none

  double logdet() const {
    return 2.0 * lower.diagonal().array().log().sum();
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd y = lower.triangularView<Eigen::Lower>().solve(rhs);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Eigen::MatrixXd inverse() const {
    return solve(Eigen::MatrixXd::Identity(lower.rows(), lower.cols()));
  }
};

/// Cholesky factorization of a symmetric matrix expected to be PD.
/// On failure, adds jitter 1e-9·mean(diag) to the diagonal, escalating
/// tenfold up to 1e-3·mean(diag) before giving up.
inline Cholesky cholesky_with_jitter(const Eigen::MatrixXd& a,
                                     const std::string& context) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    return {llt.matrixL(), 0.0};
  }
  const double scale = a.diagonal().mean();
  for (double rel = 1e-9; rel <= 1e-3 * 1.0000001; rel *= 10.0) {
    const double eps = rel * scale;
    Eigen::MatrixXd repaired = a;
    repaired.diagonal().array() += eps;
    llt.compute(repaired);
    if (llt.info() == Eigen::Success) {
      return {llt.matrixL(), eps};
    }
  }
  throw NumericalError(context + ": matrix is not positive definite after jitter escalation");
}

inline void symmetrize(Eigen::MatrixXd& a) {
  a = ((a + a.transpose()) * 0.5).eval();
}

} // namespace pgvi
