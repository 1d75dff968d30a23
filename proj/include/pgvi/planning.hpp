#pragma once

// Exact planning and policy metrics on tabular MDPs: value iteration,
// softmax/greedy policies, policy evaluation by direct linear solve,
// Hellinger distance and value loss.

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pgvi/mdp.hpp"

namespace pgvi {

struct ValueIterationResult {
  Eigen::MatrixXd Q; // S x A
  int iterations = 0;
  bool converged = false;
};

/// Q-value iteration to sup-norm Bellman residual below tol. Deterministic;
/// exceeding max_iter returns the current table with converged = false.
inline ValueIterationResult value_iteration(const TabularMdp& mdp, double tol = 1e-8,
                                            int max_iter = 10000) {
  ValueIterationResult res;
  res.Q = Eigen::MatrixXd::Zero(mdp.S, mdp.A);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.S);
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    Eigen::MatrixXd q_next(mdp.S, mdp.A);
    for (int a = 0; a < mdp.A; ++a) {
      q_next.col(a) = mdp.rewards.col(a) + mdp.gamma * (mdp.T(a) * v);
    }
    const double residual = (q_next - res.Q).cwiseAbs().maxCoeff();
    res.Q = std::move(q_next);
    v = res.Q.rowwise().maxCoeff();
    if (residual < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Deterministic greedy policy; ties break toward the lowest action index.
inline Eigen::MatrixXd greedy_policy(const Eigen::MatrixXd& q) {
  Eigen::MatrixXd policy = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best;
    q.row(s).maxCoeff(&best);
    policy(s, best) = 1.0;
  }
  return policy;
}

/// pi(a|s) proportional to exp(beta * Q(s,a)), max-subtracted for stability.
inline Eigen::MatrixXd softmax_policy(const Eigen::MatrixXd& q, double beta) {
  if (beta < 0.0) throw std::invalid_argument("softmax_policy: beta must be >= 0");
  Eigen::MatrixXd policy(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const Eigen::ArrayXd shifted = beta * (q.row(s).array() - q.row(s).maxCoeff());
    const Eigen::ArrayXd weights = shifted.exp();
    policy.row(s) = (weights / weights.sum()).matrix();
  }
  return policy;
}

inline void validate_policy(const Eigen::MatrixXd& policy, double tol = 1e-12) {
  if ((policy.array() < 0.0).any()) throw std::invalid_argument("policy: negative entry");
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    if (std::abs(policy.row(s).sum() - 1.0) > tol) {
      throw std::invalid_argument("policy: row does not sum to one");
    }
  }
}

/// State-to-state transition matrix under a stochastic policy.
inline Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Eigen::MatrixXd& policy) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.S, mdp.S);
  for (int a = 0; a < mdp.A; ++a) {
    p += policy.col(a).asDiagonal() * mdp.T(a);
  }
  return p;
}

/// Exact policy evaluation: V = (I - gamma P_pi)^-1 R_pi by direct solve.
inline Eigen::VectorXd policy_evaluation(const TabularMdp& mdp, const Eigen::MatrixXd& policy) {
  const Eigen::MatrixXd p = policy_transition(mdp, policy);
  const Eigen::VectorXd r = (mdp.rewards.array() * policy.array()).rowwise().sum();
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(mdp.S, mdp.S) - mdp.gamma * p;
  return a.partialPivLu().solve(r);
}

/// Start-distribution-weighted expected return of a policy.
inline double expected_return(const TabularMdp& mdp, const Eigen::MatrixXd& policy) {
  return mdp.start.dot(policy_evaluation(mdp, policy));
}

/// Hellinger distance (1/sqrt(2))*||sqrt(p) - sqrt(q)||_2 between rows.
inline double hellinger(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("hellinger: size mismatch");
  const Eigen::ArrayXd diff =
      p.array().max(0.0).sqrt() - q.array().max(0.0).sqrt();
  return std::sqrt(diff.square().sum() / 2.0);
}

/// Mean row-wise Hellinger distance between two row-stochastic matrices.
inline double mean_hellinger(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw std::invalid_argument("mean_hellinger: shape mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    acc += hellinger(p.row(s).transpose(), q.row(s).transpose());
  }
  return acc / static_cast<double>(p.rows());
}

/// Mean over states of V*(s) - V^pi(s), both by exact evaluation; the
/// reference policy is the greedy policy of converged value iteration.
inline double value_loss(const Eigen::MatrixXd& policy, const TabularMdp& mdp) {
  const ValueIterationResult vi = value_iteration(mdp);
  const Eigen::VectorXd v_star = policy_evaluation(mdp, greedy_policy(vi.Q));
  const Eigen::VectorXd v_pi = policy_evaluation(mdp, policy);
  return (v_star - v_pi).mean();
}

} // namespace pgvi
