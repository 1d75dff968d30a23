#pragma once

// Finite MDPs as explicit transition tensors plus expected-reward tables.

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pgvi/count_data.hpp"
#include "pgvi/rng.hpp"

namespace pgvi {

struct TabularMdp {
  int S = 0;
  int A = 0;
  std::vector<Eigen::MatrixXd> transitions; // per action, S x S (row-stochastic)
  Eigen::MatrixXd rewards;                  // S x A expected immediate reward
  double gamma = 0.95;
  Eigen::VectorXd start;                    // initial-state distribution

  const Eigen::MatrixXd& T(int a) const { return transitions[static_cast<std::size_t>(a)]; }
};

inline void validate_mdp(const TabularMdp& mdp, double row_tol = 1e-12) {
  if (mdp.S < 1 || mdp.A < 1) throw std::invalid_argument("mdp: empty state or action space");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    throw std::invalid_argument("mdp: gamma must lie in (0,1)");
  }
  if (static_cast<int>(mdp.transitions.size()) != mdp.A) {
    throw std::invalid_argument("mdp: transition tensor has wrong action count");
  }
  for (const auto& t : mdp.transitions) {
    if (t.rows() != mdp.S || t.cols() != mdp.S) {
      throw std::invalid_argument("mdp: transition matrix has wrong shape");
    }
    if ((t.array() < 0.0).any()) throw std::invalid_argument("mdp: negative transition probability");
    for (int s = 0; s < mdp.S; ++s) {
      if (std::abs(t.row(s).sum() - 1.0) > row_tol) {
        throw std::invalid_argument("mdp: transition row does not sum to one");
      }
    }
  }
  if (mdp.rewards.rows() != mdp.S || mdp.rewards.cols() != mdp.A) {
    throw std::invalid_argument("mdp: reward table has wrong shape");
  }
  if (mdp.start.size() != mdp.S || std::abs(mdp.start.sum() - 1.0) > row_tol) {
    throw std::invalid_argument("mdp: invalid start distribution");
  }
}

inline int sample_transition(const TabularMdp& mdp, int state, int action, Rng& rng) {
  return rng.categorical(mdp.T(action).row(state).transpose());
}

inline int sample_start(const TabularMdp& mdp, Rng& rng) {
  return rng.categorical(mdp.start);
}

struct Transition {
  int state;
  int action;
  int next_state;
};

/// Count matrices [X^(1), ..., X^(A)] with (X^(a))_ij = number of observed
/// i -> j transitions under action a.
inline std::vector<CountMatrix> mdp_to_count_covariates(const std::vector<Transition>& trajectory,
                                                        int S, int A) {
  std::vector<Eigen::MatrixXd> counts(static_cast<std::size_t>(A),
                                      Eigen::MatrixXd::Zero(S, S));
  for (const auto& t : trajectory) {
    if (t.state < 0 || t.state >= S || t.next_state < 0 || t.next_state >= S ||
        t.action < 0 || t.action >= A) {
      throw std::invalid_argument("trajectory entry out of range");
    }
    counts[static_cast<std::size_t>(t.action)](t.state, t.next_state) += 1.0;
  }
  std::vector<CountMatrix> out;
  out.reserve(counts.size());
  for (auto& c : counts) out.push_back(make_count_matrix(std::move(c)));
  return out;
}

} // namespace pgvi
