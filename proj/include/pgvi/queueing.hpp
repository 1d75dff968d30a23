#pragma once

// Two-server batch queueing network. Packets arrive at queue 1 in Poisson
// batches, are served into queue 2 (action 0) or out of the system
// (action 1), with buffers clamped to [0, B]:
//   b1' = (b1 + q1 - q2)_0^B1,  b2' = (b2 + q2 - q3)_0^B2,
//   q1 ~ Pois(arrival_rate), q2 ~ Pois(batch1 * 1[a=0]), q3 ~ Pois(batch2 * 1[a=1]).
// The published update uses the raw q2 in both buffers, so queue 2 can
// receive more packets than queue 1 held; `literal_update = false` switches
// to a variant that clamps the transferred batch at b1 + q1.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pgvi/kernels.hpp"
#include "pgvi/mdp.hpp"
#include "pgvi/rng.hpp"

namespace pgvi {

struct QueueNetSpec {
  int B1 = 10;
  int B2 = 10;
  double arrival_rate = 1.0; // packets per step into queue 1
  double batch1 = 3.0;       // mean service batch queue 1 -> queue 2
  double batch2 = 2.0;       // mean service batch queue 2 -> out
  double gamma = 0.95;
  bool literal_update = true;

  int S() const { return (B1 + 1) * (B2 + 1); }
  int state(int b1, int b2) const { return b1 * (B2 + 1) + b2; }
  int b1_of(int s) const { return s / (B2 + 1); }
  int b2_of(int s) const { return s % (B2 + 1); }
};

inline void validate_queue_spec(const QueueNetSpec& spec) {
  if (spec.B1 < 1 || spec.B2 < 1) throw std::invalid_argument("queue: buffers must be positive");
  if (!(spec.arrival_rate > 0.0) || !(spec.batch1 > 0.0) || !(spec.batch2 > 0.0)) {
    throw std::invalid_argument("queue: rates must be positive");
  }
}

namespace detail {

inline int clamp_buffer(int value, int cap) { return std::max(0, std::min(cap, value)); }

inline std::pair<int, int> queue_update(const QueueNetSpec& spec, int b1, int b2, int q1,
                                        int q2, int q3) {
  if (!spec.literal_update) {
    q2 = std::min(q2, b1 + q1); // transfer at most what queue 1 holds
  }
  return {clamp_buffer(b1 + q1 - q2, spec.B1), clamp_buffer(b2 + q2 - q3, spec.B2)};
}

/// Poisson pmf table truncated once the cumulative mass reaches 1 - 1e-12.
inline std::vector<double> poisson_table(double rate) {
  if (rate == 0.0) return {1.0};
  std::vector<double> pmf;
  double p = std::exp(-rate);
  double cum = p;
  pmf.push_back(p);
  while (cum < 1.0 - 1e-12 && pmf.size() < 400) {
    p *= rate / static_cast<double>(pmf.size());
    cum += p;
    pmf.push_back(p);
  }
  return pmf;
}

} // namespace detail

/// One stochastic step; returns (next state, reward), where the reward is
/// the negative total occupancy of the post-transition state.
inline std::pair<int, double> queue_step(const QueueNetSpec& spec, int state, int action,
                                         Rng& rng) {
  if (action != 0 && action != 1) throw std::invalid_argument("queue_step: action must be 0 or 1");
  const int q1 = rng.poisson(spec.arrival_rate);
  const int q2 = rng.poisson(action == 0 ? spec.batch1 : 0.0);
  const int q3 = rng.poisson(action == 1 ? spec.batch2 : 0.0);
  const auto [b1, b2] = detail::queue_update(spec, spec.b1_of(state), spec.b2_of(state),
                                             q1, q2, q3);
  return {spec.state(b1, b2), -static_cast<double>(b1 + b2)};
}

/// Exact next-state distribution by summing the truncated Poisson
/// convolution over (q1, q2, q3). Test oracle and ground-truth evaluator
/// only; the learning agents never see it.
inline Eigen::VectorXd queue_exact_row(const QueueNetSpec& spec, int state, int action) {
  const auto t1 = detail::poisson_table(spec.arrival_rate);
  const auto t2 = detail::poisson_table(action == 0 ? spec.batch1 : 0.0);
  const auto t3 = detail::poisson_table(action == 1 ? spec.batch2 : 0.0);
  const int b1 = spec.b1_of(state);
  const int b2 = spec.b2_of(state);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(spec.S());
  for (std::size_t q1 = 0; q1 < t1.size(); ++q1) {
    for (std::size_t q2 = 0; q2 < t2.size(); ++q2) {
      const double p12 = t1[q1] * t2[q2];
      for (std::size_t q3 = 0; q3 < t3.size(); ++q3) {
        const auto [n1, n2] = detail::queue_update(spec, b1, b2, static_cast<int>(q1),
                                                   static_cast<int>(q2), static_cast<int>(q3));
        row[spec.state(n1, n2)] += p12 * t3[q3];
      }
    }
  }
  return row;
}

/// Ground-truth MDP over all (B1+1)(B2+1) queueing states, rows normalized
/// to absorb the Poisson tail truncation. Rewards are expected entry
/// rewards of R(b') = -(b1' + b2'); the start distribution is uniform.
inline TabularMdp build_queue_mdp(const QueueNetSpec& spec) {
  validate_queue_spec(spec);
  const int S = spec.S();
  TabularMdp mdp;
  mdp.S = S;
  mdp.A = 2;
  mdp.gamma = spec.gamma;
  mdp.transitions.assign(2, Eigen::MatrixXd::Zero(S, S));
  Eigen::VectorXd occupancy(S);
  for (int s = 0; s < S; ++s) {
    occupancy[s] = -static_cast<double>(spec.b1_of(s) + spec.b2_of(s));
  }
  for (int a = 0; a < 2; ++a) {
    Eigen::MatrixXd& t = mdp.transitions[static_cast<std::size_t>(a)];
    for (int s = 0; s < S; ++s) {
      Eigen::VectorXd row = queue_exact_row(spec, s, a);
      t.row(s) = (row / row.sum()).transpose();
    }
  }
  mdp.rewards.resize(S, 2);
  for (int a = 0; a < 2; ++a) {
    mdp.rewards.col(a) = mdp.transitions[static_cast<std::size_t>(a)] * occupancy;
  }
  mdp.start = Eigen::VectorXd::Constant(S, 1.0 / S);
  validate_mdp(mdp);
  return mdp;
}

/// Normalized Euclidean distance matrix between all queueing states, the
/// covariate distance used by the queueing experiments.
inline Eigen::MatrixXd queue_state_distances(const QueueNetSpec& spec) {
  std::vector<Eigen::VectorXd> states;
  states.reserve(static_cast<std::size_t>(spec.S()));
  for (int s = 0; s < spec.S(); ++s) {
    Eigen::VectorXd v(2);
    v << spec.b1_of(s), spec.b2_of(s);
    states.push_back(std::move(v));
  }
  Eigen::VectorXd buffers(2);
  buffers << spec.B1, spec.B2;
  return queue_distance(states, buffers);
}

} // namespace pgvi
