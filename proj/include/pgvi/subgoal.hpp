#pragma once

// Latent subgoal model: every state s carries a goal g_s driving its actions
// through a goal-conditioned softmax over expected shortest-path distances.
// Inference alternates variational updates of the goal-probability model
// (each assignment treated as a single observation count) with Gibbs draws
// of the assignments.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pgvi/gridworld.hpp"
#include "pgvi/imitation.hpp"
#include "pgvi/model.hpp"
#include "pgvi/planning.hpp"
#include "pgvi/rng.hpp"

namespace pgvi {

/// Goal-conditioned action model
///   p(a|s,g) ~ exp(-beta_g * E[d_BFS(next(s,a), g)]),
/// where the expectation runs over the true noisy transition row and d_BFS
/// is the wall-respecting shortest-path distance. States from which the goal
/// is unreachable fall back to a uniform row (all distances saturate).
inline Eigen::MatrixXd subgoal_action_model(const GridGeometry& geom, const TabularMdp& mdp,
                                            int goal, double beta_g) {
  Eigen::VectorXd dist = geom.bfs_distances(goal);
  const double saturated = static_cast<double>(mdp.S); // larger than any real path
  for (int c = 0; c < mdp.S; ++c) {
    if (!std::isfinite(dist[c])) dist[c] = saturated;
  }
  Eigen::MatrixXd expected(mdp.S, mdp.A);
  for (int a = 0; a < mdp.A; ++a) {
    expected.col(a) = mdp.T(a) * dist;
  }
  Eigen::MatrixXd policy(mdp.S, mdp.A);
  for (int s = 0; s < mdp.S; ++s) {
    const Eigen::ArrayXd scores =
        -beta_g * (expected.row(s).array() - expected.row(s).minCoeff());
    const Eigen::ArrayXd weights = scores.exp();
    policy.row(s) = (weights / weights.sum()).matrix();
  }
  return policy;
}

struct SubgoalOptions {
  double beta_g = 2.0;
  int burn_in = 50;
  int samples = 100;       // retained Gibbs draws
  int init_sweeps = 30;    // VI sweeps before the first Gibbs draw
  int sweeps_per_iter = 1; // warm VI sweeps between draws
  bool include_demo_likelihood = true; // false: literal prior-only resampling
  PgEstimatorConfig estimator;         // kernel and EM settings

  SubgoalOptions() {
    // With single-observation counts the mu update never degenerates, and the
    // accumulated prior mean is what propagates goal consensus across states.
    estimator.em_mu = true;
  }
};

struct SubgoalResult {
  Eigen::MatrixXd policy;  // S x A, averaged predictive action distributions
  Eigen::MatrixXi samples; // S x M retained assignments (goal-set indices)
};

namespace detail {

/// Per-state demonstration log-likelihood table: L(s, j) = sum over demos at
/// s of log p(a_d | s, goal_j).
inline Eigen::MatrixXd demo_loglik_table(const DemonstrationSet& demos,
                                         const std::vector<Eigen::MatrixXd>& action_models) {
  const int S = demos.S;
  const int G = static_cast<int>(action_models.size());
  Eigen::MatrixXd loglik = Eigen::MatrixXd::Zero(S, G);
  for (auto [s, a] : demos.pairs) {
    for (int j = 0; j < G; ++j) {
      loglik(s, j) += std::log(std::max(action_models[static_cast<std::size_t>(j)](s, a), 1e-300));
    }
  }
  return loglik;
}

inline CountMatrix onehot_counts(const std::vector<int>& assignment, int G) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignment.size()), G);
  for (std::size_t s = 0; s < assignment.size(); ++s) {
    x(static_cast<Eigen::Index>(s), assignment[s]) = 1.0;
  }
  return make_count_matrix(std::move(x));
}

} // namespace detail

/// Gibbs-within-VI inference of the subgoal model. Each iteration refits the
/// stick-breaking model on the one-hot assignment counts (N_s = 1), draws a
/// fresh psi sample from q, and resamples every assignment from
///   p(g_s) ~ PI_SB(psi_s)[g] * prod_{d: s_d = s} p(a_d | s, g),
/// the demonstration term being the design choice that conditions the chain
/// on the data (disabled by include_demo_likelihood = false). After burn-in,
/// the predictive policy averages the retained action models.
inline SubgoalResult subgoal_gibbs_vi(const DemonstrationSet& demos, const GridGeometry& geom,
                                      const TabularMdp& mdp, const std::vector<int>& goal_set,
                                      const SubgoalOptions& opts, Rng& rng) {
  const int S = demos.S;
  const int G = static_cast<int>(goal_set.size());
  if (G < 1) throw std::invalid_argument("subgoal: empty goal set");

  std::vector<Eigen::MatrixXd> action_models;
  action_models.reserve(goal_set.size());
  for (int g : goal_set) {
    action_models.push_back(subgoal_action_model(geom, mdp, g, opts.beta_g));
  }

  SubgoalResult out;
  out.samples.resize(S, opts.samples);

  if (G == 1) { // no mixture to infer
    out.policy = action_models[0];
    out.samples.setZero();
    return out;
  }

  const Eigen::MatrixXd loglik = detail::demo_loglik_table(demos, action_models);

  std::vector<int> assignment(static_cast<std::size_t>(S));
  for (auto& g : assignment) g = static_cast<int>(rng.uniform_int(G));

  const KernelSpec kernel = make_kernel(grid_cell_distances(geom.spec()), opts.estimator);
  StickBreakingVi engine(detail::onehot_counts(assignment, G),
                         make_hyper(S, G, kernel, opts.estimator.mean_init));
  FitOptions fit_opts;
  fit_opts.em_mu = opts.estimator.em_mu;
  fit_opts.em_theta = opts.estimator.em_theta;
  fit_opts.tol = opts.estimator.tol;
  fit_opts.max_sweeps = opts.init_sweeps;
  engine.run(fit_opts);
  fit_opts.max_sweeps = opts.sweeps_per_iter;

  out.policy = Eigen::MatrixXd::Zero(S, mdp.A);
  int retained = 0;
  for (int iter = 0; iter < opts.burn_in + opts.samples; ++iter) {
    const Eigen::MatrixXd probs = posterior_sample_probs(engine.posterior(), rng);
    for (int s = 0; s < S; ++s) {
      Eigen::VectorXd logw(G);
      for (int j = 0; j < G; ++j) {
        logw[j] = std::log(std::max(probs(s, j), 1e-300));
        if (opts.include_demo_likelihood) logw[j] += loglik(s, j);
      }
      const Eigen::VectorXd weights = (logw.array() - logw.maxCoeff()).exp();
      assignment[static_cast<std::size_t>(s)] = rng.categorical(weights);
    }
    engine.set_counts(detail::onehot_counts(assignment, G));
    engine.run(fit_opts);

    if (iter >= opts.burn_in) {
      for (int s = 0; s < S; ++s) {
        out.samples(s, retained) = assignment[static_cast<std::size_t>(s)];
        out.policy.row(s) += action_models[static_cast<std::size_t>(assignment[static_cast<std::size_t>(s)])].row(s);
      }
      ++retained;
    }
  }
  out.policy /= static_cast<double>(opts.samples);
  return out;
}

/// Correlation-agnostic subgoal baseline. With independent uniform priors
/// the per-state posterior over goals is exactly proportional to the
/// demonstration likelihood, so the predictive policy is computable in
/// closed form (the infinite-sample limit of the Gibbs variant).
inline Eigen::MatrixXd dirichlet_subgoal_policy(const DemonstrationSet& demos,
                                                const GridGeometry& geom, const TabularMdp& mdp,
                                                const std::vector<int>& goal_set,
                                                double beta_g) {
  const int S = demos.S;
  const int G = static_cast<int>(goal_set.size());
  std::vector<Eigen::MatrixXd> action_models;
  action_models.reserve(goal_set.size());
  for (int g : goal_set) {
    action_models.push_back(subgoal_action_model(geom, mdp, g, beta_g));
  }
  const Eigen::MatrixXd loglik = detail::demo_loglik_table(demos, action_models);
  Eigen::MatrixXd policy = Eigen::MatrixXd::Zero(S, mdp.A);
  for (int s = 0; s < S; ++s) {
    const Eigen::VectorXd weights =
        (loglik.row(s).array() - loglik.row(s).maxCoeff()).exp();
    const double total = weights.sum();
    for (int j = 0; j < G; ++j) {
      policy.row(s) += (weights[j] / total) * action_models[static_cast<std::size_t>(j)].row(s);
    }
  }
  return policy;
}

/// Default goal set: every grid cell.
inline std::vector<int> all_states_goal_set(int S) {
  std::vector<int> goals(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) goals[static_cast<std::size_t>(s)] = s;
  return goals;
}

} // namespace pgvi
