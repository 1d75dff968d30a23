#pragma once

// Posterior sampling for reinforcement learning on tabular MDPs with unknown
// transition dynamics and known rewards. Two planning variants:
//   sampled -- plan on M posterior draws, keep the candidate policy with the
//              highest average exact return across the draws;
//   mean    -- greedy policy of the MDP assembled from the posterior mean.

#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pgvi/dirichlet.hpp"
#include "pgvi/imitation.hpp"
#include "pgvi/mdp.hpp"
#include "pgvi/model.hpp"
#include "pgvi/planning.hpp"
#include "pgvi/rng.hpp"

namespace pgvi {

/// Posterior over per-action transition matrices, refittable as counts grow.
class TransitionLearner {
public:
  virtual ~TransitionLearner() = default;
  virtual void update(const std::vector<CountMatrix>& counts_per_action) = 0;
  virtual std::vector<Eigen::MatrixXd> sample_dynamics(Rng& rng) const = 0;
  virtual std::vector<Eigen::MatrixXd> mean_dynamics(Rng& rng) const = 0;
};

struct PgLearnerConfig {
  PgEstimatorConfig estimator; // kernel, EM, Monte Carlo sample count
  int init_sweeps = 40;        // first fit
  int update_sweeps = 4;       // warm refits
};

/// One stick-breaking model per action over the state covariate space.
class PgTransitionLearner : public TransitionLearner {
public:
  PgTransitionLearner(int S, int A, const Eigen::MatrixXd& distances, PgLearnerConfig cfg)
      : cfg_(std::move(cfg)) {
    const KernelSpec kernel = make_kernel(distances, cfg_.estimator);
    engines_.reserve(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) {
      engines_.emplace_back(zero_counts(S, S),
                            make_hyper(S, S, kernel, cfg_.estimator.mean_init));
      FitOptions opts; // settles the prior state and fills the sampling cache
      opts.max_sweeps = 1;
      engines_.back().run(opts);
    }
  }

  void update(const std::vector<CountMatrix>& counts_per_action) override {
    if (counts_per_action.size() != engines_.size()) {
      throw std::invalid_argument("pg learner: wrong action count");
    }
    FitOptions opts;
    opts.em_mu = cfg_.estimator.em_mu;
    opts.em_theta = cfg_.estimator.em_theta;
    opts.optimize_lengthscale = cfg_.estimator.optimize_lengthscale;
    opts.tol = cfg_.estimator.tol;
    opts.max_sweeps = fitted_ ? cfg_.update_sweeps : cfg_.init_sweeps;
    for (std::size_t a = 0; a < engines_.size(); ++a) {
      engines_[a].set_counts(counts_per_action[a]);
      engines_[a].run(opts);
    }
    fitted_ = true;
  }

  std::vector<Eigen::MatrixXd> sample_dynamics(Rng& rng) const override {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(engines_.size());
    for (const auto& e : engines_) out.push_back(posterior_sample_probs(e.posterior(), rng));
    return out;
  }

  std::vector<Eigen::MatrixXd> mean_dynamics(Rng& rng) const override {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(engines_.size());
    for (const auto& e : engines_) {
      out.push_back(posterior_mean_probs(e.posterior(), cfg_.estimator.mc_samples, rng));
    }
    return out;
  }

  const StickBreakingVi& engine(int a) const { return engines_[static_cast<std::size_t>(a)]; }

private:
  PgLearnerConfig cfg_;
  std::vector<StickBreakingVi> engines_;
  bool fitted_ = false;
};

/// Flat independent Dirichlet posterior per (state, action) row.
class DirichletTransitionLearner : public TransitionLearner {
public:
  DirichletTransitionLearner(int S, int A) {
    for (int a = 0; a < A; ++a) models_.push_back(make_flat_dirichlet_model(zero_counts(S, S)));
  }

  void update(const std::vector<CountMatrix>& counts_per_action) override {
    if (counts_per_action.size() != models_.size()) {
      throw std::invalid_argument("dirichlet learner: wrong action count");
    }
    for (std::size_t a = 0; a < models_.size(); ++a) {
      models_[a] = make_flat_dirichlet_model(counts_per_action[a]);
    }
  }

  std::vector<Eigen::MatrixXd> sample_dynamics(Rng& rng) const override {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(models_.size());
    for (const auto& m : models_) out.push_back(dirichlet_posterior_sample(m, rng));
    return out;
  }

  std::vector<Eigen::MatrixXd> mean_dynamics(Rng&) const override {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(models_.size());
    for (const auto& m : models_) out.push_back(dirichlet_posterior_mean(m));
    return out;
  }

private:
  std::vector<DirichletModel> models_;
};

/// Planning MDP from estimated dynamics. Rows are renormalized to absorb
/// floating-point slack. When entry_rewards is present the reward table is
/// rebuilt as R(s,a) = T_a * r (rewards known as a function of the next
/// state); otherwise the template's reward table is kept (rewards known as a
/// function of state and action).
inline TabularMdp assemble_mdp(const TabularMdp& tmpl, std::vector<Eigen::MatrixXd> dynamics,
                               const std::optional<Eigen::VectorXd>& entry_rewards = {}) {
  TabularMdp mdp = tmpl;
  mdp.transitions = std::move(dynamics);
  for (auto& t : mdp.transitions) {
    for (int s = 0; s < mdp.S; ++s) t.row(s) /= t.row(s).sum();
  }
  if (entry_rewards) {
    for (int a = 0; a < mdp.A; ++a) {
      mdp.rewards.col(a) = mdp.T(a) * (*entry_rewards);
    }
  }
  return mdp;
}

/// PSRL variant 1: draw M joint models, plan each, and return the candidate
/// whose start-weighted exact return averaged over all M models is highest
/// (ties toward the lowest candidate index).
inline Eigen::MatrixXd psrl_step_sampled(const TransitionLearner& learner,
                                         const TabularMdp& tmpl, int m_samples, Rng& rng,
                                         const std::optional<Eigen::VectorXd>& entry_rewards = {}) {
  if (m_samples < 1) throw std::invalid_argument("psrl_step_sampled: m_samples must be >= 1");
  std::vector<TabularMdp> models;
  std::vector<Eigen::MatrixXd> candidates;
  models.reserve(static_cast<std::size_t>(m_samples));
  candidates.reserve(static_cast<std::size_t>(m_samples));
  for (int m = 0; m < m_samples; ++m) {
    models.push_back(assemble_mdp(tmpl, learner.sample_dynamics(rng), entry_rewards));
    candidates.push_back(greedy_policy(value_iteration(models.back()).Q));
  }
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m_samples; ++j) {
    double score = 0.0;
    for (int m = 0; m < m_samples; ++m) {
      score += expected_return(models[static_cast<std::size_t>(m)],
                               candidates[static_cast<std::size_t>(j)]);
    }
    score /= static_cast<double>(m_samples);
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return candidates[static_cast<std::size_t>(best)];
}

/// PSRL variant 2: greedy policy of the posterior-mean dynamics.
inline Eigen::MatrixXd psrl_step_mean(const TransitionLearner& learner, const TabularMdp& tmpl,
                                      Rng& rng,
                                      const std::optional<Eigen::VectorXd>& entry_rewards = {}) {
  const TabularMdp mdp = assemble_mdp(tmpl, learner.mean_dynamics(rng), entry_rewards);
  return greedy_policy(value_iteration(mdp).Q);
}

enum class PsrlVariant { Sampled, Mean };

struct PsrlOptions {
  PsrlVariant variant = PsrlVariant::Mean;
  int replan_every = 50;
  int horizon_total = 2000;
  int m_samples = 10;
  bool reset_each_block = false; // episodic setting: redraw the start state per block
  std::optional<Eigen::VectorXd> entry_rewards; // known next-state rewards
};

/// Alternates acting under the current policy, accumulating transition
/// counts, refitting, and replanning. The first block is acted under the
/// prior policy; after every block of replan_every transitions (the last may
/// be shorter) the posterior is updated, a new policy is planned, and its
/// exact expected return under the true model is appended to the trace, so
/// entry i reflects the model state after (i+1) blocks of data.
/// Non-convergence of any inner fit is not an error.
inline std::vector<double> psrl_loop(const TabularMdp& true_mdp, TransitionLearner& learner,
                                     const PsrlOptions& opts, Rng& rng) {
  if (opts.replan_every < 1) throw std::invalid_argument("psrl_loop: replan_every must be >= 1");
  std::vector<double> trace;
  if (opts.horizon_total <= 0) return trace;

  const auto plan = [&]() {
    return opts.variant == PsrlVariant::Sampled
               ? psrl_step_sampled(learner, true_mdp, opts.m_samples, rng, opts.entry_rewards)
               : psrl_step_mean(learner, true_mdp, rng, opts.entry_rewards);
  };

  std::vector<Eigen::MatrixXd> counts(static_cast<std::size_t>(true_mdp.A),
                                      Eigen::MatrixXd::Zero(true_mdp.S, true_mdp.S));
  Eigen::MatrixXd policy = plan();
  int state = sample_start(true_mdp, rng);
  int steps_done = 0;
  while (steps_done < opts.horizon_total) {
    if (opts.reset_each_block && steps_done > 0) {
      state = sample_start(true_mdp, rng);
    }
    const int block = std::min(opts.replan_every, opts.horizon_total - steps_done);
    for (int t = 0; t < block; ++t) {
      const int action = rng.categorical(policy.row(state).transpose());
      const int next = sample_transition(true_mdp, state, action, rng);
      counts[static_cast<std::size_t>(action)](state, next) += 1.0;
      state = next;
    }
    steps_done += block;

    std::vector<CountMatrix> packaged;
    packaged.reserve(counts.size());
    for (const auto& c : counts) packaged.push_back(make_count_matrix(c));
    learner.update(packaged);
    policy = plan();
    trace.push_back(expected_return(true_mdp, policy));
  }
  return trace;
}

} // namespace pgvi
