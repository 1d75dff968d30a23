#pragma once

// Policy reconstruction from state-action demonstrations, via the PG model
// over the state covariate space or the independent Dirichlet baseline.

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pgvi/dirichlet.hpp"
#include "pgvi/model.hpp"
#include "pgvi/planning.hpp"
#include "pgvi/rng.hpp"

namespace pgvi {

struct DemonstrationSet {
  std::vector<std::pair<int, int>> pairs; // (state, action)
  int S = 0;
  int A = 0;

  CountMatrix counts() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(S, A);
    for (auto [s, a] : pairs) {
      if (s < 0 || s >= S || a < 0 || a >= A) {
        throw std::invalid_argument("demonstration out of range");
      }
      x(s, a) += 1.0;
    }
    return make_count_matrix(std::move(x));
  }
};

/// Draws per_state actions from the expert policy at each listed state.
inline DemonstrationSet sample_demonstrations(const Eigen::MatrixXd& expert,
                                              const std::vector<int>& states,
                                              int per_state, Rng& rng) {
  DemonstrationSet demos;
  demos.S = static_cast<int>(expert.rows());
  demos.A = static_cast<int>(expert.cols());
  for (int s : states) {
    for (int d = 0; d < per_state; ++d) {
      demos.pairs.push_back({s, rng.categorical(expert.row(s).transpose())});
    }
  }
  return demos;
}

/// Near-optimal stochastic expert: softmax over converged Q-values.
inline Eigen::MatrixXd make_softmax_expert(const TabularMdp& mdp, double beta) {
  return softmax_policy(value_iteration(mdp).Q, beta);
}

struct PgEstimatorConfig {
  double theta_init = 1.0;
  double lengthscale = -1.0; // <= 0 selects the maximum occurring distance
  bool em_mu = false;  // see fit(): joint mu+theta EM degenerates on dense data
  bool em_theta = true;
  bool optimize_lengthscale = false;
  int max_sweeps = 200;
  double tol = 1e-6;
  int mc_samples = 2000;
  MeanInit mean_init = MeanInit::Uniform;
};

inline KernelSpec make_kernel(Eigen::MatrixXd distances, const PgEstimatorConfig& cfg) {
  KernelSpec kernel;
  kernel.theta = cfg.theta_init;
  kernel.lengthscale =
      cfg.lengthscale > 0.0 ? cfg.lengthscale : distances.maxCoeff();
  kernel.distance = std::move(distances);
  return kernel;
}

/// PG posterior-mean estimate of a C x K multinomial table under a
/// covariate kernel.
inline Eigen::MatrixXd pg_posterior_mean(const CountMatrix& counts,
                                         const Eigen::MatrixXd& distances,
                                         const PgEstimatorConfig& cfg, Rng& rng) {
  const KernelSpec kernel = make_kernel(distances, cfg);
  HyperParams hyper = make_hyper(counts.C(), counts.K(), kernel, cfg.mean_init);
  FitOptions opts;
  opts.max_sweeps = cfg.max_sweeps;
  opts.tol = cfg.tol;
  opts.em_mu = cfg.em_mu;
  opts.em_theta = cfg.em_theta;
  opts.optimize_lengthscale = cfg.optimize_lengthscale;
  const FitResult res = fit(counts, std::move(hyper), opts);
  return posterior_mean_probs(res.posterior, cfg.mc_samples, rng);
}

enum class EstimatorKind { Pg, Dirichlet };

/// Policy estimate from demonstrations. The PG path fits the stick-breaking
/// model with the grid kernel (length-scale = maximum pairwise distance by
/// default) and returns its Monte Carlo posterior mean; the Dirichlet path
/// returns the flat-prior posterior mean.
inline Eigen::MatrixXd imitation_fit(const DemonstrationSet& demos, EstimatorKind kind,
                                     const Eigen::MatrixXd& distances,
                                     const PgEstimatorConfig& cfg, Rng& rng) {
  const CountMatrix counts = demos.counts();
  if (kind == EstimatorKind::Dirichlet) {
    return dirichlet_posterior_mean(make_flat_dirichlet_model(counts));
  }
  return pg_posterior_mean(counts, distances, cfg, rng);
}

} // namespace pgvi
