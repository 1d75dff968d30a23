#pragma once

// Coordinate-ascent variational inference for the logistic stick-breaking
// multinomial model with a Gaussian prior over covariates,
//
//   psi_{.k} ~ N(mu_k, Sigma_theta),   x_c ~ Mult(N_c, PI_SB(psi_{c.})),
//
// using Polya-Gamma augmentation. The variational family is
// q(psi_{.k}) = N(lambda_k, V_k), q(omega_ck) = PG(b_ck, w_ck), with
// closed-form coordinate updates and variational-EM hyper-parameter steps.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pgvi/count_data.hpp"
#include "pgvi/errors.hpp"
#include "pgvi/kernels.hpp"
#include "pgvi/linalg.hpp"
#include "pgvi/numeric.hpp"
#include "pgvi/rng.hpp"
#include "pgvi/stick.hpp"

namespace pgvi {

struct HyperParams {
  Eigen::MatrixXd mu; // C x (K-1), column k = prior mean of psi_{.k}
  KernelSpec kernel;

  Eigen::Index C() const { return mu.rows(); }
  Eigen::Index K() const { return mu.cols() + 1; }
};

enum class MeanInit { Zero, Uniform };

/// Hyper-parameters with constant prior means: either all-zero columns or the
/// stick locations whose plug-in transform is uniform over the K categories.
inline HyperParams make_hyper(Eigen::Index C, Eigen::Index K, KernelSpec kernel,
                              MeanInit init = MeanInit::Zero) {
  if (kernel.C() != C) {
    throw std::invalid_argument("make_hyper: kernel distance size != C");
  }
  HyperParams h;
  h.mu = Eigen::MatrixXd::Zero(C, K - 1);
  if (init == MeanInit::Uniform) {
    const Eigen::VectorXd zeta = uniform_stick_location(static_cast<int>(K));
    for (Eigen::Index k = 0; k + 1 < K; ++k) h.mu.col(k).setConstant(zeta[k]);
  }
  h.kernel = std::move(kernel);
  return h;
}

struct VariationalPosterior {
  Eigen::MatrixXd lambda;          // C x (K-1)
  std::vector<Eigen::MatrixXd> V;  // K-1 matrices, C x C
  Eigen::MatrixXd w;               // C x (K-1), nonnegative
  StickStats stats;
  Eigen::VectorXd logdet_V;        // cached log|V_k|
  std::vector<Eigen::MatrixXd> sample_chol; // lower factors of V_k (optional cache)

  Eigen::Index C() const { return lambda.rows(); }
  Eigen::Index K() const { return lambda.cols() + 1; }

  /// Fills the per-factor Cholesky cache used by the sampling paths.
  void prepare_sampling() {
    sample_chol.clear();
    sample_chol.reserve(V.size());
    for (const auto& vk : V) {
      sample_chol.push_back(cholesky_with_jitter(vk, "posterior covariance").lower);
    }
  }
};

/// Posterior initialized at the prior: lambda = mu, V_k = Sigma_theta, and
/// w matched to the second moments. With no observations this is already the
/// coordinate-ascent fixed point.
inline VariationalPosterior init_posterior(StickStats stats, const HyperParams& hyper,
                                           const CovarianceModel& cov) {
  VariationalPosterior post;
  post.lambda = hyper.mu;
  const Eigen::MatrixXd sigma = cov.covariance();
  post.V.assign(static_cast<std::size_t>(hyper.mu.cols()), sigma);
  post.logdet_V = Eigen::VectorXd::Constant(hyper.mu.cols(), cov.logdet());
  post.w = (sigma.diagonal().replicate(1, hyper.mu.cols()).array() +
            post.lambda.array().square())
               .sqrt();
  post.stats = std::move(stats);
  return post;
}

/// E[omega_ck] under q(omega_ck) = PG(b_ck, w_ck), elementwise over column k.
inline Eigen::VectorXd expected_omega_column(const StickStats& stats,
                                             const Eigen::MatrixXd& w, Eigen::Index k) {
  Eigen::VectorXd out(stats.b.rows());
  for (Eigen::Index c = 0; c < out.size(); ++c) {
    out[c] = pg_mean(stats.b(c, k), w(c, k));
  }
  return out;
}

/// Conditional maximizer of factor k: V_k = (Sigma^-1 + diag(E[omega_k]))^-1,
/// lambda_k = V_k (kappa_k + Sigma^-1 mu_k).
inline void update_factor(Eigen::Index k, const HyperParams& hyper,
                          const CovarianceModel& cov, VariationalPosterior& post) {
  const Eigen::VectorXd omega_bar = expected_omega_column(post.stats, post.w, k);
  Eigen::MatrixXd precision = cov.precision();
  precision.diagonal() += omega_bar;
  const Cholesky chol = cholesky_with_jitter(precision, "factor precision");
  Eigen::MatrixXd vk = chol.inverse();
  symmetrize(vk);
  const Eigen::VectorXd rhs =
      post.stats.kappa.col(k) + cov.base_inverse() * hyper.mu.col(k) / cov.theta();
  post.lambda.col(k) = chol.solve(rhs);
  post.V[static_cast<std::size_t>(k)] = std::move(vk);
  post.logdet_V[k] = -chol.logdet();
  post.sample_chol.clear();
}

/// Conditional maximizer of the PG parameters: w_ck = sqrt(E[psi_ck^2]).
inline void update_omega(VariationalPosterior& post) {
  for (Eigen::Index k = 0; k + 1 < post.K(); ++k) {
    const auto& vk = post.V[static_cast<std::size_t>(k)];
    post.w.col(k) =
        (vk.diagonal().array() + post.lambda.col(k).array().square()).sqrt();
  }
}

/// Evidence lower bound of the current variational state. Equals the
/// closed-form expression in terms of (lambda, V, w) when w matches the
/// current second moments; the exponential-tilting correction term makes the
/// value exact (and the per-update monotonicity strict) when w is stale.
inline double elbo(const HyperParams& hyper, const CovarianceModel& cov,
                   const VariationalPosterior& post) {
  const Eigen::Index C = post.C();
  const Eigen::Index km1 = post.K() - 1;
  const Eigen::MatrixXd sigma_inv = cov.precision();

  double value = -0.5 * static_cast<double>(km1) * cov.logdet() +
                 0.5 * post.logdet_V.sum() +
                 0.5 * static_cast<double>(C) * static_cast<double>(km1);
  for (Eigen::Index k = 0; k < km1; ++k) {
    const auto& vk = post.V[static_cast<std::size_t>(k)];
    value -= 0.5 * (sigma_inv.array() * vk.array()).sum();
    const Eigen::VectorXd u = hyper.mu.col(k) - post.lambda.col(k);
    value -= 0.5 * u.dot(sigma_inv * u);
  }

  value += post.stats.log_binom_sum;
  value -= std::log(2.0) * post.stats.b.sum();
  value += (post.lambda.array() * post.stats.kappa.array()).sum();
  for (Eigen::Index k = 0; k < km1; ++k) {
    const auto& vk = post.V[static_cast<std::size_t>(k)];
    for (Eigen::Index c = 0; c < C; ++c) {
      const double b = post.stats.b(c, k);
      if (b == 0.0) continue;
      const double w = post.w(c, k);
      value -= b * log_cosh(0.5 * w);
      const double second_moment = vk(c, c) + post.lambda(c, k) * post.lambda(c, k);
      value += 0.5 * pg_mean(b, w) * (w * w - second_moment);
    }
  }
  return value;
}

/// M-step for the prior means: mu_k = lambda_k (exact stationary point).
inline void m_step_mu(const VariationalPosterior& post, HyperParams& hyper) {
  hyper.mu = post.lambda;
}

/// Closed-form M-step for the scale of Sigma_theta = theta * Sigma~:
///   theta = sum_k tr(Sigma~^-1 (V_k + (mu_k-lambda_k)(mu_k-lambda_k)^T))
///           / ((K-1) * C),
/// the exact zero of dELBO/dtheta.
inline double m_step_theta_scale(const VariationalPosterior& post, HyperParams& hyper,
                                 CovarianceModel& cov) {
  const Eigen::Index C = post.C();
  const Eigen::Index km1 = post.K() - 1;
  double total = 0.0;
  for (Eigen::Index k = 0; k < km1; ++k) {
    const auto& vk = post.V[static_cast<std::size_t>(k)];
    total += (cov.base_inverse().array() * vk.array()).sum();
    const Eigen::VectorXd u = hyper.mu.col(k) - post.lambda.col(k);
    total += u.dot(cov.base_inverse() * u);
  }
  const double theta = total / (static_cast<double>(km1) * static_cast<double>(C));
  if (!(theta > 0.0)) {
    throw NumericalError("m_step_theta_scale: nonpositive scale " + std::to_string(theta));
  }
  cov.set_theta(theta);
  hyper.kernel.theta = theta;
  return theta;
}

namespace detail {

/// dELBO/d(eta) for a kernel parameter eta with derivative matrix d_sigma:
///  -1/2 sum_k [ tr(S^-1 dS) - tr(S^-1 dS S^-1 V_k) - u_k^T S^-1 dS S^-1 u_k ].
inline double elbo_grad_kernel_param(const VariationalPosterior& post,
                                     const HyperParams& hyper, const CovarianceModel& cov,
                                     const Eigen::MatrixXd& d_sigma) {
  const Eigen::Index km1 = post.K() - 1;
  const Eigen::MatrixXd sigma_inv = cov.precision();
  const Eigen::MatrixXd a = sigma_inv * d_sigma;
  const Eigen::MatrixXd m = a * sigma_inv; // S^-1 dS S^-1, symmetric
  double grad = -0.5 * static_cast<double>(km1) * a.trace();
  for (Eigen::Index k = 0; k < km1; ++k) {
    const auto& vk = post.V[static_cast<std::size_t>(k)];
    grad += 0.5 * (m.array() * vk.array()).sum();
    const Eigen::VectorXd u = hyper.mu.col(k) - post.lambda.col(k);
    grad += 0.5 * u.dot(m * u);
  }
  return grad;
}

} // namespace detail

inline double elbo_grad_theta(const VariationalPosterior& post, const HyperParams& hyper,
                              const CovarianceModel& cov) {
  return detail::elbo_grad_kernel_param(post, hyper, cov, cov.d_cov_d_theta());
}

inline double elbo_grad_lengthscale(const VariationalPosterior& post,
                                    const HyperParams& hyper, const CovarianceModel& cov) {
  return detail::elbo_grad_kernel_param(post, hyper, cov, cov.d_cov_d_lengthscale());
}

/// One gradient-ascent step on the length-scale with backtracking, starting
/// at 0.1*l in the gradient direction. Accepts only ELBO improvements, so the
/// EM trace stays monotone. Returns true if l moved.
inline bool m_step_lengthscale(const VariationalPosterior& post, HyperParams& hyper,
                               CovarianceModel& cov, int max_backtracks = 20) {
  const double grad = elbo_grad_lengthscale(post, hyper, cov);
  if (grad == 0.0) return false;
  const double l0 = cov.lengthscale();
  const double before = elbo(hyper, cov, post);
  double step = 0.1 * l0 * (grad > 0.0 ? 1.0 : -1.0);
  for (int i = 0; i < max_backtracks; ++i, step *= 0.5) {
    const double candidate = l0 + step;
    if (candidate <= 0.0) continue;
    cov.set_lengthscale(candidate);
    if (elbo(hyper, cov, post) > before) {
      hyper.kernel.lengthscale = candidate;
      return true;
    }
  }
  cov.set_lengthscale(l0);
  hyper.kernel.lengthscale = l0;
  return false;
}

struct FitOptions {
  int max_sweeps = 500;
  double tol = 1e-6;     // relative ELBO change per sweep
  bool em_mu = false;    // mu := lambda after every sweep
  bool em_theta = false; // closed-form theta update after every sweep
  bool optimize_lengthscale = false;
  bool record_phases = false; // trace each E/M phase instead of sweep ends

  bool any_em() const { return em_mu || em_theta || optimize_lengthscale; }
};

struct FitResult {
  VariationalPosterior posterior;
  HyperParams hyper;
  std::vector<double> elbo_trace;
  std::string phases; // one char per trace entry: i(nit), e, m, s(weep)
  bool converged = false;
  int sweeps = 0;
};

/// Variational engine holding the model state; supports warm restarts with
/// updated counts (used by the sequential learners).
class StickBreakingVi {
public:
  StickBreakingVi(const CountMatrix& x, HyperParams hyper)
      : hyper_(std::move(hyper)), cov_(hyper_.kernel) {
    if (x.C() != hyper_.C() || x.K() != hyper_.K()) {
      throw std::invalid_argument("StickBreakingVi: count matrix shape does not match hyper-parameters");
    }
    stats_ = compute_stick_stats(x);
    post_ = init_posterior(stats_, hyper_, cov_);
  }

  /// Replaces the observations, keeping the current posterior as warm start.
  void set_counts(const CountMatrix& x) {
    if (x.C() != hyper_.C() || x.K() != hyper_.K()) {
      throw std::invalid_argument("set_counts: count matrix shape mismatch");
    }
    stats_ = compute_stick_stats(x);
    post_.stats = stats_;
  }

  /// Runs coordinate-ascent sweeps (omega update, then all factor updates),
  /// each optionally followed by an EM step, until the relative ELBO change
  /// falls below tol or max_sweeps is reached. Sequential schedule; the
  /// factor updates within one sweep are mutually independent.
  FitResult run(const FitOptions& opts) {
    FitResult res;
    double prev = elbo(hyper_, cov_, post_);
    res.elbo_trace.push_back(prev);
    res.phases.push_back('i');
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
      res.sweeps = sweep;
      update_omega(post_);
      for (Eigen::Index k = 0; k + 1 < post_.K(); ++k) {
        update_factor(k, hyper_, cov_, post_);
      }
      if (opts.record_phases) {
        res.elbo_trace.push_back(elbo(hyper_, cov_, post_));
        res.phases.push_back('e');
      }
      if (opts.any_em()) {
        if (opts.em_mu) m_step_mu(post_, hyper_);
        if (opts.em_theta) m_step_theta_scale(post_, hyper_, cov_);
        if (opts.optimize_lengthscale) {
          m_step_lengthscale(post_, hyper_, cov_);
        }
        if (opts.record_phases) {
          res.elbo_trace.push_back(elbo(hyper_, cov_, post_));
          res.phases.push_back('m');
        }
      }
      double current;
      if (opts.record_phases) {
        current = res.elbo_trace.back();
      } else {
        current = elbo(hyper_, cov_, post_);
        res.elbo_trace.push_back(current);
        res.phases.push_back('s');
      }
      if (std::abs(current - prev) <= opts.tol * std::max(1.0, std::abs(prev))) {
        res.converged = true;
        break;
      }
      prev = current;
    }
    post_.prepare_sampling();
    res.posterior = post_;
    res.hyper = hyper_;
    return res;
  }

  const VariationalPosterior& posterior() const { return post_; }
  const HyperParams& hyper() const { return hyper_; }
  const CovarianceModel& covariance() const { return cov_; }
  double current_elbo() const { return elbo(hyper_, cov_, post_); }

private:
  HyperParams hyper_;
  CovarianceModel cov_;
  StickStats stats_;
  VariationalPosterior post_;
};

/// One-shot fit from the prior initialization.
inline FitResult fit(const CountMatrix& x, HyperParams hyper, const FitOptions& opts = {}) {
  StickBreakingVi engine(x, std::move(hyper));
  return engine.run(opts);
}

namespace detail {

inline const std::vector<Eigen::MatrixXd>&
sampling_chols(const VariationalPosterior& post, std::vector<Eigen::MatrixXd>& scratch) {
  if (!post.sample_chol.empty()) return post.sample_chol;
  scratch.clear();
  scratch.reserve(post.V.size());
  for (const auto& vk : post.V) {
    scratch.push_back(cholesky_with_jitter(vk, "posterior covariance").lower);
  }
  return scratch;
}

} // namespace detail

namespace detail {

inline Eigen::MatrixXd sample_probs_impl(const VariationalPosterior& post,
                                         const std::vector<Eigen::MatrixXd>& chols,
                                         Rng& rng) {
  const Eigen::Index C = post.C();
  const Eigen::Index km1 = post.K() - 1;
  Eigen::MatrixXd psi(C, km1);
  for (Eigen::Index k = 0; k < km1; ++k) {
    psi.col(k) = post.lambda.col(k) +
                 chols[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>() *
                     rng.normal_vector(C);
  }
  Eigen::MatrixXd probs(C, post.K());
  for (Eigen::Index c = 0; c < C; ++c) {
    probs.row(c) = stick_breaking_transform(psi.row(c).transpose()).transpose();
  }
  return probs;
}

} // namespace detail

/// One joint draw psi_{.k} ~ N(lambda_k, V_k) per factor, transformed row-wise
/// to the simplex. Rows sum to one by construction.
inline Eigen::MatrixXd posterior_sample_probs(const VariationalPosterior& post, Rng& rng) {
  std::vector<Eigen::MatrixXd> scratch;
  return detail::sample_probs_impl(post, detail::sampling_chols(post, scratch), rng);
}

/// Monte Carlo estimate of E_q[PI_SB(psi_{c.})] from n_samples joint draws
/// (default 1000; pass a fixed-seed Rng for reproducible estimates).
inline Eigen::MatrixXd posterior_mean_probs(const VariationalPosterior& post,
                                            int n_samples, Rng& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("posterior_mean_probs: n_samples must be >= 1");
  }
  std::vector<Eigen::MatrixXd> scratch;
  const auto& chols = detail::sampling_chols(post, scratch);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(post.C(), post.K());
  for (int i = 0; i < n_samples; ++i) {
    acc += detail::sample_probs_impl(post, chols, rng);
  }
  return acc / static_cast<double>(n_samples);
}

inline Eigen::MatrixXd posterior_mean_probs(const VariationalPosterior& post, Rng& rng) {
  return posterior_mean_probs(post, 1000, rng);
}

} // namespace pgvi
