#include <catch2/catch.hpp>

#include <cmath>

#include "pgvi/planning.hpp"
#include "pgvi/queueing.hpp"

using namespace pgvi;

namespace {

double poisson_pmf(int k, double rate) {
  return std::exp(k * std::log(rate) - rate - std::lgamma(k + 1.0));
}

} // namespace

TEST_CASE("serving queue 2 from an empty system") {
  QueueNetSpec spec;
  const Eigen::VectorXd row = queue_exact_row(spec, spec.state(0, 0), 1);
  // Queue 2 has no inflow (q2 = 0) and stays empty with probability one.
  for (int s = 0; s < spec.S(); ++s) {
    if (spec.b2_of(s) > 0) REQUIRE(row[s] == 0.0);
  }
  // Queue 1 follows a truncated Poisson(1), cross-checked by direct pmf.
  for (int k = 0; k < spec.B1; ++k) {
    REQUIRE(row[spec.state(k, 0)] == Approx(poisson_pmf(k, 1.0)).epsilon(1e-10));
  }
}

TEST_CASE("exact rows are normalized to the truncation tolerance") {
  QueueNetSpec spec;
  for (int a = 0; a < 2; ++a) {
    for (int s = 0; s < spec.S(); ++s) {
      REQUIRE(queue_exact_row(spec, s, a).sum() == Approx(1.0).margin(1e-10));
    }
  }
}

TEST_CASE("queue_step with the same seed is reproducible") {
  QueueNetSpec spec;
  Rng r1(5), r2(5);
  for (int i = 0; i < 50; ++i) {
    const auto a = queue_step(spec, spec.state(4, 7), i % 2, r1);
    const auto b = queue_step(spec, spec.state(4, 7), i % 2, r2);
    REQUIRE(a == b);
  }
}

TEST_CASE("queue_step reward is the negative post-transition occupancy") {
  QueueNetSpec spec;
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto [next, reward] = queue_step(spec, spec.state(5, 5), i % 2, rng);
    REQUIRE(reward == -static_cast<double>(spec.b1_of(next) + spec.b2_of(next)));
  }
}

TEST_CASE("saturation clamps at the buffer size") {
  QueueNetSpec spec;
  spec.arrival_rate = 9.5; // nearly always overflows from a full buffer
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto [next, reward] = queue_step(spec, spec.state(10, 10), 1, rng);
    (void)reward;
    REQUIRE(spec.b1_of(next) <= 10);
    REQUIRE(spec.b2_of(next) >= 0);
  }
}

TEST_CASE("empirical next-state distribution matches the exact convolution") {
  QueueNetSpec spec;
  const int pairs[][2] = {{3, 4}, {0, 0}, {10, 10}, {7, 2}};
  Rng rng(2025);
  for (const auto& pr : pairs) {
    for (int a = 0; a < 2; ++a) {
      const int s = spec.state(pr[0], pr[1]);
      Eigen::VectorXd hist = Eigen::VectorXd::Zero(spec.S());
      const int n = 100000;
      for (int i = 0; i < n; ++i) {
        hist[queue_step(spec, s, a, rng).first] += 1.0;
      }
      hist /= n;
      const Eigen::VectorXd exact = queue_exact_row(spec, s, a);
      const double tv = 0.5 * (hist - exact).cwiseAbs().sum();
      INFO("state (" << pr[0] << "," << pr[1] << ") action " << a);
      REQUIRE(tv < 0.02);
    }
  }
}

TEST_CASE("queue_step marginal batch means") {
  QueueNetSpec spec;
  Rng rng(77);
  const int n = 100000;

  // Action 1 from (5,8): q2 = 0, so db1 = q1 and -db2 = q3 (rarely clamped).
  double sum_q1 = 0.0, sum_q3 = 0.0;
  for (int i = 0; i < n; ++i) {
    const int next = queue_step(spec, spec.state(5, 8), 1, rng).first;
    sum_q1 += spec.b1_of(next) - 5;
    sum_q3 += 8 - spec.b2_of(next);
  }
  REQUIRE(sum_q1 / n == Approx(1.0).epsilon(0.05));
  REQUIRE(sum_q3 / n == Approx(2.0).epsilon(0.05));

  // Action 0 from (3,2): db2 = q2 until the (rare) cap at the buffer.
  double sum_q2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const int next = queue_step(spec, spec.state(3, 2), 0, rng).first;
    sum_q2 += spec.b2_of(next) - 2;
  }
  REQUIRE(sum_q2 / n == Approx(3.0).epsilon(0.05));
}

TEST_CASE("literal update allows phantom transfers, the clamped variant does not") {
  QueueNetSpec literal;
  QueueNetSpec clamped;
  clamped.literal_update = false;
  // From an empty system with service on queue 1, the literal formula can
  // move packets into queue 2 that queue 1 never held.
  const Eigen::VectorXd row_lit = queue_exact_row(literal, 0, 0);
  const Eigen::VectorXd row_cl = queue_exact_row(clamped, 0, 0);
  REQUIRE(row_lit.sum() == Approx(1.0).margin(1e-10));
  REQUIRE(row_cl.sum() == Approx(1.0).margin(1e-10));
  double phantom_lit = 0.0, phantom_cl = 0.0;
  for (int b2 = 1; b2 <= literal.B2; ++b2) {
    phantom_lit += row_lit[literal.state(0, b2)];
    phantom_cl += row_cl[clamped.state(0, b2)];
  }
  REQUIRE(phantom_lit > phantom_cl);
  REQUIRE((row_lit - row_cl).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("ground-truth queue MDP is a valid planning target") {
  QueueNetSpec spec;
  const TabularMdp mdp = build_queue_mdp(spec); // validates internally
  REQUIRE(mdp.S == 121);
  REQUIRE(mdp.A == 2);
  // Rewards are nonpositive and bounded by the worst occupancy.
  REQUIRE(mdp.rewards.maxCoeff() <= 0.0);
  REQUIRE(mdp.rewards.minCoeff() >= -20.0);
  const auto vi = value_iteration(mdp);
  REQUIRE(vi.converged);
  // Serving sensibly beats never draining queue 2: optimal return is finite.
  const double ret = expected_return(mdp, greedy_policy(vi.Q));
  REQUIRE(std::isfinite(ret));
  REQUIRE(ret < 0.0);
}

TEST_CASE("queue state distances are the normalized Euclidean metric") {
  QueueNetSpec spec;
  const Eigen::MatrixXd d = queue_state_distances(spec);
  REQUIRE(d.rows() == 121);
  REQUIRE(d(spec.state(0, 0), spec.state(10, 10)) == Approx(std::sqrt(2.0)).margin(1e-14));
  REQUIRE(d.maxCoeff() == Approx(std::sqrt(2.0)).margin(1e-14));
  validate_distance_matrix(d);
}
