#include <catch2/catch.hpp>

#include <deque>
#include <map>

#include "pgvi/subgoal.hpp"

using namespace pgvi;

namespace {

GridSpec walled_5x5() {
  GridSpec spec;
  spec.width = spec.height = 5;
  spec.sigma_t = 0.4;
  // Horizontal wall under row 2, open only at x = 4.
  for (int x = 0; x < 4; ++x) {
    spec.blocked_edges.push_back({spec.cell(x, 1), spec.cell(x, 2)});
  }
  return spec;
}

/// Independent BFS over the walled grid, written against the raw spec.
Eigen::VectorXd reference_bfs(const GridSpec& spec, int goal) {
  auto blocked = [&](int u, int v) {
    for (auto [a, b] : spec.blocked_edges) {
      if ((a == u && b == v) || (a == v && b == u)) return true;
    }
    return false;
  };
  Eigen::VectorXd dist =
      Eigen::VectorXd::Constant(spec.S(), std::numeric_limits<double>::infinity());
  std::deque<int> queue{goal};
  dist[goal] = 0;
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    const int x = spec.x_of(c), y = spec.y_of(c);
    const int nbrs[4][2] = {{x, y + 1}, {x, y - 1}, {x + 1, y}, {x - 1, y}};
    for (const auto& n : nbrs) {
      if (!spec.in_grid(n[0], n[1])) continue;
      const int id = spec.cell(n[0], n[1]);
      if (blocked(c, id) || std::isfinite(dist[id])) continue;
      dist[id] = dist[c] + 1;
      queue.push_back(id);
    }
  }
  return dist;
}

} // namespace

TEST_CASE("subgoal action model matches an independent BFS-softmax recomputation") {
  const GridSpec spec = walled_5x5();
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  const int goal = spec.cell(1, 0);
  const double beta = 2.0;
  const Eigen::MatrixXd model = subgoal_action_model(geom, mdp, goal, beta);

  Eigen::VectorXd dist = reference_bfs(spec, goal);
  for (int s = 0; s < mdp.S; ++s) {
    Eigen::VectorXd expected(4);
    for (int a = 0; a < 4; ++a) {
      double acc = 0.0;
      for (int n = 0; n < mdp.S; ++n) acc += mdp.T(a)(s, n) * dist[n];
      expected[a] = acc;
    }
    Eigen::VectorXd weights = (-beta * (expected.array() - expected.minCoeff())).exp();
    weights /= weights.sum();
    for (int a = 0; a < 4; ++a) {
      REQUIRE(model(s, a) == Approx(weights[a]).margin(1e-12));
    }
  }
}

TEST_CASE("standing on the goal gives a near-uniform row") {
  GridSpec spec;
  spec.width = spec.height = 5;
  spec.sigma_t = 0.4;
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  const int center = spec.cell(2, 2);
  const Eigen::MatrixXd model = subgoal_action_model(geom, mdp, center, 2.0);
  // All four moves leave the agent one step from the goal in expectation.
  for (int a = 0; a < 4; ++a) REQUIRE(model(center, a) == Approx(0.25).margin(0.02));
}

TEST_CASE("large beta pins the distance-reducing action in a corridor") {
  GridSpec spec;
  spec.width = 5;
  spec.height = 1;
  spec.sigma_t = 0.0;
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  const Eigen::MatrixXd model = subgoal_action_model(geom, mdp, spec.cell(4, 0), 50.0);
  // From the west end, east is the unique distance-reducing action.
  REQUIRE(model(spec.cell(0, 0), 2) == Approx(1.0).margin(1e-6));
}

TEST_CASE("unreachable goal falls back to a uniform row") {
  GridSpec spec;
  spec.width = 4;
  spec.height = 1;
  spec.sigma_t = 0.0;
  spec.blocked_edges = {{1, 2}}; // splits the corridor
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  const Eigen::MatrixXd model = subgoal_action_model(geom, mdp, 3, 2.0);
  for (int a = 0; a < 4; ++a) REQUIRE(model(0, a) == Approx(0.25).margin(1e-12));
}

TEST_CASE("single-goal set reproduces that goal's action model exactly") {
  const GridSpec spec = walled_5x5();
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  DemonstrationSet demos;
  demos.S = mdp.S;
  demos.A = mdp.A;
  demos.pairs = {{0, 2}, {7, 0}};
  SubgoalOptions opts;
  opts.samples = 5;
  opts.burn_in = 2;
  Rng rng(6);
  const SubgoalResult res = subgoal_gibbs_vi(demos, geom, mdp, {spec.cell(1, 0)}, opts, rng);
  const Eigen::MatrixXd expected = subgoal_action_model(geom, mdp, spec.cell(1, 0), opts.beta_g);
  REQUIRE((res.policy - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gibbs recovers a planted goal at most demonstrated states") {
  GridSpec spec;
  spec.width = spec.height = 4;
  spec.sigma_t = 0.4;
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  const int true_goal = spec.cell(3, 3);

  // Demonstrations generated from the goal-conditioned model itself with a
  // sharp temperature, at every state.
  const Eigen::MatrixXd truth = subgoal_action_model(geom, mdp, true_goal, 12.0);
  DemonstrationSet demos;
  demos.S = mdp.S;
  demos.A = mdp.A;
  Rng demo_rng(7);
  for (int s = 0; s < mdp.S; ++s) {
    for (int d = 0; d < 10; ++d) {
      demos.pairs.push_back({s, demo_rng.categorical(truth.row(s).transpose())});
    }
  }

  SubgoalOptions opts;
  opts.beta_g = 12.0;
  opts.burn_in = 30;
  opts.samples = 60;
  opts.init_sweeps = 20;
  opts.sweeps_per_iter = 3;
  Rng rng(8);
  const SubgoalResult res =
      subgoal_gibbs_vi(demos, geom, mdp, all_states_goal_set(mdp.S), opts, rng);

  int recovered = 0;
  for (int s = 0; s < mdp.S; ++s) {
    std::map<int, int> votes;
    for (int m = 0; m < opts.samples; ++m) votes[res.samples(s, m)]++;
    int modal = -1, best = -1;
    for (auto [g, n] : votes) {
      if (n > best) {
        best = n;
        modal = g;
      }
    }
    if (modal == true_goal) ++recovered;
  }
  REQUIRE(recovered >= static_cast<int>(0.9 * mdp.S));
}

TEST_CASE("literal resampling ignores the demonstration likelihood") {
  const GridSpec spec = walled_5x5();
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  const int goal = spec.cell(4, 4);
  const Eigen::MatrixXd truth = subgoal_action_model(geom, mdp, goal, 8.0);
  DemonstrationSet demos;
  demos.S = mdp.S;
  demos.A = mdp.A;
  Rng demo_rng(3);
  for (int s = 0; s < mdp.S; ++s) {
    for (int d = 0; d < 8; ++d) {
      demos.pairs.push_back({s, demo_rng.categorical(truth.row(s).transpose())});
    }
  }
  SubgoalOptions opts;
  opts.beta_g = 8.0;
  opts.burn_in = 10;
  opts.samples = 30;
  opts.init_sweeps = 10;
  Rng r1(4), r2(4);
  const SubgoalResult with_lik = subgoal_gibbs_vi(demos, geom, mdp, all_states_goal_set(mdp.S), opts, r1);
  opts.include_demo_likelihood = false;
  const SubgoalResult literal = subgoal_gibbs_vi(demos, geom, mdp, all_states_goal_set(mdp.S), opts, r2);
  validate_policy(with_lik.policy);
  validate_policy(literal.policy);
  // The conditioned chain tracks the demonstrations; the literal chain,
  // sampling assignments from the prior field alone, cannot.
  REQUIRE(mean_hellinger(with_lik.policy, truth) < mean_hellinger(literal.policy, truth));
}

TEST_CASE("dirichlet subgoal baseline mixes all goals at unvisited states") {
  const GridSpec spec = walled_5x5();
  const GridGeometry geom(spec);
  const TabularMdp mdp = build_gridworld(spec);
  DemonstrationSet demos;
  demos.S = mdp.S;
  demos.A = mdp.A;
  for (int d = 0; d < 10; ++d) demos.pairs.push_back({spec.cell(0, 0), 0});

  const Eigen::MatrixXd policy =
      dirichlet_subgoal_policy(demos, geom, mdp, all_states_goal_set(mdp.S), 2.0);
  validate_policy(policy);
  // At a state without demonstrations the posterior over goals is uniform,
  // so the policy is the plain average of all goal models there.
  const int unvisited = spec.cell(3, 3);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(mdp.A);
  for (int g = 0; g < mdp.S; ++g) {
    avg += subgoal_action_model(geom, mdp, g, 2.0).row(unvisited).transpose();
  }
  avg /= mdp.S;
  REQUIRE((policy.row(unvisited).transpose() - avg).cwiseAbs().maxCoeff() < 1e-12);
}
