#pragma once

// Noisy gridworlds: four cardinal actions whose next-state pattern is a
// discretized Gaussian around the targeted adjacent cell, with walls as
// blocked edges (and optionally blocked cells) that redirect noise mass back
// to the current state. Includes the episodic Grid10 variant that teleports
// the agent to the opposite corner on reaching the target.

#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pgvi/kernels.hpp"
#include "pgvi/mdp.hpp"

namespace pgvi {

inline constexpr int kGridActions = 4;
// 0: north (0,+1), 1: south (0,-1), 2: east (+1,0), 3: west (-1,0)
inline constexpr int kGridDx[kGridActions] = {0, 0, 1, -1};
inline constexpr int kGridDy[kGridActions] = {1, -1, 0, 0};

struct GridSpec {
  int width = 10;
  int height = 10;
  double sigma_t = 0.5; // transition-noise scale; 0 means deterministic moves
  double gamma = 0.95;
  std::vector<std::pair<int, int>> blocked_edges; // pairs of 4-adjacent cell ids
  std::vector<int> blocked_cells;
  std::vector<std::pair<int, double>> reward_cells; // (cell id, entry reward)

  int S() const { return width * height; }
  int cell(int x, int y) const { return y * width + x; }
  int x_of(int cell_id) const { return cell_id % width; }
  int y_of(int cell_id) const { return cell_id / width; }
  bool in_grid(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Precomputed wall lookups for one grid.
class GridGeometry {
public:
  explicit GridGeometry(GridSpec spec) : spec_(std::move(spec)) {
    if (spec_.width < 1 || spec_.height < 1) {
      throw std::invalid_argument("grid: dimensions must be positive");
    }
    blocked_cell_.assign(static_cast<std::size_t>(spec_.S()), false);
    for (int c : spec_.blocked_cells) {
      if (c < 0 || c >= spec_.S()) throw std::invalid_argument("grid: blocked cell out of range");
      blocked_cell_[static_cast<std::size_t>(c)] = true;
    }
    for (auto [u, v] : spec_.blocked_edges) {
      if (u < 0 || u >= spec_.S() || v < 0 || v >= spec_.S()) {
        throw std::invalid_argument("grid: blocked edge endpoint out of range");
      }
      const int dx = std::abs(spec_.x_of(u) - spec_.x_of(v));
      const int dy = std::abs(spec_.y_of(u) - spec_.y_of(v));
      if (dx + dy != 1) throw std::invalid_argument("grid: blocked edge must join 4-adjacent cells");
      blocked_edge_.insert(edge_key(u, v));
    }
    for (auto [c, value] : spec_.reward_cells) {
      (void)value;
      if (c < 0 || c >= spec_.S()) throw std::invalid_argument("grid: reward cell out of range");
      if (blocked_cell_[static_cast<std::size_t>(c)]) {
        throw std::invalid_argument("grid: reward cell is blocked");
      }
    }
    validate_reachability();
  }

  const GridSpec& spec() const { return spec_; }

  bool cell_blocked(int c) const { return blocked_cell_[static_cast<std::size_t>(c)]; }

  bool edge_open(int u, int v) const { return blocked_edge_.count(edge_key(u, v)) == 0; }

  bool passable(int x, int y) const {
    return spec_.in_grid(x, y) && !cell_blocked(spec_.cell(x, y));
  }

  /// True if the noise can scatter from `from` to `to`: some monotone
  /// staircase of 4-steps between them stays in the grid and crosses no
  /// blocked edge or cell. The 3x3 noise support keeps paths at length <= 3.
  bool reachable(int from, int to) const {
    if (from == to) return true;
    return monotone_path_exists(spec_.x_of(from), spec_.y_of(from), spec_.x_of(to),
                                spec_.y_of(to));
  }

  /// Wall-respecting shortest-path distances (in steps) from a goal cell;
  /// unreachable cells get +infinity.
  Eigen::VectorXd bfs_distances(int goal) const {
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(spec_.S(), inf);
    if (goal < 0 || goal >= spec_.S() || cell_blocked(goal)) return dist;
    std::deque<int> queue{goal};
    dist[goal] = 0.0;
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      for (int a = 0; a < kGridActions; ++a) {
        const int nx = spec_.x_of(c) + kGridDx[a];
        const int ny = spec_.y_of(c) + kGridDy[a];
        if (!passable(nx, ny)) continue;
        const int n = spec_.cell(nx, ny);
        if (!edge_open(c, n) || dist[n] < inf) continue;
        dist[n] = dist[c] + 1.0;
        queue.push_back(n);
      }
    }
    return dist;
  }

private:
  long long edge_key(int u, int v) const {
    const long long lo = std::min(u, v);
    const long long hi = std::max(u, v);
    return lo * static_cast<long long>(spec_.S()) + hi;
  }

  bool monotone_path_exists(int x, int y, int tx, int ty) const {
    if (x == tx && y == ty) return true;
    const int sx = (tx > x) - (tx < x);
    const int sy = (ty > y) - (ty < y);
    if (sx != 0 && step_ok(x, y, x + sx, y) && monotone_path_exists(x + sx, y, tx, ty)) {
      return true;
    }
    if (sy != 0 && step_ok(x, y, x, y + sy) && monotone_path_exists(x, y + sy, tx, ty)) {
      return true;
    }
    return false;
  }

  bool step_ok(int x, int y, int nx, int ny) const {
    return passable(x, y) && passable(nx, ny) &&
           edge_open(spec_.cell(x, y), spec_.cell(nx, ny));
  }

  void validate_reachability() const {
    if (spec_.reward_cells.empty()) return;
    // At least one reward must be reachable from every unblocked cell.
    Eigen::VectorXd best = Eigen::VectorXd::Constant(spec_.S(), std::numeric_limits<double>::infinity());
    for (auto [c, value] : spec_.reward_cells) {
      (void)value;
      best = best.cwiseMin(bfs_distances(c));
    }
    for (int c = 0; c < spec_.S(); ++c) {
      if (!cell_blocked(c) && !std::isfinite(best[c])) {
        throw std::invalid_argument("grid: walls disconnect some states from every reward");
      }
    }
  }

  GridSpec spec_;
  std::vector<bool> blocked_cell_;
  std::set<long long> blocked_edge_;
};

/// Noisy-gridworld MDP. For each (s, a), unnormalized mass
/// exp(-||c - target||^2 / (2 sigma_t^2)) is placed on the 3x3 neighborhood
/// of the targeted adjacent cell; mass on off-grid, blocked, or unreachable
/// cells is redirected to the current state, then the row is normalized.
/// Rewards are expected entry rewards: R(s,a) = sum_s' T(s,a,s') r(s').
inline TabularMdp build_gridworld(const GridSpec& spec) {
  const GridGeometry geom(spec);
  const int S = spec.S();
  TabularMdp mdp;
  mdp.S = S;
  mdp.A = kGridActions;
  mdp.gamma = spec.gamma;
  mdp.transitions.assign(kGridActions, Eigen::MatrixXd::Zero(S, S));

  Eigen::VectorXd entry_reward = Eigen::VectorXd::Zero(S);
  for (auto [c, value] : spec.reward_cells) entry_reward[c] += value;

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < kGridActions; ++a) {
      Eigen::MatrixXd& t = mdp.transitions[static_cast<std::size_t>(a)];
      if (geom.cell_blocked(s)) {
        t(s, s) = 1.0; // blocked cells are absorbing placeholders
        continue;
      }
      const int tx = spec.x_of(s) + kGridDx[a];
      const int ty = spec.y_of(s) + kGridDy[a];
      double total = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          double mass;
          if (spec.sigma_t <= 0.0) {
            mass = (dx == 0 && dy == 0) ? 1.0 : 0.0;
          } else {
            mass = std::exp(-(dx * dx + dy * dy) /
                            (2.0 * spec.sigma_t * spec.sigma_t));
          }
          if (mass == 0.0) continue;
          total += mass;
          const int cx = tx + dx;
          const int cy = ty + dy;
          const bool valid =
              geom.passable(cx, cy) && geom.reachable(s, spec.cell(cx, cy));
          if (valid) {
            t(s, spec.cell(cx, cy)) += mass;
          } else {
            t(s, s) += mass; // redirected to the current state
          }
        }
      }
      t.row(s) /= total;
    }
  }

  mdp.rewards.resize(S, kGridActions);
  for (int a = 0; a < kGridActions; ++a) {
    mdp.rewards.col(a) = mdp.transitions[static_cast<std::size_t>(a)] * entry_reward;
  }

  int unblocked = 0;
  for (int c = 0; c < S; ++c) unblocked += geom.cell_blocked(c) ? 0 : 1;
  mdp.start = Eigen::VectorXd::Zero(S);
  for (int c = 0; c < S; ++c) {
    if (!geom.cell_blocked(c)) mdp.start[c] = 1.0 / unblocked;
  }
  validate_mdp(mdp);
  return mdp;
}

struct Grid10 {
  TabularMdp mdp;
  int target = 0; // rewarded corner
  int reset = 0;  // teleport destination (opposite corner)
};

/// Episodic corner-reward gridworld: entering the target cell pays +1 and
/// lands the agent in the opposite corner. Transitions into the target are
/// rewired accordingly, so the target never appears as a next state.
inline Grid10 build_grid10(GridSpec spec) {
  if (spec.width * spec.height < 2) {
    throw std::invalid_argument("grid10: needs at least two cells");
  }
  spec.reward_cells.clear(); // reward is attached to the target transition
  Grid10 g;
  g.target = spec.cell(spec.width - 1, spec.height - 1);
  g.reset = spec.cell(0, 0);
  g.mdp = build_gridworld(spec);

  for (int a = 0; a < g.mdp.A; ++a) {
    Eigen::MatrixXd& t = g.mdp.transitions[static_cast<std::size_t>(a)];
    g.mdp.rewards.col(a) = t.col(g.target); // +1 per entry probability
    t.col(g.reset) += t.col(g.target);
    t.col(g.target).setZero();
    // The target itself is never occupied; its row is a pure portal.
    t.row(g.target).setZero();
    t(g.target, g.reset) = 1.0;
    g.mdp.rewards(g.target, a) = 0.0;
  }
  g.mdp.start = Eigen::VectorXd::Zero(g.mdp.S);
  g.mdp.start[g.reset] = 1.0;
  validate_mdp(g.mdp);
  return g;
}

/// Per-state 2-D arrow obtained by weighting the four unit action vectors by
/// their policy probabilities; used for the exported arrow CSVs.
inline Eigen::MatrixXd policy_arrows(const Eigen::MatrixXd& policy) {
  Eigen::MatrixXd arrows(policy.rows(), 2);
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    double ax = 0.0, ay = 0.0;
    for (int a = 0; a < kGridActions; ++a) {
      ax += policy(s, a) * kGridDx[a];
      ay += policy(s, a) * kGridDy[a];
    }
    arrows(s, 0) = ax;
    arrows(s, 1) = ay;
  }
  return arrows;
}

/// Euclidean distance matrix between all grid cells, the covariate distance
/// used by the grid experiments.
inline Eigen::MatrixXd grid_cell_distances(const GridSpec& spec) {
  std::vector<std::pair<int, int>> pos;
  pos.reserve(static_cast<std::size_t>(spec.S()));
  for (int c = 0; c < spec.S(); ++c) pos.push_back({spec.x_of(c), spec.y_of(c)});
  return grid_distance(pos);
}

} // namespace pgvi
