#pragma once

// Reproducible experiment runner: strict JSON configs, seeded scenario
// orchestration, CSV metric emission, and run manifests. A (config, seed)
// pair fully determines every emitted number; named RNG streams per seed
// keep the environment, demonstrations, model fits, and rollouts independent
// of each other, so PG and Dirichlet runs with equal seeds see identical
// data.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgvi/checkpoint.hpp"
#include "pgvi/gridworld.hpp"
#include "pgvi/imitation.hpp"
#include "pgvi/psrl.hpp"
#include "pgvi/queueing.hpp"
#include "pgvi/subgoal.hpp"

namespace pgvi {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config schema

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace cfg {

inline void require_keys(const json& obj, const std::string& path,
                         const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + path + "' must be an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError("config: unknown field '" +
                        (path.empty() ? item.key() : path + "." + item.key()) + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& path, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + path + "." + key + "' has the wrong type");
  }
}

} // namespace cfg

enum class Scenario { Imitation, Subgoal, Sysid, BrlGrid10, BrlQueueing };

inline Scenario parse_scenario(const std::string& name) {
  if (name == "imitation") return Scenario::Imitation;
  if (name == "subgoal") return Scenario::Subgoal;
  if (name == "sysid") return Scenario::Sysid;
  if (name == "brl_grid10") return Scenario::BrlGrid10;
  if (name == "brl_queueing") return Scenario::BrlQueueing;
  throw ConfigError("config: unknown scenario '" + name + "' in field 'scenario'");
}

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Imitation: return "imitation";
    case Scenario::Subgoal: return "subgoal";
    case Scenario::Sysid: return "sysid";
    case Scenario::BrlGrid10: return "brl_grid10";
    case Scenario::BrlQueueing: return "brl_queueing";
  }
  return "";
}

struct ExperimentConfig {
  Scenario scenario = Scenario::Imitation;
  EstimatorKind model = EstimatorKind::Pg;
  std::vector<int> seeds;
  std::string out_dir;
  std::string save_checkpoints = "first_seed"; // first_seed | all | none
  bool export_env = false; // write the built MDP(s) as JSON per run

  // kernel + fit (PG estimators)
  double theta_init = 1.0;
  double lengthscale = -1.0; // <= 0: max occurring distance
  bool em_theta = true;
  bool em_mu = false;
  bool optimize_lengthscale = false;
  int max_sweeps = 200;
  double tol = 1e-6;
  int mc_samples = 2000;

  // grid scenarios
  GridSpec grid;
  int random_rewards = 5; // imitation: reward cells drawn per seed

  // imitation / subgoal demonstrations
  double coverage = 0.5;
  int demos_per_state = 20;
  double expert_beta = 5.0;

  // subgoal
  double beta_g = 2.0;
  int gibbs_burn_in = 50;
  int gibbs_samples = 100;
  int gibbs_init_sweeps = 30;
  int gibbs_sweeps_per_iter = 1;
  bool literal_resampling = false;

  // sysid
  std::vector<int> checkpoints = {200, 500, 1000, 2000};
  int sysid_init_sweeps = 30;
  int sysid_update_sweeps = 15;

  // PSRL (brl_grid10 / brl_queueing)
  PsrlVariant variant = PsrlVariant::Mean;
  int m_samples = 10;
  int replan_every = 50;
  int horizon = 2500;
  int psrl_init_sweeps = 20;
  int psrl_update_sweeps = 2;
  int psrl_mc_samples = 100;

  // queueing network
  QueueNetSpec queue;
  int episodes = 50;
  int episode_length = 20;

  json resolved; // config echo with defaults filled in
};

namespace cfg {

inline GridSpec parse_grid(const json& root, Scenario scenario, json& echo) {
  GridSpec spec;
  const json obj = root.value("grid", json::object());
  require_keys(obj, "grid", {"width", "height", "sigma_t", "gamma", "walls", "reward_cells"});
  spec.width = get_or(obj, "grid", "width", 10);
  spec.height = get_or(obj, "grid", "height", 10);
  spec.sigma_t = get_or(obj, "grid", "sigma_t", 0.5);
  spec.gamma = get_or(obj, "grid", "gamma", 0.95);
  if (spec.width < 1 || spec.height < 1) throw ConfigError("config: grid dimensions must be positive");
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) throw ConfigError("config: grid.gamma must lie in (0,1)");

  json walls = json::array();
  if (obj.contains("walls")) {
    walls = obj.at("walls");
  } else if (scenario == Scenario::Subgoal) {
    // Default: a horizontal wall below the upper room, open only at the
    // right edge.
    for (int x = 0; x + 1 < spec.width; ++x) {
      walls.push_back({spec.cell(x, spec.height / 2 - 1), spec.cell(x, spec.height / 2)});
    }
  }
  for (const auto& e : walls) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("config: grid.walls entries must be [cell,cell]");
    spec.blocked_edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }

  json rewards = json::array();
  if (obj.contains("reward_cells")) {
    rewards = obj.at("reward_cells");
  } else if (scenario == Scenario::Subgoal) {
    rewards.push_back({spec.cell(1, spec.height - 3), 1.0});
    rewards.push_back({spec.cell(2, spec.height - 2), 1.0});
  }
  for (const auto& e : rewards) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("config: grid.reward_cells entries must be [cell,value]");
    spec.reward_cells.push_back({e[0].get<int>(), e[1].get<double>()});
  }

  echo["grid"] = {{"width", spec.width},   {"height", spec.height},
                  {"sigma_t", spec.sigma_t}, {"gamma", spec.gamma},
                  {"walls", walls},          {"reward_cells", rewards}};
  return spec;
}

} // namespace cfg

/// Parses and strictly validates an experiment config. Unknown fields and
/// type mismatches are rejected with the dotted field path in the message.
inline ExperimentConfig parse_config(const json& root) {
  using cfg::get_or;
  using cfg::require_keys;
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  if (!root.contains("scenario")) throw ConfigError("config: missing required field 'scenario'");

  ExperimentConfig c;
  c.scenario = parse_scenario(root.at("scenario").get<std::string>());

  std::vector<std::string> allowed = {"scenario", "model", "seeds", "out_dir",
                                      "save_checkpoints", "export_env", "kernel", "fit"};
  switch (c.scenario) {
    case Scenario::Imitation: allowed.insert(allowed.end(), {"grid", "imitation"}); break;
    case Scenario::Subgoal: allowed.insert(allowed.end(), {"grid", "subgoal"}); break;
    case Scenario::Sysid: allowed.insert(allowed.end(), {"grid", "sysid"}); break;
    case Scenario::BrlGrid10: allowed.insert(allowed.end(), {"grid", "brl"}); break;
    case Scenario::BrlQueueing: allowed.insert(allowed.end(), {"queue", "queueing", "brl"}); break;
  }
  require_keys(root, "", allowed);

  const std::string model = get_or<std::string>(root, "", "model", "pg");
  if (model == "pg") {
    c.model = EstimatorKind::Pg;
  } else if (model == "dirichlet") {
    c.model = EstimatorKind::Dirichlet;
  } else {
    throw ConfigError("config: field 'model' must be 'pg' or 'dirichlet'");
  }

  c.seeds = get_or<std::vector<int>>(root, "", "seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  if (c.seeds.empty()) throw ConfigError("config: field 'seeds' must be nonempty");
  c.out_dir = get_or<std::string>(root, "", "out_dir",
                                  "runs/" + scenario_name(c.scenario) + "_" + model);
  c.save_checkpoints = get_or<std::string>(root, "", "save_checkpoints",
                                           c.scenario == Scenario::Imitation ? "first_seed" : "none");
  if (c.save_checkpoints != "first_seed" && c.save_checkpoints != "all" &&
      c.save_checkpoints != "none") {
    throw ConfigError("config: field 'save_checkpoints' must be first_seed|all|none");
  }
  c.export_env = get_or(root, "", "export_env", false);

  // Scenario-dependent kernel defaults; see the decisions in the README.
  const bool dynamics_model = c.scenario == Scenario::Sysid ||
                              c.scenario == Scenario::BrlGrid10 ||
                              c.scenario == Scenario::BrlQueueing;
  double default_l = -1.0;
  bool default_opt_l = false;
  if (dynamics_model) {
    default_l = c.scenario == Scenario::BrlQueueing ? 0.35 : 3.0;
    default_opt_l = true;
  }
  const json jk = root.value("kernel", json::object());
  require_keys(jk, "kernel", {"theta_init", "lengthscale", "em_theta", "em_mu", "optimize_lengthscale"});
  c.theta_init = get_or(jk, "kernel", "theta_init", 1.0);
  if (!(c.theta_init > 0.0)) throw ConfigError("config: kernel.theta_init must be positive");
  if (jk.contains("lengthscale")) {
    if (jk.at("lengthscale").is_string()) {
      if (jk.at("lengthscale").get<std::string>() != "max_distance") {
        throw ConfigError("config: kernel.lengthscale must be a number or 'max_distance'");
      }
      c.lengthscale = -1.0;
    } else {
      c.lengthscale = jk.at("lengthscale").get<double>();
      if (!(c.lengthscale > 0.0)) throw ConfigError("config: kernel.lengthscale must be positive");
    }
  } else {
    c.lengthscale = default_l;
  }
  c.em_theta = get_or(jk, "kernel", "em_theta", true);
  c.em_mu = get_or(jk, "kernel", "em_mu", c.scenario == Scenario::Subgoal);
  c.optimize_lengthscale = get_or(jk, "kernel", "optimize_lengthscale", default_opt_l);

  const json jf = root.value("fit", json::object());
  require_keys(jf, "fit", {"max_sweeps", "tol", "mc_samples"});
  c.max_sweeps = get_or(jf, "fit", "max_sweeps", 200);
  c.tol = get_or(jf, "fit", "tol", 1e-6);
  c.mc_samples = get_or(jf, "fit", "mc_samples", c.scenario == Scenario::Sysid ? 1000 : 2000);
  if (c.max_sweeps < 1 || c.mc_samples < 1 || !(c.tol >= 0.0)) {
    throw ConfigError("config: invalid 'fit' settings");
  }

  json echo;
  echo["scenario"] = scenario_name(c.scenario);
  echo["model"] = model;
  echo["seeds"] = c.seeds;
  echo["out_dir"] = c.out_dir;
  echo["save_checkpoints"] = c.save_checkpoints;
  echo["export_env"] = c.export_env;
  echo["kernel"] = {{"theta_init", c.theta_init},
                    {"lengthscale", c.lengthscale > 0.0 ? json(c.lengthscale) : json("max_distance")},
                    {"em_theta", c.em_theta},
                    {"em_mu", c.em_mu},
                    {"optimize_lengthscale", c.optimize_lengthscale}};
  echo["fit"] = {{"max_sweeps", c.max_sweeps}, {"tol", c.tol}, {"mc_samples", c.mc_samples}};

  if (c.scenario != Scenario::BrlQueueing) {
    c.grid = cfg::parse_grid(root, c.scenario, echo);
  }

  switch (c.scenario) {
    case Scenario::Imitation: {
      const json jo = root.value("imitation", json::object());
      require_keys(jo, "imitation", {"coverage", "demos_per_state", "expert_beta", "random_rewards"});
      c.coverage = get_or(jo, "imitation", "coverage", 0.5);
      c.demos_per_state = get_or(jo, "imitation", "demos_per_state", 20);
      c.expert_beta = get_or(jo, "imitation", "expert_beta", 5.0);
      c.random_rewards = get_or(jo, "imitation", "random_rewards", 5);
      if (c.coverage <= 0.0 || c.coverage > 1.0) throw ConfigError("config: imitation.coverage must be in (0,1]");
      if (c.demos_per_state < 1) throw ConfigError("config: imitation.demos_per_state must be >= 1");
      echo["imitation"] = {{"coverage", c.coverage},
                           {"demos_per_state", c.demos_per_state},
                           {"expert_beta", c.expert_beta},
                           {"random_rewards", c.random_rewards}};
      break;
    }
    case Scenario::Subgoal: {
      const json jo = root.value("subgoal", json::object());
      require_keys(jo, "subgoal",
                   {"coverage", "demos_per_state", "expert_beta", "beta_g", "burn_in", "samples",
                    "init_sweeps", "sweeps_per_iter", "literal_resampling"});
      c.coverage = get_or(jo, "subgoal", "coverage", 0.25);
      c.demos_per_state = get_or(jo, "subgoal", "demos_per_state", 5);
      c.expert_beta = get_or(jo, "subgoal", "expert_beta", 5.0);
      c.beta_g = get_or(jo, "subgoal", "beta_g", 2.0);
      c.gibbs_burn_in = get_or(jo, "subgoal", "burn_in", 50);
      c.gibbs_samples = get_or(jo, "subgoal", "samples", 100);
      c.gibbs_init_sweeps = get_or(jo, "subgoal", "init_sweeps", 30);
      c.gibbs_sweeps_per_iter = get_or(jo, "subgoal", "sweeps_per_iter", 1);
      c.literal_resampling = get_or(jo, "subgoal", "literal_resampling", false);
      if (c.gibbs_samples < 1 || c.gibbs_burn_in < 0) throw ConfigError("config: invalid subgoal Gibbs settings");
      echo["subgoal"] = {{"coverage", c.coverage},
                         {"demos_per_state", c.demos_per_state},
                         {"expert_beta", c.expert_beta},
                         {"beta_g", c.beta_g},
                         {"burn_in", c.gibbs_burn_in},
                         {"samples", c.gibbs_samples},
                         {"init_sweeps", c.gibbs_init_sweeps},
                         {"sweeps_per_iter", c.gibbs_sweeps_per_iter},
                         {"literal_resampling", c.literal_resampling}};
      break;
    }
    case Scenario::Sysid: {
      const json jo = root.value("sysid", json::object());
      require_keys(jo, "sysid", {"checkpoints", "init_sweeps", "update_sweeps"});
      c.checkpoints = get_or<std::vector<int>>(jo, "sysid", "checkpoints", {200, 500, 1000, 2000});
      c.sysid_init_sweeps = get_or(jo, "sysid", "init_sweeps", 30);
      c.sysid_update_sweeps = get_or(jo, "sysid", "update_sweeps", 15);
      if (c.checkpoints.empty() || !std::is_sorted(c.checkpoints.begin(), c.checkpoints.end()) ||
          c.checkpoints.front() < 1) {
        throw ConfigError("config: sysid.checkpoints must be a sorted positive list");
      }
      echo["sysid"] = {{"checkpoints", c.checkpoints},
                       {"init_sweeps", c.sysid_init_sweeps},
                       {"update_sweeps", c.sysid_update_sweeps}};
      break;
    }
    case Scenario::BrlGrid10:
    case Scenario::BrlQueueing: {
      const json jo = root.value("brl", json::object());
      require_keys(jo, "brl",
                   {"variant", "m_samples", "replan_every", "horizon", "init_sweeps",
                    "update_sweeps", "psrl_mc_samples"});
      const std::string variant = get_or<std::string>(jo, "brl", "variant", "mean");
      if (variant == "mean") {
        c.variant = PsrlVariant::Mean;
      } else if (variant == "sampled") {
        c.variant = PsrlVariant::Sampled;
      } else {
        throw ConfigError("config: brl.variant must be 'mean' or 'sampled'");
      }
      c.m_samples = get_or(jo, "brl", "m_samples", 10);
      c.replan_every = get_or(jo, "brl", "replan_every", 50);
      c.horizon = get_or(jo, "brl", "horizon", 2500);
      c.psrl_init_sweeps = get_or(jo, "brl", "init_sweeps", 20);
      c.psrl_update_sweeps = get_or(jo, "brl", "update_sweeps", 2);
      c.psrl_mc_samples = get_or(jo, "brl", "psrl_mc_samples", 100);
      if (c.replan_every < 1 || c.horizon < 0 || c.m_samples < 1) {
        throw ConfigError("config: invalid 'brl' settings");
      }
      echo["brl"] = {{"variant", variant},
                     {"m_samples", c.m_samples},
                     {"replan_every", c.replan_every},
                     {"horizon", c.horizon},
                     {"init_sweeps", c.psrl_init_sweeps},
                     {"update_sweeps", c.psrl_update_sweeps},
                     {"psrl_mc_samples", c.psrl_mc_samples}};
      break;
    }
  }

  if (c.scenario == Scenario::BrlQueueing) {
    const json jq = root.value("queue", json::object());
    require_keys(jq, "queue", {"buffers", "arrival_rate", "batch_means", "gamma", "literal_update"});
    const auto buffers = get_or<std::vector<int>>(jq, "queue", "buffers", {10, 10});
    if (buffers.size() != 2) throw ConfigError("config: queue.buffers must have two entries");
    c.queue.B1 = buffers[0];
    c.queue.B2 = buffers[1];
    c.queue.arrival_rate = get_or(jq, "queue", "arrival_rate", 1.0);
    const auto batches = get_or<std::vector<double>>(jq, "queue", "batch_means", {3.0, 2.0});
    if (batches.size() != 2) throw ConfigError("config: queue.batch_means must have two entries");
    c.queue.batch1 = batches[0];
    c.queue.batch2 = batches[1];
    c.queue.gamma = get_or(jq, "queue", "gamma", 0.95);
    c.queue.literal_update = get_or(jq, "queue", "literal_update", true);
    validate_queue_spec(c.queue);

    const json jo = root.value("queueing", json::object());
    require_keys(jo, "queueing", {"episodes", "episode_length"});
    c.episodes = get_or(jo, "queueing", "episodes", 50);
    c.episode_length = get_or(jo, "queueing", "episode_length", 20);
    if (c.episodes < 0 || c.episode_length < 1) throw ConfigError("config: invalid 'queueing' settings");
    c.replan_every = c.episode_length;
    c.horizon = c.episodes * c.episode_length;
    echo["queue"] = {{"buffers", buffers},
                     {"arrival_rate", c.queue.arrival_rate},
                     {"batch_means", batches},
                     {"gamma", c.queue.gamma},
                     {"literal_update", c.queue.literal_update}};
    echo["queueing"] = {{"episodes", c.episodes}, {"episode_length", c.episode_length}};
  }

  c.resolved = std::move(echo);
  return c;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(root);
}

// ---------------------------------------------------------------------------
// Deterministic CSV / manifest output

namespace out {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) {
      out_ << (i ? "," : "") << header[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out_ << (i ? "," : "") << fmt(values[i]);
    }
    out_ << "\n";
  }

private:
  std::ofstream out_;
};

inline std::uint64_t json_hash(const json& j) { return detail::fnv1a(j.dump()); }

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string git_describe() {
  FILE* pipe = ::popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128] = {0};
  std::string result;
  while (std::fgets(buf, sizeof(buf), pipe)) result += buf;
  ::pclose(pipe);
  while (!result.empty() && (result.back() == '\n' || result.back() == '\r')) result.pop_back();
  return result.empty() ? "unknown" : result;
}

} // namespace out

/// Built-MDP export for external verification: transition tensor and reward
/// table in row-major order.
inline json mdp_to_json(const TabularMdp& mdp) {
  json j;
  j["S"] = mdp.S;
  j["A"] = mdp.A;
  j["gamma"] = mdp.gamma;
  json transitions = json::array();
  for (const auto& t : mdp.transitions) transitions.push_back(detail::matrix_to_json(t));
  j["transitions"] = transitions;
  j["rewards"] = detail::matrix_to_json(mdp.rewards);
  j["start"] = std::vector<double>(mdp.start.data(), mdp.start.data() + mdp.start.size());
  return j;
}

inline void save_mdp_json(const std::filesystem::path& path, const TabularMdp& mdp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << mdp_to_json(mdp).dump() << "\n";
}

/// Environment identity: scenario plus the environment subtree of the
/// resolved config. Two runs are comparable iff these hashes match.
inline std::string environment_hash(const ExperimentConfig& c) {
  json env;
  env["scenario"] = scenario_name(c.scenario);
  for (const auto& key : {"grid", "queue", "imitation", "subgoal"}) {
    if (c.resolved.contains(key)) env[key] = c.resolved.at(key);
  }
  return out::hex64(out::json_hash(env));
}

// ---------------------------------------------------------------------------
// Scenario runners

struct SeedMetrics {
  int seed = 0;
  std::vector<std::pair<std::string, double>> values; // ordered columns
};

namespace detail {

inline std::vector<int> sample_distinct_cells(int total, int count, Rng& rng) {
  std::vector<int> cells(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) cells[static_cast<std::size_t>(i)] = i;
  for (int i = total - 1; i > 0; --i) {
    std::swap(cells[static_cast<std::size_t>(i)],
              cells[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  }
  cells.resize(static_cast<std::size_t>(std::min(count, total)));
  std::sort(cells.begin(), cells.end());
  return cells;
}

inline void write_state_hellinger_csv(const std::filesystem::path& path,
                                      const Eigen::MatrixXd& policy,
                                      const Eigen::MatrixXd& expert) {
  out::CsvWriter csv(path, {"state", "hellinger"});
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    csv.row({static_cast<double>(s),
             hellinger(policy.row(s).transpose(), expert.row(s).transpose())});
  }
}

inline void write_arrows_csv(const std::filesystem::path& path, const GridSpec& spec,
                             const Eigen::MatrixXd& policy) {
  const Eigen::MatrixXd arrows = policy_arrows(policy);
  out::CsvWriter csv(path, {"state", "x", "y", "dx", "dy"});
  for (int s = 0; s < spec.S(); ++s) {
    csv.row({static_cast<double>(s), static_cast<double>(spec.x_of(s)),
             static_cast<double>(spec.y_of(s)), arrows(s, 0), arrows(s, 1)});
  }
}

inline PgEstimatorConfig estimator_config(const ExperimentConfig& c) {
  PgEstimatorConfig e;
  e.theta_init = c.theta_init;
  e.lengthscale = c.lengthscale;
  e.em_mu = c.em_mu;
  e.em_theta = c.em_theta;
  e.optimize_lengthscale = c.optimize_lengthscale;
  e.max_sweeps = c.max_sweeps;
  e.tol = c.tol;
  e.mc_samples = c.mc_samples;
  return e;
}

inline bool want_checkpoint(const ExperimentConfig& c, std::size_t seed_index) {
  if (c.model != EstimatorKind::Pg) return false;
  if (c.save_checkpoints == "all") return true;
  return c.save_checkpoints == "first_seed" && seed_index == 0;
}

} // namespace detail

inline SeedMetrics run_imitation_seed(const ExperimentConfig& c, int seed,
                                      std::size_t seed_index,
                                      const std::filesystem::path& dir) {
  GridSpec spec = c.grid;
  Rng env_rng(derive_seed(static_cast<std::uint64_t>(seed), "env"));
  const auto reward_cells =
      detail::sample_distinct_cells(spec.S(), c.random_rewards, env_rng);
  for (int cell : reward_cells) spec.reward_cells.push_back({cell, 1.0});

  const TabularMdp mdp = build_gridworld(spec);
  if (c.export_env) {
    save_mdp_json(dir / ("env_seed" + std::to_string(seed) + ".json"), mdp);
  }
  const Eigen::MatrixXd expert = make_softmax_expert(mdp, c.expert_beta);

  Rng demo_rng(derive_seed(static_cast<std::uint64_t>(seed), "demos"));
  const auto observed = detail::sample_distinct_cells(
      spec.S(), static_cast<int>(c.coverage * spec.S()), demo_rng);
  const DemonstrationSet demos =
      sample_demonstrations(expert, observed, c.demos_per_state, demo_rng);

  const Eigen::MatrixXd dist = grid_cell_distances(spec);
  Rng model_rng(derive_seed(static_cast<std::uint64_t>(seed), "model"));
  Eigen::MatrixXd estimate;
  if (c.model == EstimatorKind::Pg) {
    const PgEstimatorConfig ecfg = detail::estimator_config(c);
    const KernelSpec kernel = make_kernel(dist, ecfg);
    HyperParams hyper = make_hyper(demos.S, demos.A, kernel, ecfg.mean_init);
    FitOptions opts;
    opts.max_sweeps = ecfg.max_sweeps;
    opts.tol = ecfg.tol;
    opts.em_mu = ecfg.em_mu;
    opts.em_theta = ecfg.em_theta;
    opts.optimize_lengthscale = ecfg.optimize_lengthscale;
    const FitResult res = fit(demos.counts(), std::move(hyper), opts);
    estimate = posterior_mean_probs(res.posterior, ecfg.mc_samples, model_rng);
    if (detail::want_checkpoint(c, seed_index)) {
      save_checkpoint((dir / ("checkpoint_seed" + std::to_string(seed) + ".json")).string(),
                      res.hyper, res.posterior, res.elbo_trace);
    }
  } else {
    estimate = imitation_fit(demos, EstimatorKind::Dirichlet, dist, {}, model_rng);
  }

  detail::write_state_hellinger_csv(
      dir / ("state_hellinger_seed" + std::to_string(seed) + ".csv"), estimate, expert);
  detail::write_arrows_csv(dir / ("arrows_expert_seed" + std::to_string(seed) + ".csv"), spec, expert);
  detail::write_arrows_csv(dir / ("arrows_estimate_seed" + std::to_string(seed) + ".csv"), spec, estimate);

  SeedMetrics m;
  m.seed = seed;
  m.values = {{"mean_hellinger", mean_hellinger(estimate, expert)},
              {"value_loss", value_loss(estimate, mdp)}};
  return m;
}

inline SeedMetrics run_subgoal_seed(const ExperimentConfig& c, int seed, std::size_t,
                                    const std::filesystem::path& dir) {
  const GridGeometry geom(c.grid);
  const TabularMdp mdp = build_gridworld(c.grid);
  if (c.export_env) {
    save_mdp_json(dir / ("env_seed" + std::to_string(seed) + ".json"), mdp);
  }
  const Eigen::MatrixXd expert = make_softmax_expert(mdp, c.expert_beta);

  Rng demo_rng(derive_seed(static_cast<std::uint64_t>(seed), "demos"));
  const auto observed = detail::sample_distinct_cells(
      c.grid.S(), static_cast<int>(c.coverage * c.grid.S()), demo_rng);
  const DemonstrationSet demos =
      sample_demonstrations(expert, observed, c.demos_per_state, demo_rng);
  const Eigen::MatrixXd dist = grid_cell_distances(c.grid);

  Eigen::MatrixXd subgoal_policy;
  if (c.model == EstimatorKind::Pg) {
    SubgoalOptions opts;
    opts.beta_g = c.beta_g;
    opts.burn_in = c.gibbs_burn_in;
    opts.samples = c.gibbs_samples;
    opts.init_sweeps = c.gibbs_init_sweeps;
    opts.sweeps_per_iter = c.gibbs_sweeps_per_iter;
    opts.include_demo_likelihood = !c.literal_resampling;
    opts.estimator = detail::estimator_config(c);
    opts.estimator.em_mu = c.em_mu; // config default is true for this scenario
    Rng gibbs_rng(derive_seed(static_cast<std::uint64_t>(seed), "gibbs"));
    subgoal_policy =
        subgoal_gibbs_vi(demos, geom, mdp, all_states_goal_set(mdp.S), opts, gibbs_rng).policy;
  } else {
    subgoal_policy =
        dirichlet_subgoal_policy(demos, geom, mdp, all_states_goal_set(mdp.S), c.beta_g);
  }

  // Same-model imitation comparator on identical demonstrations.
  Rng model_rng(derive_seed(static_cast<std::uint64_t>(seed), "model"));
  PgEstimatorConfig icfg = detail::estimator_config(c);
  icfg.em_mu = false; // action-level estimation uses the density-estimator schedule
  const Eigen::MatrixXd imitation_policy =
      imitation_fit(demos, c.model, dist, icfg, model_rng);

  detail::write_state_hellinger_csv(
      dir / ("state_hellinger_seed" + std::to_string(seed) + ".csv"), subgoal_policy, expert);
  detail::write_arrows_csv(dir / ("arrows_expert_seed" + std::to_string(seed) + ".csv"), c.grid, expert);
  detail::write_arrows_csv(dir / ("arrows_subgoal_seed" + std::to_string(seed) + ".csv"), c.grid,
                           subgoal_policy);

  SeedMetrics m;
  m.seed = seed;
  m.values = {{"mean_hellinger", mean_hellinger(subgoal_policy, expert)},
              {"imitation_hellinger", mean_hellinger(imitation_policy, expert)}};
  return m;
}

inline SeedMetrics run_sysid_seed(const ExperimentConfig& c, int seed, std::size_t seed_index,
                                  const std::filesystem::path& dir) {
  GridSpec spec = c.grid;
  const Grid10 g = build_grid10(spec);
  if (c.export_env) {
    save_mdp_json(dir / ("env_seed" + std::to_string(seed) + ".json"), g.mdp);
  }
  const Eigen::MatrixXd dist = grid_cell_distances(spec);

  Rng env_rng(derive_seed(static_cast<std::uint64_t>(seed), "env"));
  std::vector<Transition> walk;
  walk.reserve(static_cast<std::size_t>(c.checkpoints.back()));
  int s = g.reset;
  for (int t = 0; t < c.checkpoints.back(); ++t) {
    const int a = static_cast<int>(env_rng.uniform_int(g.mdp.A));
    const int next = sample_transition(g.mdp, s, a, env_rng);
    walk.push_back({s, a, next});
    s = next;
  }

  std::unique_ptr<TransitionLearner> learner;
  PgTransitionLearner* pg = nullptr;
  if (c.model == EstimatorKind::Pg) {
    PgLearnerConfig lcfg;
    lcfg.estimator = detail::estimator_config(c);
    lcfg.init_sweeps = c.sysid_init_sweeps;
    lcfg.update_sweeps = c.sysid_update_sweeps;
    auto owned = std::make_unique<PgTransitionLearner>(g.mdp.S, g.mdp.A, dist, lcfg);
    pg = owned.get();
    learner = std::move(owned);
  } else {
    learner = std::make_unique<DirichletTransitionLearner>(g.mdp.S, g.mdp.A);
  }

  Rng model_rng(derive_seed(static_cast<std::uint64_t>(seed), "model"));
  out::CsvWriter trace(dir / ("trace_seed" + std::to_string(seed) + ".csv"),
                       {"transitions", "mean_hellinger"});
  SeedMetrics m;
  m.seed = seed;
  for (int ckpt : c.checkpoints) {
    const std::vector<Transition> sub(walk.begin(), walk.begin() + ckpt);
    learner->update(mdp_to_count_covariates(sub, g.mdp.S, g.mdp.A));
    const auto mean = learner->mean_dynamics(model_rng);
    double h = 0.0;
    for (int a = 0; a < g.mdp.A; ++a) {
      h += mean_hellinger(mean[static_cast<std::size_t>(a)], g.mdp.T(a));
    }
    h /= g.mdp.A;
    trace.row({static_cast<double>(ckpt), h});
    m.values.push_back({"h_" + std::to_string(ckpt), h});
  }
  if (pg != nullptr && detail::want_checkpoint(c, seed_index)) {
    for (int a = 0; a < g.mdp.A; ++a) {
      const auto& engine = pg->engine(a);
      save_checkpoint((dir / ("checkpoint_seed" + std::to_string(seed) + "_action" +
                              std::to_string(a) + ".json"))
                          .string(),
                      engine.hyper(), engine.posterior(), {});
    }
  }
  return m;
}

namespace detail {

inline std::unique_ptr<TransitionLearner> make_learner(const ExperimentConfig& c, int S, int A,
                                                       const Eigen::MatrixXd& dist) {
  if (c.model == EstimatorKind::Pg) {
    PgLearnerConfig lcfg;
    lcfg.estimator = estimator_config(c);
    lcfg.estimator.mc_samples = c.psrl_mc_samples;
    lcfg.init_sweeps = c.psrl_init_sweeps;
    lcfg.update_sweeps = c.psrl_update_sweeps;
    return std::make_unique<PgTransitionLearner>(S, A, dist, lcfg);
  }
  return std::make_unique<DirichletTransitionLearner>(S, A);
}

} // namespace detail

inline SeedMetrics run_brl_grid10_seed(const ExperimentConfig& c, int seed, std::size_t,
                                       const std::filesystem::path& dir) {
  const Grid10 g = build_grid10(c.grid);
  if (c.export_env) {
    save_mdp_json(dir / ("env_seed" + std::to_string(seed) + ".json"), g.mdp);
  }
  const Eigen::MatrixXd dist = grid_cell_distances(c.grid);
  const double optimal = expected_return(g.mdp, greedy_policy(value_iteration(g.mdp).Q));

  auto learner = detail::make_learner(c, g.mdp.S, g.mdp.A, dist);
  PsrlOptions opts;
  opts.variant = c.variant;
  opts.replan_every = c.replan_every;
  opts.horizon_total = c.horizon;
  opts.m_samples = c.m_samples;
  Rng psrl_rng(derive_seed(static_cast<std::uint64_t>(seed), "psrl"));
  const std::vector<double> raw = psrl_loop(g.mdp, *learner, opts, psrl_rng);

  out::CsvWriter trace(dir / ("trace_seed" + std::to_string(seed) + ".csv"),
                       {"transitions", "normalized_return"});
  double t90 = static_cast<double>(c.horizon + c.replan_every);
  bool crossed = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double normalized = raw[i] / optimal;
    trace.row({static_cast<double>((i + 1) * static_cast<std::size_t>(c.replan_every)),
               normalized});
    if (!crossed && normalized >= 0.9) {
      crossed = true;
      t90 = static_cast<double>((i + 1) * static_cast<std::size_t>(c.replan_every));
    }
  }

  SeedMetrics m;
  m.seed = seed;
  m.values = {{"transitions_to_90pct", t90},
              {"final_normalized_return", raw.empty() ? 0.0 : raw.back() / optimal}};
  return m;
}

inline SeedMetrics run_brl_queueing_seed(const ExperimentConfig& c, const TabularMdp& truth,
                                         int seed, const std::filesystem::path& dir) {
  const Eigen::MatrixXd dist = queue_state_distances(c.queue);
  Eigen::VectorXd occupancy(truth.S);
  for (int s = 0; s < truth.S; ++s) {
    occupancy[s] = -static_cast<double>(c.queue.b1_of(s) + c.queue.b2_of(s));
  }

  auto learner = detail::make_learner(c, truth.S, truth.A, dist);
  PsrlOptions opts;
  opts.variant = c.variant;
  opts.replan_every = c.episode_length;
  opts.horizon_total = c.episodes * c.episode_length;
  opts.m_samples = c.m_samples;
  opts.reset_each_block = true; // fresh start state per learning episode
  opts.entry_rewards = occupancy;
  Rng psrl_rng(derive_seed(static_cast<std::uint64_t>(seed), "psrl"));
  const std::vector<double> raw = psrl_loop(truth, *learner, opts, psrl_rng);

  out::CsvWriter trace(dir / ("trace_seed" + std::to_string(seed) + ".csv"),
                       {"episode", "expected_return"});
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    trace.row({static_cast<double>(i + 1), raw[i]});
    sum += raw[i];
  }

  SeedMetrics m;
  m.seed = seed;
  m.values = {{"final_return", raw.empty() ? 0.0 : raw.back()},
              {"mean_return", raw.empty() ? 0.0 : sum / static_cast<double>(raw.size())}};
  return m;
}

// ---------------------------------------------------------------------------
// Run orchestration

struct RunSummary {
  std::filesystem::path dir;
  std::vector<SeedMetrics> metrics;
};

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<SeedMetrics>& rows) {
  if (rows.empty()) throw std::runtime_error("metrics: no seed results");
  std::vector<std::string> header = {"seed"};
  for (const auto& kv : rows.front().values) header.push_back(kv.first);
  out::CsvWriter csv(path, header);
  for (const auto& row : rows) {
    std::vector<double> values = {static_cast<double>(row.seed)};
    for (const auto& kv : row.values) values.push_back(kv.second);
    csv.row(values);
  }
}

/// Output directory after the --out override and the PGVI_OUT_ROOT prefix
/// for relative paths.
inline std::filesystem::path resolve_out_dir(const ExperimentConfig& c,
                                             const std::optional<std::string>& out_override = {}) {
  namespace fs = std::filesystem;
  std::string dir = out_override.value_or(c.out_dir);
  if (const char* root = std::getenv("PGVI_OUT_ROOT"); root != nullptr && *root != '\0' &&
                                                       !fs::path(dir).is_absolute()) {
    dir = (fs::path(root) / dir).string();
  }
  return dir;
}

inline RunSummary run_experiment(const ExperimentConfig& c,
                                 const std::optional<std::string>& out_override = {}) {
  namespace fs = std::filesystem;
  RunSummary summary;
  summary.dir = resolve_out_dir(c, out_override);
  fs::create_directories(summary.dir);

  // The queueing ground truth is seed-independent; build it once.
  std::optional<TabularMdp> queue_truth;
  if (c.scenario == Scenario::BrlQueueing) {
    queue_truth = build_queue_mdp(c.queue);
    if (c.export_env) save_mdp_json(summary.dir / "env.json", *queue_truth);
  }

  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    const int seed = c.seeds[i];
    switch (c.scenario) {
      case Scenario::Imitation:
        summary.metrics.push_back(run_imitation_seed(c, seed, i, summary.dir));
        break;
      case Scenario::Subgoal:
        summary.metrics.push_back(run_subgoal_seed(c, seed, i, summary.dir));
        break;
      case Scenario::Sysid:
        summary.metrics.push_back(run_sysid_seed(c, seed, i, summary.dir));
        break;
      case Scenario::BrlGrid10:
        summary.metrics.push_back(run_brl_grid10_seed(c, seed, i, summary.dir));
        break;
      case Scenario::BrlQueueing:
        summary.metrics.push_back(run_brl_queueing_seed(c, *queue_truth, seed, summary.dir));
        break;
    }
  }

  write_metrics_csv(summary.dir / "metrics.csv", summary.metrics);

  json manifest;
  manifest["tool"] = "pgvi";
  manifest["scenario"] = scenario_name(c.scenario);
  manifest["model"] = c.model == EstimatorKind::Pg ? "pg" : "dirichlet";
  manifest["seeds"] = c.seeds;
  manifest["config"] = c.resolved;
  manifest["config_hash"] = out::hex64(out::json_hash(c.resolved));
  manifest["env_hash"] = environment_hash(c);
  manifest["git"] = out::git_describe();
  std::ofstream mf(summary.dir / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << "\n";
  return summary;
}

// ---------------------------------------------------------------------------
// Run comparison

struct ColumnDelta {
  std::string column;
  double mean_delta = 0.0;
  int a_better = 0; // delta < 0: run A smaller
  int b_better = 0;
  int ties = 0;
  double sign_test_p = 1.0;
};

struct CompareResult {
  std::vector<ColumnDelta> columns;
  int paired_seeds = 0;
};

namespace detail {

inline std::map<int, std::map<std::string, double>> read_metrics_csv(
    const std::filesystem::path& path, std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("compare: missing metric file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("compare: empty metric file " + path.string());
  std::vector<std::string> header;
  std::stringstream hs(line);
  std::string field;
  while (std::getline(hs, field, ',')) header.push_back(field);
  if (header.empty() || header.front() != "seed") {
    throw std::runtime_error("compare: malformed header in " + path.string());
  }
  columns.assign(header.begin() + 1, header.end());
  std::map<int, std::map<std::string, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> values;
    while (std::getline(ls, field, ',')) values.push_back(std::stod(field));
    if (values.size() != header.size()) {
      throw std::runtime_error("compare: malformed row in " + path.string());
    }
    auto& row = rows[static_cast<int>(values[0])];
    for (std::size_t i = 1; i < header.size(); ++i) row[header[i]] = values[i];
  }
  return rows;
}

inline double binomial_sign_test(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  // two-sided exact binomial tail at p = 1/2
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    tail += std::exp(log_binom(n, i) - n * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

} // namespace detail

/// Paired per-seed metric deltas between two run directories of the same
/// scenario and environment.
inline CompareResult compare_runs(const std::string& dir_a, const std::string& dir_b) {
  namespace fs = std::filesystem;
  auto load_manifest = [](const std::string& dir) {
    const fs::path path = fs::path(dir) / "manifest.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("compare: missing manifest " + path.string());
    json j;
    in >> j;
    return j;
  };
  const json ma = load_manifest(dir_a);
  const json mb = load_manifest(dir_b);
  if (ma.at("scenario") != mb.at("scenario")) {
    throw ConfigError("compare: runs have different scenarios (" +
                      ma.at("scenario").get<std::string>() + " vs " +
                      mb.at("scenario").get<std::string>() + ")");
  }
  if (ma.at("env_hash") != mb.at("env_hash")) {
    throw ConfigError("compare: runs have different environment hashes");
  }

  std::vector<std::string> cols_a, cols_b;
  const auto rows_a = detail::read_metrics_csv(fs::path(dir_a) / "metrics.csv", cols_a);
  const auto rows_b = detail::read_metrics_csv(fs::path(dir_b) / "metrics.csv", cols_b);

  CompareResult result;
  for (const auto& col : cols_a) {
    if (std::find(cols_b.begin(), cols_b.end(), col) == cols_b.end()) continue;
    ColumnDelta delta;
    delta.column = col;
    double acc = 0.0;
    int n = 0;
    for (const auto& [seed, row] : rows_a) {
      const auto it = rows_b.find(seed);
      if (it == rows_b.end()) continue;
      const double d = row.at(col) - it->second.at(col);
      acc += d;
      ++n;
      if (d < 0.0) {
        ++delta.a_better;
      } else if (d > 0.0) {
        ++delta.b_better;
      } else {
        ++delta.ties;
      }
    }
    if (n == 0) throw ConfigError("compare: no common seeds between runs");
    result.paired_seeds = n;
    delta.mean_delta = acc / n;
    delta.sign_test_p = detail::binomial_sign_test(delta.a_better, delta.b_better);
    result.columns.push_back(delta);
  }
  return result;
}

inline std::string format_compare_table(const CompareResult& r, const std::string& name_a,
                                        const std::string& name_b) {
  std::ostringstream os;
  os << "paired seeds: " << r.paired_seeds << "\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %14s %9s %9s %6s %10s\n", "column", "mean(A-B)",
                "A<B", "A>B", "ties", "sign-p");
  os << line;
  for (const auto& c : r.columns) {
    std::snprintf(line, sizeof(line), "%-28s %14.6g %9d %9d %6d %10.4g\n", c.column.c_str(),
                  c.mean_delta, c.a_better, c.b_better, c.ties, c.sign_test_p);
    os << line;
  }
  os << "A = " << name_a << "\nB = " << name_b << "\n";
  return os.str();
}

} // namespace pgvi
