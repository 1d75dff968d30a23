// Experiment runner CLI.
//
//   pgvi run <config.json> [--seed N] [--out DIR] [--set key.path=value]...
//   pgvi compare <dirA> <dirB>
//
// Exit codes: 0 success, 2 configuration/validation error, 3 numerical error
// (partial artifacts are kept next to a FAILED marker).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgvi/experiments.hpp"

namespace {

using nlohmann::json;

/// Applies a dotted-path override like "kernel.theta_init=2.5". The value is
/// parsed as JSON when possible and falls back to a plain string.
void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw pgvi::ConfigError("--set expects key.path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &root;
  std::size_t begin = 0;
  for (;;) {
    const auto dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) throw pgvi::ConfigError("--set: empty key segment in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

int run_command(const std::string& config_path, std::optional<int> seed,
                std::optional<std::string> out_dir, const std::vector<std::string>& overrides) {
  json root;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config " << config_path << "\n";
      return 2;
    }
    try {
      in >> root;
    } catch (const json::exception& e) {
      std::cerr << "error: config JSON parse failure: " << e.what() << "\n";
      return 2;
    }
  }
  for (const auto& assignment : overrides) apply_override(root, assignment);
  if (seed) root["seeds"] = std::vector<int>{*seed};

  const pgvi::ExperimentConfig config = pgvi::parse_config(root);
  try {
    const pgvi::RunSummary summary = pgvi::run_experiment(config, out_dir);
    std::cout << "run complete: " << summary.dir.string() << " ("
              << summary.metrics.size() << " seeds)\n";
    return 0;
  } catch (const pgvi::NumericalError& e) {
    // Keep partial artifacts and leave a marker describing the failure.
    const std::filesystem::path dir = pgvi::resolve_out_dir(config, out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream marker(dir / "FAILED");
    marker << e.what() << "\n";
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
}

int compare_command(const std::string& dir_a, const std::string& dir_b) {
  const pgvi::CompareResult result = pgvi::compare_runs(dir_a, dir_b);
  std::cout << pgvi::format_compare_table(result, dir_a, dir_b);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlated multinomial inference experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "Path to the experiment config")->required();
  run->add_option("--seed", seed, "Run a single seed instead of the configured list");
  run->add_option("--out", out_dir, "Output directory override");
  run->add_option("--set", overrides, "Dotted-path config override, e.g. kernel.theta_init=2");

  std::string dir_a, dir_b;
  auto* compare = app.add_subcommand("compare", "Paired per-seed metric deltas of two runs");
  compare->add_option("dirA", dir_a, "First run directory")->required();
  compare->add_option("dirB", dir_b, "Second run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, seed, out_dir, overrides);
    return compare_command(dir_a, dir_b);
  } catch (const pgvi::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pgvi::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
