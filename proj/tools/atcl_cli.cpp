// Command-line entry point: run, suite, summarize, print-config.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "atcl/config.hpp"
#include "atcl/errors.hpp"
#include "atcl/runner.hpp"

namespace fs = std::filesystem;
using namespace atcl;

namespace {

harness::ScenarioConfig resolve_config(const std::string& path, const std::string& scenario) {
  if (!path.empty()) return harness::load_config(path);
  if (!scenario.empty()) return harness::canonical_scenario(scenario);
  return harness::ScenarioConfig{};
}

int summarize_tree(const fs::path& root) {
  if (fs::exists(root / "metrics.jsonl")) {
    std::cout << harness::to_json(harness::summarize_directory(root)).dump(2) << "\n";
    return 0;
  }
  if (!fs::is_directory(root)) throw std::runtime_error("no such run directory: " + root.string());
  std::vector<fs::path> runs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.jsonl") {
      runs.push_back(entry.path().parent_path());
    }
  }
  if (runs.empty()) throw std::runtime_error("no metrics.jsonl found under " + root.string());
  std::sort(runs.begin(), runs.end());
  for (const auto& dir : runs) std::cout << harness::to_json(harness::summarize_directory(dir)).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("atcl"));
  spdlog::set_level(spdlog::level::info);
  // SPDLOG_LEVEL=debug|info|warn|off
  spdlog::cfg::load_env_levels();

  CLI::App app{"Trust-coordinated federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scenario;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string controller_name;
  std::string out_dir;
  std::string in_dir;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto* run = app.add_subcommand("run", "Run one scenario with one seed and controller");
  run->add_option("--config", config_path, "Scenario config file");
  run->add_option("--scenario", scenario, "Canonical scenario name (used when --config is absent)");
  run->add_option("--seed", seed, "Master seed (default: first seed of the config)")
      ->each([&](const std::string&) { seed_given = true; });
  run->add_option("--controller", controller_name, "atcl|fixed|adaptive|none");
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* suite = app.add_subcommand("suite", "Run controllers x seeds x intensities");
  suite->add_option("--config", config_path, "Scenario config file");
  suite->add_option("--scenario", scenario, "Canonical scenario name");
  suite->add_option("--out", out_dir, "Output directory")->required();
  suite->add_option("--jobs", workers, "Parallel runs")->check(CLI::PositiveNumber);

  auto* summ = app.add_subcommand("summarize", "Summarize stored run artifacts");
  summ->add_option("--in", in_dir, "Run directory or suite directory")->required();

  auto* print = app.add_subcommand("print-config", "Print every configuration key and value");
  print->add_option("--config", config_path, "Scenario config file");
  print->add_option("--scenario", scenario, "Canonical scenario name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = resolve_config(config_path, scenario);
      if (!controller_name.empty()) {
        const auto kind = control::parse_controller_kind(controller_name);
        if (!kind) throw ConfigError("controller: expected atcl|fixed|adaptive|none, got '" + controller_name + "'");
        config.controller = *kind;
      }
      harness::validate(config);
      const std::uint64_t run_seed = seed_given ? seed : config.seeds.front();
      const auto result = harness::run_scenario(config, run_seed, config.controller);
      harness::write_run(result, out_dir);
      const auto summary = harness::summarize(result);
      spdlog::info("{} controller={} seed={} final_accuracy={:.4f} flips={}", config.name,
                   summary.controller, run_seed, summary.final_accuracy, summary.total_flips);
    } else if (*suite) {
      const auto config = resolve_config(config_path, scenario);
      const auto rows = harness::run_suite(config, out_dir, workers);
      spdlog::info("{}: {} runs written to {}", config.name, rows.size(), out_dir);
    } else if (*summ) {
      return summarize_tree(in_dir);
    } else if (*print) {
      const auto config = resolve_config(config_path, scenario);
      harness::validate(config);
      std::cout << harness::format_config(config);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
