#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "atcl/controller.hpp"
#include "atcl/federation.hpp"
#include "atcl/signals.hpp"

namespace atcl::harness {

/// How many clients follow each behaviour. Ids are assigned in the order
/// benign, noisy, intermittent, label_flip, sign_flip.
struct RosterSpec {
  int count = 20;
  int benign = 20;
  int noisy = 0;
  double noisy_sigma = 0.05;
  int intermittent = 0;
  double intermittent_prob = 0.5;
  int label_flip = 0;
  double label_flip_fraction = 0.8;
  int sign_flip = 0;
  double sign_flip_scale = 1.0;
};

struct SuiteSpec {
  std::vector<control::ControllerKind> controllers{
      control::ControllerKind::kAtcl, control::ControllerKind::kFixedAtsssf,
      control::ControllerKind::kAdaptiveAtsssf, control::ControllerKind::kNoTrust};
  /// Fractions of clients turned adversarial, taken from the benign pool.
  std::vector<double> intensities{0.0};
  /// "sign_flip" or "label_flip".
  std::string attack = "sign_flip";
};

struct ScenarioConfig {
  std::string name = "custom";
  sim::TaskConfig task;
  sim::TrainConfig train;
  RosterSpec clients;
  int rounds = 100;
  control::ControllerKind controller = control::ControllerKind::kAtcl;
  control::ControllerParams params;
  signals::SignalParams signal;
  double t_init = 0.5;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "runs";
  /// Drop every adversary's update before aggregation (upper-bound reference).
  bool oracle_exclusion = false;
  int threads = 1;
  SuiteSpec suite;
};

/// Throws ConfigError naming the offending field.
void validate(const ScenarioConfig& config);

/// Parses `key = value` lines with flat dotted keys; `#` starts a comment.
/// Keys not mentioned keep their defaults. Throws ConfigError on unknown keys
/// or malformed values.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in the format parse_config reads.
std::string format_config(const ScenarioConfig& config);

/// Client roster in client_id order.
std::vector<sim::ClientProfile> build_roster(const RosterSpec& spec);

/// Shipped scenarios: S-clean, S-poison, S-flip, S-noisy, S-churn, S-sweep.
std::vector<std::string> canonical_scenario_names();
/// Throws ConfigError for an unknown name.
ScenarioConfig canonical_scenario(std::string_view name);

}  // namespace atcl::harness
