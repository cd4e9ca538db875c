#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atcl/config.hpp"

namespace atcl::harness {

using Json = nlohmann::ordered_json;

/// Bumped whenever a metrics field changes meaning; fields are never renamed.
inline constexpr int kSchemaVersion = 1;

struct RoundMetrics {
  int round = 0;
  double global_loss = 0.0;
  double global_accuracy = 0.0;
  control::OperatingState agent_state = control::OperatingState::kNormal;
  double theta = 0.0;
  double alpha = 0.0;
  std::string rationale;
  double loss_trend = 0.0;
  double trust_dispersion = 0.0;
  std::vector<sim::ClientId> participants;
  /// Per-client signals of this round's participants, ascending client id.
  std::vector<signals::SignalVector> signals;
  /// TOPSIS closeness of each participant, aligned with `signals`.
  std::vector<double> raw_trust;
  /// Smoothed trust indexed by client id.
  std::vector<double> trust;
  /// Exclusion set after this round's decision.
  std::vector<sim::ClientId> excluded;
  std::vector<sim::ClientId> newly_excluded;
  std::vector<sim::ClientId> reinstated;
  /// Clients whose exclusion state toggled this round.
  std::vector<sim::ClientId> flip_events;
  /// Clients the server would drop if they reported: excluded or below theta.
  std::vector<sim::ClientId> omitted;
  std::vector<sim::ClientId> aggregated;
  bool stalled = false;
  std::optional<double> omission_precision;
  std::optional<double> omission_recall;
  std::int64_t messages = 0;
  std::int64_t payload_bytes = 0;
};

Json to_json(const RoundMetrics& m);

struct RunResult {
  /// First line of metrics.jsonl: run identity and ground-truth labels.
  Json header;
  std::vector<RoundMetrics> rounds;
  /// One record per round: state, theta, alpha, exclusions, rationale.
  std::vector<Json> decisions;
};

/// Executes one federation run end to end. Deterministic in (config, seed, kind).
/// Throws ConfigError for an invalid configuration.
RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed,
                       control::ControllerKind controller);

struct RunSummary {
  std::string scenario;
  std::string controller;
  std::uint64_t seed = 0;
  int rounds = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  int total_flips = 0;
  std::vector<int> flips_per_client;
  std::optional<double> mean_adversary_trust;
  std::optional<double> mean_benign_trust;
  std::optional<double> final_precision;
  std::optional<double> final_recall;
  /// First round in which some true adversary is omitted.
  std::optional<int> first_correct_exclusion_round;
  /// Std of each client's smoothed-trust trajectory over the run.
  std::vector<double> trust_std_per_client;
  /// Longest run of consecutive rounds any benign client spent excluded.
  int longest_benign_exclusion = 0;
  int stalled_rounds = 0;
  std::map<std::string, int> rounds_per_state;
  std::int64_t total_messages = 0;
  std::int64_t total_payload_bytes = 0;
};

Json to_json(const RunSummary& s);

/// Computes the summary from serialized records, so the same path serves live
/// runs and `summarize` on stored artifacts. Throws std::runtime_error on a
/// malformed record.
RunSummary summarize_records(const Json& header, const std::vector<Json>& rounds);
RunSummary summarize(const RunResult& run);

/// Writes metrics.jsonl, decisions.jsonl and summary.json into `dir`.
void write_run(const RunResult& run, const std::filesystem::path& dir);

/// Reads a run directory back. Throws std::runtime_error on missing or corrupt files.
RunSummary summarize_directory(const std::filesystem::path& dir);

struct SuiteRow {
  double intensity = 0.0;
  control::ControllerKind controller = control::ControllerKind::kAtcl;
  std::uint64_t seed = 0;
  RunSummary summary;
};

/// Config with round(intensity * count) benign clients replaced by the suite's attack.
ScenarioConfig with_intensity(const ScenarioConfig& base, double intensity);

/// controllers x seeds x intensities, run on up to `workers` threads. When
/// `out` is non-empty, writes each run plus results.csv (one row per run per
/// round), runs.csv (one row per run) and cells.csv (medians over seeds).
std::vector<SuiteRow> run_suite(const ScenarioConfig& config, const std::filesystem::path& out,
                                int workers);

double median(std::vector<double> xs);

}  // namespace atcl::harness
