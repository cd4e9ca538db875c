#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "atcl/model.hpp"

namespace atcl::sim {

using ClientId = int;

struct TaskConfig {
  int feature_dim = 8;
  int num_classes = 4;
  int num_clients = 20;
  int samples_per_client = 100;
  double noise_std = 0.7;
  /// Standard deviation of the randomly drawn class centers.
  double center_scale = 1.5;
  /// Symmetric Dirichlet concentration of each client's class mixture.
  double concentration = 20.0;
  int holdout_size = 1000;
  /// Explicit class centers; when non-empty they replace the random draw.
  std::vector<std::vector<double>> centers;
};

struct SyntheticTask {
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<std::vector<double>> class_centers;
  double noise_std = 0.0;
  int samples_per_client = 0;
};

struct FederatedData {
  SyntheticTask task;
  std::vector<Dataset> clients;
  /// Server-side evaluation set, class-balanced.
  Dataset holdout;
};

/// Throws ConfigError naming the first invalid field.
void validate(const TaskConfig& config);

/// Draws class centers, per-client non-IID datasets and the holdout set.
/// Deterministic in (config, seed). Throws ConfigError on invalid dimensions.
FederatedData generate_task(const TaskConfig& config, std::uint64_t seed);

// Client behaviours. LabelFlip and SignFlipPoison are adversarial; NoisyUpdate
// and Intermittent model benign deviations.
struct Benign {};
struct LabelFlip {
  double flip_fraction = 0.8;
};
struct SignFlipPoison {
  double scale = 1.0;
};
struct NoisyUpdate {
  double sigma = 0.1;
};
struct Intermittent {
  double participation_prob = 0.5;
};

using Behavior = std::variant<Benign, LabelFlip, SignFlipPoison, NoisyUpdate, Intermittent>;

struct ClientProfile {
  ClientId client_id = 0;
  Behavior behavior = Benign{};

  bool is_adversarial() const noexcept {
    return std::holds_alternative<LabelFlip>(behavior) ||
           std::holds_alternative<SignFlipPoison>(behavior);
  }
};

std::string behavior_name(const Behavior& behavior);

/// Throws ConfigError when a behaviour parameter is out of range.
void validate(const ClientProfile& profile);

struct TrainConfig {
  int epochs = 1;
  double lr = 0.02;
  int batch_size = 16;
};

struct ClientUpdate {
  ClientId client_id = 0;
  int round = 0;
  std::vector<double> delta;
  int num_samples = 0;
  double local_loss = 0.0;
};

/// Mini-batch gradient descent on the client's data starting from `model`.
/// The behaviour transform is applied to the data (LabelFlip) or to the honest
/// delta (SignFlipPoison, NoisyUpdate). Pure in its arguments.
/// Throws SimulationFault if the training loss becomes non-finite.
ClientUpdate local_train(const GlobalModel& model, const Dataset& data,
                         const ClientProfile& profile, const TrainConfig& train,
                         int num_classes, std::uint64_t seed);

/// Labels after the LabelFlip transform (identity for other behaviours).
std::vector<int> effective_labels(const Dataset& data, const ClientProfile& profile,
                                  int num_classes);

struct RoundResult {
  int round = 0;
  /// Participant updates in ascending client_id order.
  std::vector<ClientUpdate> updates;
  /// Indexed by client_id.
  std::vector<bool> participated;
  std::int64_t messages = 0;
  std::int64_t payload_bytes = 0;
};

struct FederationConfig {
  TaskConfig task;
  TrainConfig train;
  /// Indexed by client_id; size must equal task.num_clients.
  std::vector<ClientProfile> roster;
  std::uint64_t seed = 0;
  /// Worker threads for local training; results never depend on this.
  int threads = 1;
};

/// Round-sequential orchestrator owning the data, the roster and the current
/// global model.
class Federation {
 public:
  explicit Federation(FederationConfig config);

  RoundResult run_round(int round);

  const GlobalModel& model() const noexcept { return model_; }
  void set_model(GlobalModel model);

  Evaluation evaluate() const;
  Evaluation evaluate(const GlobalModel& model) const;

  const FederatedData& data() const noexcept { return data_; }
  const FederationConfig& config() const noexcept { return config_; }
  std::size_t parameter_count() const noexcept { return param_count_; }
  /// Bytes of one serialized model or update (8 bytes per parameter).
  std::int64_t message_bytes() const noexcept;

  std::int64_t total_messages() const noexcept { return total_messages_; }
  std::int64_t total_payload_bytes() const noexcept { return total_bytes_; }

 private:
  FederationConfig config_;
  FederatedData data_;
  std::size_t param_count_;
  GlobalModel model_;
  std::int64_t total_messages_ = 0;
  std::int64_t total_bytes_ = 0;
};

}  // namespace atcl::sim
