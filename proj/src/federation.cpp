#include "atcl/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "atcl/errors.hpp"
#include "atcl/rng.hpp"

namespace atcl::sim {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

void validate(const TaskConfig& c) {
  require(c.feature_dim >= 1, "task.feature_dim", "must be >= 1");
  require(c.num_classes >= 2, "task.num_classes", "must be >= 2");
  require(c.num_clients >= 1, "clients.count", "must be >= 1");
  require(c.samples_per_client >= 10, "task.samples_per_client", "must be >= 10");
  require(std::isfinite(c.noise_std) && c.noise_std >= 0.0, "task.noise_std", "must be >= 0");
  require(std::isfinite(c.center_scale) && c.center_scale > 0.0, "task.center_scale", "must be > 0");
  require(std::isfinite(c.concentration) && c.concentration > 0.0, "task.concentration", "must be > 0");
  require(c.holdout_size >= 1, "task.holdout_size", "must be >= 1");
  if (!c.centers.empty()) {
    require(c.centers.size() == static_cast<std::size_t>(c.num_classes), "task.centers",
            "need exactly num_classes centers");
    for (const auto& center : c.centers) {
      require(center.size() == static_cast<std::size_t>(c.feature_dim), "task.centers",
              "every center needs feature_dim coordinates");
    }
  }
}

namespace {

std::vector<double> dirichlet(Rng& rng, int k, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> w(static_cast<std::size_t>(k));
  double total = 0.0;
  for (double& x : w) {
    x = gamma(rng);
    total += x;
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed; collapse onto one class.
    std::fill(w.begin(), w.end(), 0.0);
    w[std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng)] = 1.0;
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

void append_sample(Dataset& out, const SyntheticTask& task, int label, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto& center = task.class_centers[static_cast<std::size_t>(label)];
  for (const double mu : center) out.features.push_back(mu + task.noise_std * noise(rng));
  out.labels.push_back(label);
}

}  // namespace

FederatedData generate_task(const TaskConfig& config, std::uint64_t seed) {
  validate(config);
  FederatedData out;
  SyntheticTask& task = out.task;
  task.feature_dim = config.feature_dim;
  task.num_classes = config.num_classes;
  task.noise_std = config.noise_std;
  task.samples_per_client = config.samples_per_client;

  if (!config.centers.empty()) {
    task.class_centers = config.centers;
  } else {
    Rng rng = make_rng(seed, Stream::kTask);
    std::normal_distribution<double> coord(0.0, config.center_scale);
    task.class_centers.assign(static_cast<std::size_t>(config.num_classes),
                              std::vector<double>(static_cast<std::size_t>(config.feature_dim)));
    for (auto& center : task.class_centers) {
      for (double& x : center) x = coord(rng);
    }
  }
  for (std::size_t a = 0; a < task.class_centers.size(); ++a) {
    for (std::size_t b = a + 1; b < task.class_centers.size(); ++b) {
      require(task.class_centers[a] != task.class_centers[b], "task.centers",
              "class centers must be pairwise distinct");
    }
  }

  out.clients.reserve(static_cast<std::size_t>(config.num_clients));
  for (int client = 0; client < config.num_clients; ++client) {
    Rng rng = make_rng(seed, Stream::kClientData, static_cast<std::uint64_t>(client));
    const auto mixture = dirichlet(rng, config.num_classes, config.concentration);
    std::discrete_distribution<int> pick(mixture.begin(), mixture.end());
    Dataset ds;
    ds.feature_dim = config.feature_dim;
    for (int i = 0; i < config.samples_per_client; ++i) append_sample(ds, task, pick(rng), rng);
    out.clients.push_back(std::move(ds));
  }

  Rng rng = make_rng(seed, Stream::kHoldout);
  out.holdout.feature_dim = config.feature_dim;
  for (int i = 0; i < config.holdout_size; ++i) {
    append_sample(out.holdout, task, i % config.num_classes, rng);
  }
  return out;
}

std::string behavior_name(const Behavior& behavior) {
  struct Visitor {
    std::string operator()(const Benign&) const { return "benign"; }
    std::string operator()(const LabelFlip&) const { return "label_flip"; }
    std::string operator()(const SignFlipPoison&) const { return "sign_flip"; }
    std::string operator()(const NoisyUpdate&) const { return "noisy"; }
    std::string operator()(const Intermittent&) const { return "intermittent"; }
  };
  return std::visit(Visitor{}, behavior);
}

void validate(const ClientProfile& profile) {
  if (const auto* lf = std::get_if<LabelFlip>(&profile.behavior)) {
    require(lf->flip_fraction >= 0.0 && lf->flip_fraction <= 1.0, "clients.label_flip.fraction",
            "must be in [0,1]");
  } else if (const auto* sf = std::get_if<SignFlipPoison>(&profile.behavior)) {
    require(std::isfinite(sf->scale) && sf->scale > 0.0, "clients.sign_flip.scale", "must be > 0");
  } else if (const auto* nu = std::get_if<NoisyUpdate>(&profile.behavior)) {
    require(std::isfinite(nu->sigma) && nu->sigma >= 0.0, "clients.noisy.sigma", "must be >= 0");
  } else if (const auto* im = std::get_if<Intermittent>(&profile.behavior)) {
    require(im->participation_prob > 0.0 && im->participation_prob <= 1.0,
            "clients.intermittent.prob", "must be in (0,1]");
  }
}

std::vector<int> effective_labels(const Dataset& data, const ClientProfile& profile,
                                  int num_classes) {
  std::vector<int> labels = data.labels;
  if (const auto* lf = std::get_if<LabelFlip>(&profile.behavior)) {
    // Samples are drawn i.i.d., so the leading block is a random subset.
    const auto n_flip = static_cast<std::size_t>(
        std::llround(lf->flip_fraction * static_cast<double>(labels.size())));
    for (std::size_t i = 0; i < n_flip; ++i) labels[i] = (labels[i] + 1) % num_classes;
  }
  return labels;
}

ClientUpdate local_train(const GlobalModel& model, const Dataset& data,
                         const ClientProfile& profile, const TrainConfig& train,
                         int num_classes, std::uint64_t seed) {
  if (train.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (!(train.lr >= 0.0) || !std::isfinite(train.lr)) throw ConfigError("train.lr: must be >= 0");
  if (train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (data.size() == 0) throw SimulationFault("local_train: client has no data");
  for (const double w : model.parameters) {
    if (!std::isfinite(w)) throw SimulationFault("local_train: global model is not finite");
  }

  const SoftmaxRegression net(data.feature_dim, num_classes);
  if (model.parameters.size() != net.parameter_count()) {
    throw SimulationFault("local_train: parameter count does not match the task");
  }
  const std::vector<int> labels = effective_labels(data, profile, num_classes);

  std::vector<double> params = model.parameters;
  std::vector<double> grad(params.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng{mix64(seed)};
  const auto batch = static_cast<std::size_t>(train.batch_size);

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const double loss = net.loss_and_gradient(
          params, data, labels, std::span<const std::size_t>(order).subspan(start, len), grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "client " << profile.client_id << " round " << model.round
            << ": non-finite training loss in epoch " << epoch;
        throw SimulationFault(msg.str());
      }
      for (std::size_t k = 0; k < params.size(); ++k) {
        params[k] -= train.lr * grad[k];
        if (!std::isfinite(params[k])) {
          throw SimulationFault("client " + std::to_string(profile.client_id) +
                                ": parameters diverged in epoch " + std::to_string(epoch));
        }
      }
    }
  }

  ClientUpdate update;
  update.client_id = profile.client_id;
  update.round = model.round;
  update.num_samples = static_cast<int>(data.size());
  update.local_loss = net.loss(params, data, labels);
  if (!std::isfinite(update.local_loss)) {
    throw SimulationFault("client " + std::to_string(profile.client_id) +
                          ": non-finite loss after training");
  }
  update.delta.resize(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) update.delta[k] = params[k] - model.parameters[k];

  if (const auto* sf = std::get_if<SignFlipPoison>(&profile.behavior)) {
    for (double& x : update.delta) x *= -sf->scale;
  } else if (const auto* nu = std::get_if<NoisyUpdate>(&profile.behavior)) {
    Rng noise_rng{mix64(seed ^ static_cast<std::uint64_t>(Stream::kUpdateNoise))};
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& x : update.delta) x += nu->sigma * noise(noise_rng);
  }
  return update;
}

Federation::Federation(FederationConfig config)
    : config_(std::move(config)),
      data_(generate_task(config_.task, config_.seed)),
      param_count_(SoftmaxRegression(config_.task.feature_dim, config_.task.num_classes)
                       .parameter_count()) {
  if (config_.roster.size() != static_cast<std::size_t>(config_.task.num_clients)) {
    throw ConfigError("clients.count: roster size does not match the number of clients");
  }
  for (std::size_t i = 0; i < config_.roster.size(); ++i) {
    if (config_.roster[i].client_id != static_cast<ClientId>(i)) {
      throw ConfigError("clients: roster must be indexed by client_id");
    }
    validate(config_.roster[i]);
  }
  model_.parameters.assign(param_count_, 0.0);
}

void Federation::set_model(GlobalModel model) {
  if (model.parameters.size() != param_count_) {
    throw SimulationFault("set_model: parameter count mismatch");
  }
  model_ = std::move(model);
}

std::int64_t Federation::message_bytes() const noexcept {
  return static_cast<std::int64_t>(param_count_ * sizeof(double));
}

RoundResult Federation::run_round(int round) {
  RoundResult result;
  result.round = round;
  model_.round = round;
  result.participated.assign(config_.roster.size(), true);

  std::vector<ClientId> participants;
  for (const auto& profile : config_.roster) {
    if (const auto* im = std::get_if<Intermittent>(&profile.behavior)) {
      Rng rng = make_rng(config_.seed, Stream::kParticipation,
                         static_cast<std::uint64_t>(profile.client_id),
                         static_cast<std::uint64_t>(round));
      result.participated[static_cast<std::size_t>(profile.client_id)] =
          std::bernoulli_distribution(im->participation_prob)(rng);
    }
    if (result.participated[static_cast<std::size_t>(profile.client_id)]) {
      participants.push_back(profile.client_id);
    }
  }

  result.updates.resize(participants.size());
  auto train_one = [&](std::size_t slot) {
    const ClientId id = participants[slot];
    result.updates[slot] = local_train(
        model_, data_.clients[static_cast<std::size_t>(id)],
        config_.roster[static_cast<std::size_t>(id)], config_.train, config_.task.num_classes,
        derive_seed(config_.seed, Stream::kTraining, static_cast<std::uint64_t>(id),
                    static_cast<std::uint64_t>(round)));
  };

  const auto workers = static_cast<std::size_t>(std::max(1, config_.threads));
  if (workers == 1 || participants.size() < 2) {
    for (std::size_t slot = 0; slot < participants.size(); ++slot) train_one(slot);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(participants.size());
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(workers, participants.size()); ++w) {
        pool.emplace_back([&] {
          for (std::size_t slot = next++; slot < participants.size(); slot = next++) {
            try {
              train_one(slot);
            } catch (...) {
              errors[slot] = std::current_exception();
            }
          }
        });
      }
    }
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  // One broadcast and one upload per participant.
  result.messages = 2 * static_cast<std::int64_t>(participants.size());
  result.payload_bytes = result.messages * message_bytes();
  total_messages_ += result.messages;
  total_bytes_ += result.payload_bytes;
  return result;
}

Evaluation Federation::evaluate() const { return evaluate(model_); }

Evaluation Federation::evaluate(const GlobalModel& model) const {
  return evaluate_global(model, data_.holdout, config_.task.num_classes);
}

}  // namespace atcl::sim
