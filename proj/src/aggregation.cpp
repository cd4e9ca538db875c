#include "atcl/aggregation.hpp"

#include <algorithm>
#include <stdexcept>

namespace atcl::agg {

namespace {

std::vector<const sim::ClientUpdate*> by_client(std::span<const sim::ClientUpdate> updates) {
  std::vector<const sim::ClientUpdate*> out;
  out.reserve(updates.size());
  for (const auto& u : updates) out.push_back(&u);
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });
  return out;
}

void apply_weighted(sim::GlobalModel& model, const std::vector<const sim::ClientUpdate*>& chosen,
                    const std::vector<double>& weights) {
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto& delta = chosen[i]->delta;
    if (delta.size() != model.parameters.size()) {
      throw std::invalid_argument("aggregate: delta dimension does not match the model");
    }
  }
  std::vector<double> step(model.parameters.size(), 0.0);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    for (std::size_t k = 0; k < step.size(); ++k) step[k] += weights[i] * chosen[i]->delta[k];
  }
  for (std::size_t k = 0; k < step.size(); ++k) model.parameters[k] += step[k];
}

}  // namespace

std::pair<sim::GlobalModel, AggregationReport> aggregate(
    const sim::GlobalModel& model, std::span<const sim::ClientUpdate> updates,
    const trust::TrustTable& trust, double theta, const std::set<ClientId>& excluded) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  AggregationReport report;
  report.round = model.round;

  std::vector<const sim::ClientUpdate*> chosen;
  std::vector<double> mass;
  for (const auto* u : by_client(updates)) {
    const double t = trust.trust(u->client_id);
    if (!excluded.contains(u->client_id) && t >= theta) {
      chosen.push_back(u);
      mass.push_back(t * static_cast<double>(u->num_samples));
      report.included_ids.push_back(u->client_id);
    } else {
      report.omitted_ids.push_back(u->client_id);
    }
  }

  double total = 0.0;
  for (const double m : mass) total += m;
  sim::GlobalModel next = model;
  if (chosen.empty()) {
    report.stalled = true;
    return {std::move(next), std::move(report)};
  }
  if (total <= 0.0) {
    // Only reachable with theta = 0 and zero trust everywhere: plain FedAvg.
    total = 0.0;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      mass[i] = static_cast<double>(chosen[i]->num_samples);
      total += mass[i];
    }
  }
  std::vector<double> weights(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) {
    weights[i] = mass[i] / total;
    report.weights_used[chosen[i]->client_id] = weights[i];
  }
  apply_weighted(next, chosen, weights);
  return {std::move(next), std::move(report)};
}

sim::GlobalModel no_trust_aggregate(const sim::GlobalModel& model,
                                    std::span<const sim::ClientUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("no_trust_aggregate: no updates");
  const auto chosen = by_client(updates);
  double total = 0.0;
  for (const auto* u : chosen) total += static_cast<double>(u->num_samples);
  std::vector<double> weights;
  weights.reserve(chosen.size());
  for (const auto* u : chosen) weights.push_back(static_cast<double>(u->num_samples) / total);
  sim::GlobalModel next = model;
  apply_weighted(next, chosen, weights);
  return next;
}

}  // namespace atcl::agg
