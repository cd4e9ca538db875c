#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "atcl/federation.hpp"
#include "atcl/trust.hpp"

namespace atcl::agg {

using sim::ClientId;

struct AggregationReport {
  int round = 0;
  std::vector<ClientId> included_ids;
  std::vector<ClientId> omitted_ids;
  std::map<ClientId, double> weights_used;
  /// No client qualified; the model was left unchanged.
  bool stalled = false;
  std::int64_t messages = 0;
  std::int64_t payload_bytes = 0;
};

/// Trust-aware step: a participant is included iff it is not excluded and its
/// smoothed trust is at least `theta`. Included deltas are combined with
/// weights proportional to trust x num_samples, summed in ascending client_id
/// order. Throws std::invalid_argument when `updates` is empty.
std::pair<sim::GlobalModel, AggregationReport> aggregate(
    const sim::GlobalModel& model, std::span<const sim::ClientUpdate> updates,
    const trust::TrustTable& trust, double theta, const std::set<ClientId>& excluded);

/// FedAvg: sample-count-weighted mean of all deltas, trust ignored.
sim::GlobalModel no_trust_aggregate(const sim::GlobalModel& model,
                                    std::span<const sim::ClientUpdate> updates);

}  // namespace atcl::agg
