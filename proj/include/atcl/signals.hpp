#pragma once

#include <span>
#include <vector>

#include "atcl/federation.hpp"

namespace atcl::signals {

using sim::ClientId;

struct SignalVector {
  ClientId client_id = 0;
  int round = 0;
  double similarity_s = 0.0;   ///< cosine to the round reference, in [-1, 1]
  double volatility_v = 0.0;   ///< windowed std of the client's similarities
  double participation_p = 0.0;  ///< participation EMA, in [0, 1]
};

struct SystemIndicators {
  int round = 0;
  double loss_trend_L = 0.0;  ///< OLS slope of recent global loss, per round
  double trust_dispersion_sigma = 0.0;
};

struct SignalParams {
  int window_v = 5;
  int window_l = 5;
  double beta_p = 0.1;
  /// Participation consistency assigned to a client before its first round.
  double p_init = 1.0;
};

/// Norm below which a vector counts as zero for cosine similarity.
inline constexpr double kZeroNorm = 1e-12;

/// Coordinate-wise median of all deltas. Throws SignalError when empty or when
/// dimensions disagree.
std::vector<double> reference_update(std::span<const sim::ClientUpdate> updates);

/// Cosine similarity; 0 when either vector has norm below kZeroNorm.
double compute_similarity(std::span<const double> update, std::span<const double> reference);

/// Population std of the last `window` entries (fewer if the history is shorter).
double compute_volatility(std::span<const double> similarity_history, int window);

/// p <- beta * 1{participated} + (1 - beta) * prev.
double update_participation(double prev_p, bool participated, double beta_p);

/// Slope of the least-squares line through the last `window` (round, loss) pairs.
double compute_loss_trend(std::span<const double> loss_history, int window);

/// Population std of trust scores. Throws SignalError when empty.
double compute_trust_dispersion(std::span<const double> trust_scores);

}  // namespace atcl::signals
