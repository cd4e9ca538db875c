#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "atcl/signals.hpp"

namespace atcl::trust {

using sim::ClientId;

/// Column order of the per-round decision matrix. Every criterion is a
/// benefit criterion scaled into [0, 1].
enum class Criterion : std::size_t {
  kSimilarity = 0,         ///< (s + 1) / 2
  kParticipation = 1,      ///< p
  kInverseVolatility = 2,  ///< 1 / (1 + v)
};
inline constexpr std::size_t kNumCriteria = 3;

/// Dense row-major m x n matrix of alternatives (clients) by criteria.
class DecisionMatrix {
 public:
  DecisionMatrix() = default;
  DecisionMatrix(std::size_t rows, std::size_t cols);
  /// Throws TrustError on ragged or non-finite input.
  static DecisionMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& at(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }

  /// Client owning each row, ascending; empty for matrices not built from signals.
  std::vector<ClientId> client_ids;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// One row per participant, rows ordered by ascending client_id.
/// Throws TrustError when `signals` is empty.
DecisionMatrix build_matrix(std::span<const signals::SignalVector> signals);

/// Entropy method weights: criteria whose values vary more across clients get
/// more weight. Falls back to uniform weights when no column varies.
/// Throws TrustError for fewer than two rows or negative entries.
std::vector<double> entropy_weights(const DecisionMatrix& matrix);

/// TOPSIS relative closeness to the ideal solution, each in [0, 1].
/// Throws TrustError if the weights do not match the matrix or do not sum to 1.
std::vector<double> topsis_closeness(const DecisionMatrix& matrix, std::span<const double> weights);

/// EMA step T <- alpha * raw + (1 - alpha) * prev.
double update_trust(double prev_T, double raw, double alpha);

struct TrustRecord {
  ClientId client_id = 0;
  double raw_trust = 0.5;
  double smoothed_trust_T = 0.5;
  int last_round_seen = -1;
  bool excluded = false;
  std::optional<int> exclusion_round;
  /// Lifetime number of exclusion-state changes.
  int flip_count = 0;

  /// Returns true if the exclusion state toggled.
  bool set_excluded(bool value, int round);
};

/// Per-client trust state, ordered by client id.
class TrustTable {
 public:
  explicit TrustTable(double t_init = 0.5) : t_init_(t_init) {}

  TrustRecord& record(ClientId id);
  const TrustRecord* find(ClientId id) const;
  /// Smoothed trust, or the initial value for a client never scored.
  double trust(ClientId id) const;
  bool is_excluded(ClientId id) const;
  double t_init() const noexcept { return t_init_; }

  const std::map<ClientId, TrustRecord>& records() const noexcept { return records_; }

 private:
  double t_init_;
  std::map<ClientId, TrustRecord> records_;
};

/// Raw trust given to the only participant of a round (TOPSIS needs two).
inline constexpr double kSoloRawTrust = 0.5;

/// Raw trust of every participant for one round: build the matrix, weight it,
/// rank it. Returned in ascending client_id order.
std::vector<double> raw_trust(std::span<const signals::SignalVector> signals);

/// Scores one round and EMA-updates every participant's trust with `alpha`.
/// Non-participants keep their trust; unseen clients start at the table's T_init.
void score_round(std::span<const signals::SignalVector> signals, TrustTable& table, double alpha);

}  // namespace atcl::trust
