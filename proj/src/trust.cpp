#include "atcl/trust.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atcl/errors.hpp"

namespace atcl::trust {

DecisionMatrix::DecisionMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

DecisionMatrix DecisionMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  DecisionMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw TrustError("decision matrix rows differ in length");
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(rows[i][j])) throw TrustError("decision matrix entry is not finite");
      m.at(i, j) = rows[i][j];
    }
  }
  return m;
}

namespace {

std::vector<signals::SignalVector> sorted_by_client(std::span<const signals::SignalVector> signals) {
  std::vector<signals::SignalVector> out(signals.begin(), signals.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  return out;
}

bool column_is_constant(const DecisionMatrix& m, std::size_t j) {
  for (std::size_t i = 1; i < m.rows(); ++i) {
    if (m.at(i, j) != m.at(0, j)) return false;
  }
  return true;
}

}  // namespace

DecisionMatrix build_matrix(std::span<const signals::SignalVector> signals) {
  if (signals.empty()) throw TrustError("build_matrix: no participants");
  const auto sorted = sorted_by_client(signals);
  DecisionMatrix m(sorted.size(), kNumCriteria);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& s = sorted[i];
    m.at(i, static_cast<std::size_t>(Criterion::kSimilarity)) = (s.similarity_s + 1.0) / 2.0;
    m.at(i, static_cast<std::size_t>(Criterion::kParticipation)) = s.participation_p;
    m.at(i, static_cast<std::size_t>(Criterion::kInverseVolatility)) = 1.0 / (1.0 + s.volatility_v);
    m.client_ids.push_back(s.client_id);
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (const double x : m.row(i)) {
      if (!std::isfinite(x)) throw TrustError("build_matrix: non-finite signal");
    }
  }
  return m;
}

std::vector<double> entropy_weights(const DecisionMatrix& matrix) {
  const std::size_t m = matrix.rows();
  const std::size_t n = matrix.cols();
  if (m < 2) throw TrustError("entropy_weights: need at least two alternatives");
  if (n == 0) return {};

  const double inv_log_m = 1.0 / std::log(static_cast<double>(m));
  std::vector<double> divergence(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = matrix.at(i, j);
      if (x < 0.0) throw TrustError("entropy_weights: negative entry");
      sum += x;
    }
    // A constant column (including all-zero) is maximally uninformative.
    if (column_is_constant(matrix, j) || sum <= 0.0) continue;
    double entropy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double q = matrix.at(i, j) / sum;
      if (q > 0.0) entropy -= q * std::log(q);
    }
    divergence[j] = std::max(0.0, 1.0 - entropy * inv_log_m);
  }

  const double total = std::accumulate(divergence.begin(), divergence.end(), 0.0);
  if (total <= 0.0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  for (double& d : divergence) d /= total;
  return divergence;
}

std::vector<double> topsis_closeness(const DecisionMatrix& matrix, std::span<const double> weights) {
  const std::size_t m = matrix.rows();
  const std::size_t n = matrix.cols();
  if (weights.size() != n) throw TrustError("topsis_closeness: one weight per criterion required");
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-9) throw TrustError("topsis_closeness: weights must sum to 1");

  std::vector<double> weighted(m * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) norm += matrix.at(i, j) * matrix.at(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) weighted[i * n + j] = weights[j] * matrix.at(i, j) / norm;
  }

  std::vector<double> ideal(n, -INFINITY);
  std::vector<double> anti(n, INFINITY);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      ideal[j] = std::max(ideal[j], weighted[i * n + j]);
      anti[j] = std::min(anti[j], weighted[i * n + j]);
    }
  }

  std::vector<double> closeness(m);
  for (std::size_t i = 0; i < m; ++i) {
    double d_plus = 0.0;
    double d_minus = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = weighted[i * n + j];
      d_plus += (v - ideal[j]) * (v - ideal[j]);
      d_minus += (v - anti[j]) * (v - anti[j]);
    }
    d_plus = std::sqrt(d_plus);
    d_minus = std::sqrt(d_minus);
    const double span = d_plus + d_minus;
    closeness[i] = span < 1e-12 ? 0.5 : d_minus / span;
  }
  return closeness;
}

double update_trust(double prev_T, double raw, double alpha) {
  return std::clamp(alpha * raw + (1.0 - alpha) * prev_T, 0.0, 1.0);
}

bool TrustRecord::set_excluded(bool value, int round) {
  if (value == excluded) return false;
  excluded = value;
  exclusion_round = value ? std::optional<int>(round) : std::nullopt;
  ++flip_count;
  return true;
}

TrustRecord& TrustTable::record(ClientId id) {
  auto [it, inserted] = records_.try_emplace(id);
  if (inserted) {
    it->second.client_id = id;
    it->second.raw_trust = t_init_;
    it->second.smoothed_trust_T = t_init_;
  }
  return it->second;
}

const TrustRecord* TrustTable::find(ClientId id) const {
  const auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

double TrustTable::trust(ClientId id) const {
  const auto* rec = find(id);
  return rec ? rec->smoothed_trust_T : t_init_;
}

bool TrustTable::is_excluded(ClientId id) const {
  const auto* rec = find(id);
  return rec && rec->excluded;
}

std::vector<double> raw_trust(std::span<const signals::SignalVector> signals) {
  if (signals.empty()) return {};
  if (signals.size() == 1) return {kSoloRawTrust};
  const DecisionMatrix matrix = build_matrix(signals);
  return topsis_closeness(matrix, entropy_weights(matrix));
}

void score_round(std::span<const signals::SignalVector> signals, TrustTable& table, double alpha) {
  if (signals.empty()) return;
  const auto sorted = sorted_by_client(signals);
  const auto raw = raw_trust(sorted);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    TrustRecord& rec = table.record(sorted[i].client_id);
    rec.raw_trust = raw[i];
    rec.smoothed_trust_T = update_trust(rec.smoothed_trust_T, raw[i], alpha);
    rec.last_round_seen = sorted[i].round;
  }
}

}  // namespace atcl::trust
