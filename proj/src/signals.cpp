#include "atcl/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atcl/errors.hpp"

namespace atcl::signals {

namespace {

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

std::span<const double> tail(std::span<const double> xs, int window) {
  const auto w = static_cast<std::size_t>(std::max(window, 0));
  return xs.size() > w ? xs.subspan(xs.size() - w) : xs;
}

}  // namespace

std::vector<double> reference_update(std::span<const sim::ClientUpdate> updates) {
  if (updates.empty()) throw SignalError("reference_update: no updates");
  const std::size_t dim = updates.front().delta.size();
  for (const auto& u : updates) {
    if (u.delta.size() != dim) throw SignalError("reference_update: dimension mismatch");
  }
  std::vector<double> ref(dim);
  std::vector<double> column(updates.size());
  const std::size_t mid = column.size() / 2;
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < updates.size(); ++i) column[i] = updates[i].delta[k];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
    double median = column[mid];
    if (column.size() % 2 == 0) {
      const double lower =
          *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid));
      median = 0.5 * (lower + median);
    }
    ref[k] = median;
  }
  return ref;
}

double compute_similarity(std::span<const double> update, std::span<const double> reference) {
  if (update.size() != reference.size()) throw SignalError("compute_similarity: dimension mismatch");
  double dot = 0.0;
  double nu = 0.0;
  double nr = 0.0;
  for (std::size_t k = 0; k < update.size(); ++k) {
    dot += update[k] * reference[k];
    nu += update[k] * update[k];
    nr += reference[k] * reference[k];
  }
  nu = std::sqrt(nu);
  nr = std::sqrt(nr);
  if (nu < kZeroNorm || nr < kZeroNorm) return 0.0;
  return std::clamp(dot / (nu * nr), -1.0, 1.0);
}

double compute_volatility(std::span<const double> similarity_history, int window) {
  const auto recent = tail(similarity_history, window);
  if (recent.size() < 2) return 0.0;
  return population_std(recent);
}

double update_participation(double prev_p, bool participated, double beta_p) {
  const double p = beta_p * (participated ? 1.0 : 0.0) + (1.0 - beta_p) * prev_p;
  return std::clamp(p, 0.0, 1.0);
}

double compute_loss_trend(std::span<const double> loss_history, int window) {
  const auto recent = tail(loss_history, window);
  if (recent.size() < 2) return 0.0;
  const double n = static_cast<double>(recent.size());
  const double x_mean = (n - 1.0) / 2.0;
  const double y_mean = std::accumulate(recent.begin(), recent.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < recent.size(); ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (recent[i] - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double compute_trust_dispersion(std::span<const double> trust_scores) {
  if (trust_scores.empty()) throw SignalError("compute_trust_dispersion: no scores");
  return population_std(trust_scores);
}

}  // namespace atcl::signals
