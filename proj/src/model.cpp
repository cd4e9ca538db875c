#include "atcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atcl::sim {

SoftmaxRegression::SoftmaxRegression(int feature_dim, int num_classes)
    : feature_dim_(feature_dim), num_classes_(num_classes) {
  if (feature_dim < 1 || num_classes < 2) {
    throw std::invalid_argument("softmax regression needs feature_dim >= 1 and num_classes >= 2");
  }
}

std::size_t SoftmaxRegression::parameter_count() const noexcept {
  return static_cast<std::size_t>(num_classes_) * (static_cast<std::size_t>(feature_dim_) + 1);
}

void SoftmaxRegression::predict_proba(std::span<const double> params,
                                      std::span<const double> x,
                                      std::span<double> out) const {
  const auto d = static_cast<std::size_t>(feature_dim_);
  const auto bias = static_cast<std::size_t>(num_classes_) * d;
  double max_logit = -INFINITY;
  for (int c = 0; c < num_classes_; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    double z = params[bias + cc];
    for (std::size_t k = 0; k < d; ++k) z += params[cc * d + k] * x[k];
    out[cc] = z;
    max_logit = std::max(max_logit, z);
  }
  double total = 0.0;
  for (int c = 0; c < num_classes_; ++c) {
    out[c] = std::exp(out[c] - max_logit);
    total += out[c];
  }
  for (int c = 0; c < num_classes_; ++c) out[c] /= total;
}

int SoftmaxRegression::predict(std::span<const double> params,
                               std::span<const double> x) const {
  std::vector<double> p(static_cast<std::size_t>(num_classes_));
  predict_proba(params, x, p);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

// -log(p) with p floored so a saturated wrong prediction stays finite.
double nll(double p) { return -std::log(std::max(p, 1e-300)); }

}  // namespace

double SoftmaxRegression::loss(std::span<const double> params, const Dataset& data,
                               std::span<const int> labels) const {
  if (data.size() == 0) return 0.0;
  std::vector<double> p(static_cast<std::size_t>(num_classes_));
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    predict_proba(params, data.row(i), p);
    total += nll(p[static_cast<std::size_t>(labels[i])]);
  }
  return total / static_cast<double>(data.size());
}

double SoftmaxRegression::loss_and_gradient(std::span<const double> params,
                                            const Dataset& data,
                                            std::span<const int> labels,
                                            std::span<const std::size_t> batch,
                                            std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  const auto d = static_cast<std::size_t>(feature_dim_);
  const auto bias = static_cast<std::size_t>(num_classes_) * d;
  std::vector<double> p(static_cast<std::size_t>(num_classes_));
  double total = 0.0;
  for (const std::size_t i : batch) {
    const auto x = data.row(i);
    predict_proba(params, x, p);
    const auto y = static_cast<std::size_t>(labels[i]);
    total += nll(p[y]);
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double err = p[c] - (c == y ? 1.0 : 0.0);
      for (std::size_t k = 0; k < d; ++k) grad[c * d + k] += err * x[k];
      grad[bias + c] += err;
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= scale;
  return total * scale;
}

Evaluation SoftmaxRegression::evaluate(std::span<const double> params,
                                       const Dataset& data) const {
  Evaluation ev;
  if (data.size() == 0) return ev;
  std::vector<double> p(static_cast<std::size_t>(num_classes_));
  std::size_t correct = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    predict_proba(params, data.row(i), p);
    const auto y = static_cast<std::size_t>(data.labels[i]);
    total += nll(p[y]);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (best == y) ++correct;
  }
  ev.loss = total / static_cast<double>(data.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

Evaluation evaluate_global(const GlobalModel& model, const Dataset& holdout,
                           int num_classes) {
  if (holdout.size() == 0) throw std::invalid_argument("evaluate_global: empty holdout");
  return SoftmaxRegression(holdout.feature_dim, num_classes).evaluate(model.parameters, holdout);
}

}  // namespace atcl::sim
