#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace atcl::sim {

/// Labelled samples stored row-major: features[i * feature_dim + k].
struct Dataset {
  int feature_dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
  bool operator==(const Dataset&) const = default;
};

struct GlobalModel {
  std::vector<double> parameters;
  int round = 0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Multinomial logistic regression. Parameters are laid out as a row-major
/// num_classes x feature_dim weight matrix followed by num_classes biases.
class SoftmaxRegression {
 public:
  SoftmaxRegression(int feature_dim, int num_classes);

  int feature_dim() const noexcept { return feature_dim_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t parameter_count() const noexcept;

  /// Class probabilities for one sample.
  void predict_proba(std::span<const double> params, std::span<const double> x,
                     std::span<double> out) const;

  int predict(std::span<const double> params, std::span<const double> x) const;

  /// Mean negative log-likelihood over the whole dataset, scored against
  /// `labels` (which may differ from data.labels, e.g. after label flipping).
  double loss(std::span<const double> params, const Dataset& data,
              std::span<const int> labels) const;

  /// Mean loss and its gradient over a batch; returns the loss.
  double loss_and_gradient(std::span<const double> params, const Dataset& data,
                           std::span<const int> labels,
                           std::span<const std::size_t> batch,
                           std::span<double> grad) const;

  Evaluation evaluate(std::span<const double> params, const Dataset& data) const;

 private:
  int feature_dim_;
  int num_classes_;
};

/// Mean log-loss and top-1 accuracy of `model` on a held-out set.
Evaluation evaluate_global(const GlobalModel& model, const Dataset& holdout,
                           int num_classes);

}  // namespace atcl::sim
