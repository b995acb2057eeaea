#pragma once

#include <functional>
#include <vector>

#include "uqkit/core.hpp"

namespace uq {

struct TreeParams {
  std::size_t max_depth = 3;
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
};

// Binary regression tree with axis-aligned splits `x[feature] <= threshold`.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  using LeafValue = std::function<double(std::span<const std::size_t> rows)>;

  // Grows the structure by squared-error reduction on `targets`, then asks
  // `leaf_value` for the value of every leaf. Split ties go to the lowest
  // feature index, then the lowest threshold.
  static RegressionTree fit(const Matrix& x, std::span<const double> targets, std::span<const std::size_t> rows,
                            const TreeParams& params, const LeafValue& leaf_value);

  double predict(std::span<const double> row) const;
  std::size_t node_count() const { return nodes_.size(); }

  Json to_json() const;
  static RegressionTree from_json(const Json& j);

 private:
  int grow(const Matrix& x, std::span<const double> targets, std::vector<std::size_t> rows, std::size_t depth,
           const TreeParams& params, const LeafValue& leaf_value);
  std::vector<Node> nodes_;
};

enum class BoostLoss { Squared, Quantile, Logistic };

struct BoostParams {
  std::size_t n_estimators = 100;
  double learning_rate = 0.1;
  TreeParams tree;
};

double pinball_loss(double y, double q, double tau);
// Derivative of the pinball loss in q (subgradient tau - 1 at the kink).
double pinball_gradient(double y, double q, double tau);

// Additive tree ensemble: raw(x) = init + learning_rate * sum_t tree_t(x).
class BoostedEnsemble {
 public:
  // `tau` is used only by the quantile loss; logistic targets must be 0/1.
  static BoostedEnsemble fit(const Matrix& x, std::span<const double> y, BoostLoss loss, const BoostParams& params,
                             double tau = 0.5);

  double raw_predict(std::span<const double> row) const;
  // Probability for the logistic loss, raw value otherwise.
  double predict(std::span<const double> row) const;
  Vector predict(const Matrix& x) const;
  BoostLoss loss() const { return loss_; }

  Json to_json() const;
  static BoostedEnsemble from_json(const Json& j);

 private:
  BoostLoss loss_ = BoostLoss::Squared;
  double init_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<RegressionTree> trees_;
};

}  // namespace uq
