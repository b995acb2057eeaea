#include "uqkit/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqkit/error.hpp"

namespace uq {

RegressionTree RegressionTree::fit(const Matrix& x, std::span<const double> targets, std::span<const std::size_t> rows,
                                   const TreeParams& params, const LeafValue& leaf_value) {
  RegressionTree tree;
  tree.grow(x, targets, std::vector<std::size_t>(rows.begin(), rows.end()), 0, params, leaf_value);
  return tree;
}

int RegressionTree::grow(const Matrix& x, std::span<const double> targets, std::vector<std::size_t> rows,
                         std::size_t depth, const TreeParams& params, const LeafValue& leaf_value) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  const std::size_t n = rows.size();

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_gain = 0.0;
  if (depth < params.max_depth && n >= params.min_samples_split && n >= 2 * params.min_samples_leaf) {
    double total = 0.0;
    for (std::size_t r : rows) total += targets[r];
    const double base = total * total / static_cast<double>(n);
    std::vector<std::size_t> sorted = rows;
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left_sum += targets[sorted[k]];
        const double lo = x(sorted[k], f);
        const double hi = x(sorted[k + 1], f);
        if (!(lo < hi)) continue;
        const std::size_t nl = k + 1, nr = n - nl;
        if (nl < params.min_samples_leaf || nr < params.min_samples_leaf) continue;
        const double right_sum = total - left_sum;
        // SSE reduction = sum_l^2/n_l + sum_r^2/n_r - total^2/n
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - base;
        if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = lo + 0.5 * (hi - lo);
        }
      }
    }
  }

  if (best_feature < 0) {
    nodes_[index].value = leaf_value(rows);
    return index;
  }
  std::vector<std::size_t> left, right;
  for (std::size_t r : rows)
    (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
  nodes_[index].feature = best_feature;
  nodes_[index].threshold = best_threshold;
  const int l = grow(x, targets, std::move(left), depth + 1, params, leaf_value);
  const int r = grow(x, targets, std::move(right), depth + 1, params, leaf_value);
  nodes_[index].left = l;
  nodes_[index].right = r;
  return index;
}

double RegressionTree::predict(std::span<const double> row) const {
  int i = 0;
  while (nodes_[i].feature >= 0)
    i = row[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].value;
}

Json RegressionTree::to_json() const {
  Json feature = Json::array(), threshold = Json::array(), left = Json::array(), right = Json::array(),
       value = Json::array();
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return Json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

RegressionTree RegressionTree::from_json(const Json& j) {
  RegressionTree t;
  const auto& f = j.at("feature");
  const std::size_t n = f.size();
  require(n > 0 && j.at("threshold").size() == n && j.at("left").size() == n && j.at("right").size() == n &&
              j.at("value").size() == n,
          ErrorKind::CorruptPayload, "tree arrays differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    Node node{f[i].get<int>(), j["threshold"][i].get<double>(), j["left"][i].get<int>(), j["right"][i].get<int>(),
              j["value"][i].get<double>()};
    if (node.feature >= 0)
      require(node.left > static_cast<int>(i) && node.right > static_cast<int>(i) &&
                  node.left < static_cast<int>(n) && node.right < static_cast<int>(n),
              ErrorKind::CorruptPayload, "tree child index out of range");
    t.nodes_.push_back(node);
  }
  return t;
}

double pinball_loss(double y, double q, double tau) {
  return y >= q ? tau * (y - q) : (1.0 - tau) * (q - y);
}

double pinball_gradient(double y, double q, double tau) { return y > q ? -tau : 1.0 - tau; }

namespace {

std::string loss_name(BoostLoss loss) {
  switch (loss) {
    case BoostLoss::Squared: return "squared";
    case BoostLoss::Quantile: return "quantile";
    case BoostLoss::Logistic: return "logistic";
  }
  return "squared";
}

BoostLoss parse_loss(const std::string& s) {
  if (s == "squared") return BoostLoss::Squared;
  if (s == "quantile") return BoostLoss::Quantile;
  if (s == "logistic") return BoostLoss::Logistic;
  fail(ErrorKind::CorruptPayload, "unknown boosting loss '" + s + "'");
}

}  // namespace

BoostedEnsemble BoostedEnsemble::fit(const Matrix& x, std::span<const double> y, BoostLoss loss,
                                     const BoostParams& params, double tau) {
  const std::size_t n = x.rows();
  require(n >= 1 && y.size() == n, ErrorKind::DegenerateData, "boosting needs matching non-empty data");
  BoostedEnsemble model;
  model.loss_ = loss;
  model.learning_rate_ = params.learning_rate;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  switch (loss) {
    case BoostLoss::Squared: model.init_ = mean(y); break;
    case BoostLoss::Quantile: model.init_ = empirical_quantile(y, tau); break;
    case BoostLoss::Logistic: {
      const double rate = std::clamp(mean(y), 1e-6, 1.0 - 1e-6);
      model.init_ = std::log(rate / (1.0 - rate));
      break;
    }
  }

  Vector raw(n, model.init_);
  Vector pseudo(n), residual(n);
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      switch (loss) {
        case BoostLoss::Squared: pseudo[i] = y[i] - raw[i]; break;
        case BoostLoss::Quantile:
          pseudo[i] = -pinball_gradient(y[i], raw[i], tau);
          residual[i] = y[i] - raw[i];
          break;
        case BoostLoss::Logistic: pseudo[i] = y[i] - sigmoid(raw[i]); break;
      }
    }
    RegressionTree::LeafValue leaf;
    switch (loss) {
      case BoostLoss::Squared:
        leaf = [&](std::span<const std::size_t> rows) {
          double s = 0.0;
          for (std::size_t r : rows) s += pseudo[r];
          return s / static_cast<double>(rows.size());
        };
        break;
      case BoostLoss::Quantile:
        leaf = [&](std::span<const std::size_t> rows) {
          Vector vals;
          vals.reserve(rows.size());
          for (std::size_t r : rows) vals.push_back(residual[r]);
          return empirical_quantile(vals, tau);
        };
        break;
      case BoostLoss::Logistic:
        leaf = [&](std::span<const std::size_t> rows) {
          double num = 0.0, den = 0.0;
          for (std::size_t r : rows) {
            const double p = sigmoid(raw[r]);
            num += pseudo[r];
            den += p * (1.0 - p);
          }
          return den < 1e-12 ? 0.0 : std::clamp(num / den, -10.0, 10.0);
        };
        break;
    }
    RegressionTree tree = RegressionTree::fit(x, pseudo, all, params.tree, leaf);
    for (std::size_t i = 0; i < n; ++i) raw[i] += params.learning_rate * tree.predict(x.row(i));
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

double BoostedEnsemble::raw_predict(std::span<const double> row) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(row);
  return init_ + learning_rate_ * s;
}

double BoostedEnsemble::predict(std::span<const double> row) const {
  const double raw = raw_predict(row);
  return loss_ == BoostLoss::Logistic ? sigmoid(raw) : raw;
}

Vector BoostedEnsemble::predict(const Matrix& x) const {
  Vector out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
  return out;
}

Json BoostedEnsemble::to_json() const {
  Json trees = Json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return Json{{"loss", loss_name(loss_)}, {"init", init_}, {"learning_rate", learning_rate_}, {"trees", trees}};
}

BoostedEnsemble BoostedEnsemble::from_json(const Json& j) {
  BoostedEnsemble m;
  m.loss_ = parse_loss(j.at("loss").get<std::string>());
  m.init_ = j.at("init").get<double>();
  m.learning_rate_ = j.at("learning_rate").get<double>();
  for (const auto& t : j.at("trees")) m.trees_.push_back(RegressionTree::from_json(t));
  return m;
}

}  // namespace uq
