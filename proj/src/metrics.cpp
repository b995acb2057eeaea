#include "uqkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uqkit/error.hpp"

namespace uq {

namespace {

void check_labels(const ClassificationPrediction& pred, std::span<const double> labels) {
  require(pred.size() > 0, ErrorKind::EmptyInput, "metric needs at least one prediction");
  require(labels.size() == pred.size(), ErrorKind::DimensionMismatch,
          "labels and predictions differ in length");
}

void check_truths(const RegressionPrediction& pred, std::span<const double> truths) {
  require(pred.size() > 0, ErrorKind::EmptyInput, "metric needs at least one prediction");
  require(truths.size() == pred.size(), ErrorKind::DimensionMismatch,
          "truths and predictions differ in length");
}

}  // namespace

std::string_view curve_kind_name(CurveKind kind) {
  switch (kind) {
    case CurveKind::Reliability: return "reliability";
    case CurveKind::RiskRejection: return "risk_rejection";
    case CurveKind::UCC: return "ucc";
  }
  return "unknown";
}

Json CurveResult::to_json() const {
  Json xs = Json::array(), ys = Json::array();
  for (const auto& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  return Json{{"kind", curve_kind_name(kind)}, {"x", xs}, {"y", ys}, {"metadata", metadata}};
}

CurveResult CurveResult::from_json(const Json& j) {
  CurveResult c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "reliability") c.kind = CurveKind::Reliability;
  else if (kind == "risk_rejection") c.kind = CurveKind::RiskRejection;
  else if (kind == "ucc") c.kind = CurveKind::UCC;
  else fail(ErrorKind::UnsupportedKind, "unknown curve kind '" + kind + "'");
  const auto& xs = j.at("x");
  const auto& ys = j.at("y");
  require(xs.size() == ys.size(), ErrorKind::CorruptPayload, "curve x/y length mismatch");
  for (std::size_t i = 0; i < xs.size(); ++i) c.points.push_back({xs[i].get<double>(), ys[i].get<double>()});
  c.metadata = j.value("metadata", Json::object());
  return c;
}

std::size_t confidence_bin(double confidence, std::size_t bins) {
  const double b = static_cast<double>(bins);
  if (confidence <= 1.0 / b) return 0;
  auto i = static_cast<std::size_t>(std::max(0.0, std::ceil(confidence * b) - 1.0));
  i = std::min(i, bins - 1);
  while (i > 0 && confidence <= static_cast<double>(i) / b) --i;
  while (i + 1 < bins && confidence > static_cast<double>(i + 1) / b) ++i;
  return i;
}

ReliabilityBins reliability_diagram(const ClassificationPrediction& pred, std::span<const double> labels,
                                    std::size_t bins) {
  check_labels(pred, labels);
  require(bins >= 1, ErrorKind::ConfigError, "reliability diagram needs at least one bin");
  ReliabilityBins out;
  out.total = pred.size();
  out.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) out.bin_edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  out.count.assign(bins, 0);
  out.mean_confidence.assign(bins, 0.0);
  out.accuracy.assign(bins, 0.0);
  out.empty.assign(bins, true);
  Vector conf_sum(bins, 0.0), correct(bins, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t b = confidence_bin(pred.confidence[i], bins);
    ++out.count[b];
    conf_sum[b] += pred.confidence[i];
    if (static_cast<double>(pred.predicted_class[i]) == labels[i]) correct[b] += 1.0;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out.count[b] == 0) continue;
    out.empty[b] = false;
    const double nb = static_cast<double>(out.count[b]);
    out.mean_confidence[b] = conf_sum[b] / nb;
    out.accuracy[b] = correct[b] / nb;
  }
  return out;
}

CurveResult reliability_curve(const ReliabilityBins& bins) {
  CurveResult c{CurveKind::Reliability, {}, Json::object()};
  for (std::size_t b = 0; b < bins.n_bins(); ++b)
    if (!bins.empty[b]) c.points.push_back({bins.mean_confidence[b], bins.accuracy[b]});
  c.metadata = Json{{"bin_edges", bins.bin_edges}, {"count", bins.count}, {"ece", bins.ece()}};
  return c;
}

double ReliabilityBins::ece() const {
  double total_gap = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (empty[b]) continue;
    total_gap += static_cast<double>(count[b]) / static_cast<double>(total) *
                 std::abs(accuracy[b] - mean_confidence[b]);
  }
  return total_gap;
}

double ece(const ClassificationPrediction& pred, std::span<const double> labels, std::size_t bins) {
  return reliability_diagram(pred, labels, bins).ece();
}

double brier(const ClassificationPrediction& pred, std::span<const double> labels, BrierMode mode) {
  check_labels(pred, labels);
  const std::size_t n = pred.size();
  double total = 0.0;
  if (mode == BrierMode::PositiveClass) {
    require(pred.n_classes() == 2, ErrorKind::ModeTaskMismatch,
            "positive-class Brier score needs a binary task");
    for (std::size_t i = 0; i < n; ++i) {
      const double target = labels[i] == 1.0 ? 1.0 : 0.0;
      const double d = pred.probs(i, 1) - target;
      total += d * d;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < pred.n_classes(); ++k) {
        const double target = labels[i] == static_cast<double>(k) ? 1.0 : 0.0;
        const double d = pred.probs(i, k) - target;
        total += d * d;
      }
  }
  return total / static_cast<double>(n);
}

double picp(const RegressionPrediction& pred, std::span<const double> truths) {
  check_truths(pred, truths);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    if (pred.y_lower[i] <= truths[i] && truths[i] <= pred.y_upper[i]) ++covered;
  return static_cast<double>(covered) / static_cast<double>(truths.size());
}

double mpiw(const RegressionPrediction& pred) {
  require(pred.size() > 0, ErrorKind::EmptyInput, "metric needs at least one prediction");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += pred.y_upper[i] - pred.y_lower[i];
  return total / static_cast<double>(pred.size());
}

CurveResult risk_rejection_curve(std::span<const double> uncertainty, std::span<const double> losses,
                                 std::span<const double> grid) {
  require(!uncertainty.empty(), ErrorKind::EmptyInput, "risk-rejection needs at least one point");
  require(uncertainty.size() == losses.size(), ErrorKind::DimensionMismatch,
          "uncertainty and losses differ in length");
  const std::size_t n = uncertainty.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return uncertainty[a] > uncertainty[b]; });

  // suffix[k] = sum of losses of order[k..n)
  Vector suffix(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] + losses[order[k]];

  CurveResult out{CurveKind::RiskRejection, {}, Json::object()};
  Vector rejected_counts;
  Vector sorted_grid(grid.begin(), grid.end());
  std::sort(sorted_grid.begin(), sorted_grid.end());
  for (double r : sorted_grid) {
    require(r >= 0.0 && r < 1.0, ErrorKind::ConfigError, "rejection fractions must lie in [0, 1)");
    auto rejected = static_cast<std::size_t>(std::ceil(r * static_cast<double>(n)));
    rejected = std::min(rejected, n - 1);
    const double risk = suffix[rejected] / static_cast<double>(n - rejected);
    out.points.push_back({r, risk});
    rejected_counts.push_back(static_cast<double>(rejected));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < out.points.size(); ++i)
    area += 0.5 * (out.points[i].y + out.points[i - 1].y) * (out.points[i].x - out.points[i - 1].x);
  out.metadata["rejected_counts"] = rejected_counts;
  out.metadata["auc"] = area;
  out.metadata["n"] = n;
  return out;
}

Vector default_rejection_grid(std::size_t steps) {
  Vector grid;
  for (std::size_t i = 0; i < steps; ++i) grid.push_back(static_cast<double>(i) / static_cast<double>(steps));
  return grid;
}

std::string_view ucc_normalization_name(UccNormalization n) {
  switch (n) {
    case UccNormalization::TargetRange: return "target_range";
    case UccNormalization::MeanAbsTarget: return "mean_abs_target";
    case UccNormalization::None: return "none";
  }
  return "none";
}

UccNormalization parse_ucc_normalization(std::string_view name) {
  if (name == "target_range") return UccNormalization::TargetRange;
  if (name == "mean_abs_target") return UccNormalization::MeanAbsTarget;
  if (name == "none") return UccNormalization::None;
  fail(ErrorKind::ConfigError, "unknown UCC normalization '" + std::string(name) + "'");
}

Vector ucc_critical_scales(const RegressionPrediction& pred, std::span<const double> truths) {
  check_truths(pred, truths);
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vector scales(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double e = truths[i] - pred.y_hat[i];
    if (e == 0.0) {
      scales[i] = 0.0;
    } else {
      const double h = pred.y_hat[i], y = truths[i];
      const double d = e > 0.0 ? pred.y_upper[i] - h : h - pred.y_lower[i];
      if (!(d > 0.0)) {
        scales[i] = inf;
        continue;
      }
      // Snap e/d to the smallest double whose rescaled bound, computed the way
      // apply_interval_scale does it, still reaches the truth.
      auto covers = [&](double c) { return e > 0.0 ? h + c * d >= y : h - c * d <= y; };
      double c = std::abs(e) / d;
      for (int k = 0; k < 8 && !covers(c); ++k) c = std::nextafter(c, inf);
      for (int k = 0; k < 8 && covers(std::nextafter(c, 0.0)); ++k) c = std::nextafter(c, 0.0);
      scales[i] = c;
    }
  }
  return scales;
}

double miss_rate_at_scale(std::span<const double> critical_scales, double c) {
  std::size_t missed = 0;
  for (double s : critical_scales)
    if (s > c) ++missed;
  return static_cast<double>(missed) / static_cast<double>(critical_scales.size());
}

CurveResult ucc(const RegressionPrediction& pred, std::span<const double> truths,
                UccNormalization normalization) {
  Vector scales = ucc_critical_scales(pred, truths);
  const std::size_t n = truths.size();
  double width_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) width_sum += pred.y_upper[i] - pred.y_lower[i];
  require(width_sum > 0.0, ErrorKind::AllZeroWidth, "UCC needs at least one interval with positive width");
  const double mean_half_width = width_sum / static_cast<double>(n) / 2.0;

  double norm = 1.0;
  if (normalization == UccNormalization::TargetRange) {
    const auto [lo, hi] = std::minmax_element(truths.begin(), truths.end());
    norm = *hi - *lo;
  } else if (normalization == UccNormalization::MeanAbsTarget) {
    norm = 0.0;
    for (double y : truths) norm += std::abs(y);
    norm /= static_cast<double>(n);
  }
  if (!(norm > 0.0)) norm = 1.0;

  Vector grid{0.0};
  for (double s : scales)
    if (std::isfinite(s) && s > 0.0) grid.push_back(s);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  Vector sorted_scales = scales;
  std::sort(sorted_scales.begin(), sorted_scales.end());
  CurveResult out{CurveKind::UCC, {}, Json::object()};
  for (double c : grid) {
    // number of points with critical scale <= c
    const auto covered = static_cast<std::size_t>(
        std::upper_bound(sorted_scales.begin(), sorted_scales.end(), c) - sorted_scales.begin());
    const double miss = static_cast<double>(n - covered) / static_cast<double>(n);
    out.points.push_back({c * mean_half_width / norm, miss});
  }
  double area = 0.0;
  for (std::size_t i = 1; i < out.points.size(); ++i)
    area += 0.5 * (out.points[i].y + out.points[i - 1].y) * (out.points[i].x - out.points[i - 1].x);
  std::size_t unreachable = 0;
  for (double s : scales)
    if (!std::isfinite(s)) ++unreachable;
  out.metadata["auc"] = area;
  out.metadata["normalization"] = ucc_normalization_name(normalization);
  out.metadata["normalization_constant"] = norm;
  out.metadata["scales"] = grid;
  out.metadata["mean_half_width"] = mean_half_width;
  out.metadata["unreachable_points"] = unreachable;
  return out;
}

Vector zero_one_losses(const ClassificationPrediction& pred, std::span<const double> labels) {
  check_labels(pred, labels);
  Vector losses(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    losses[i] = static_cast<double>(pred.predicted_class[i]) == labels[i] ? 0.0 : 1.0;
  return losses;
}

Vector absolute_residuals(const RegressionPrediction& pred, std::span<const double> truths) {
  check_truths(pred, truths);
  Vector losses(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) losses[i] = std::abs(truths[i] - pred.y_hat[i]);
  return losses;
}

std::map<std::string, double> compute_metrics(const Prediction& pred, const Dataset& truth,
                                              const std::vector<std::string>& names) {
  std::map<std::string, double> out;
  const TaskKind kind = std::holds_alternative<RegressionPrediction>(pred) ? TaskKind::Regression
                                                                           : TaskKind::Classification;
  for (const auto& name : names) {
    const MetricInfo* info = find_metric(name);
    require(info != nullptr, ErrorKind::ConfigError, "unknown metric '" + name + "'");
    require(info->task == kind, ErrorKind::TaskMismatch,
            "metric '" + name + "' does not apply to a " + std::string(task_name(kind)) + " model");
    out[name] = info->compute(pred, truth);
  }
  return out;
}

}  // namespace uq
