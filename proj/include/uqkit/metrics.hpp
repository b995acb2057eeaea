#pragma once

#include <map>
#include <string>
#include <vector>

#include "uqkit/core.hpp"

namespace uq {

// Equal-width confidence bins over [0, 1]: the first bin is [0, 1/B], every
// later bin is (i/B, (i+1)/B].
struct ReliabilityBins {
  Vector bin_edges;  // B + 1 values
  std::vector<std::size_t> count;
  Vector mean_confidence;  // 0 for empty bins
  Vector accuracy;         // 0 for empty bins
  std::vector<bool> empty;
  std::size_t total = 0;

  std::size_t n_bins() const { return count.size(); }
  // Sum over non-empty bins of (n_b / n) |acc_b - conf_b|.
  double ece() const;
};

enum class CurveKind { Reliability, RiskRejection, UCC };
std::string_view curve_kind_name(CurveKind kind);

struct CurvePoint {
  double x;
  double y;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct CurveResult {
  CurveKind kind;
  std::vector<CurvePoint> points;
  Json metadata = Json::object();

  Json to_json() const;
  static CurveResult from_json(const Json& j);
};

enum class BrierMode { PositiveClass, MulticlassSum };

// Bin index under the ECE convention above.
std::size_t confidence_bin(double confidence, std::size_t bins);

double ece(const ClassificationPrediction& pred, std::span<const double> labels, std::size_t bins = 10);
ReliabilityBins reliability_diagram(const ClassificationPrediction& pred, std::span<const double> labels,
                                    std::size_t bins = 10);
// Points (mean confidence, accuracy) of the non-empty bins; metadata holds
// bin_edges, count and ece.
CurveResult reliability_curve(const ReliabilityBins& bins);

// PositiveClass treats class 1 as positive.
double brier(const ClassificationPrediction& pred, std::span<const double> labels, BrierMode mode);
double picp(const RegressionPrediction& pred, std::span<const double> truths);
double mpiw(const RegressionPrediction& pred);

// Rejects the ceil(r * n) most uncertain points (ties: lower original index is
// considered more uncertain, so it is rejected first) and reports the mean
// loss of the rest. Grid values must lie in [0, 1).
CurveResult risk_rejection_curve(std::span<const double> uncertainty, std::span<const double> losses,
                                 std::span<const double> grid);
Vector default_rejection_grid(std::size_t steps = 20);

enum class UccNormalization { TargetRange, MeanAbsTarget, None };
std::string_view ucc_normalization_name(UccNormalization n);
UccNormalization parse_ucc_normalization(std::string_view name);

// Smallest scale c with truth inside [y_hat - c d-, y_hat + c d+]; infinity
// when no finite scale covers the point.
Vector ucc_critical_scales(const RegressionPrediction& pred, std::span<const double> truths);
double miss_rate_at_scale(std::span<const double> critical_scales, double c);

// Miss rate (y) against normalized bandwidth (x) while every interval is
// scaled by a common factor c swept over {0} and the finite critical scales.
// Metadata: auc, normalization, normalization_constant, scales, mean_half_width.
CurveResult ucc(const RegressionPrediction& pred, std::span<const double> truths,
                UccNormalization normalization = UccNormalization::TargetRange);

// Losses used for risk-rejection when none are supplied by the caller.
Vector zero_one_losses(const ClassificationPrediction& pred, std::span<const double> labels);
Vector absolute_residuals(const RegressionPrediction& pred, std::span<const double> truths);

// Standard summary of metric values for a prediction, keyed by metric name.
std::map<std::string, double> compute_metrics(const Prediction& pred, const Dataset& truth,
                                              const std::vector<std::string>& names);

}  // namespace uq
