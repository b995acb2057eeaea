#pragma once

#include <variant>

#include "uqkit/core.hpp"
#include "uqkit/metrics.hpp"

namespace uq {

// Monotone step function fitted by pool-adjacent-violators. Breakpoints are
// the distinct training scores; a new score takes the value of the last
// breakpoint at or below it and is clamped at both ends.
struct IsotonicMap {
  Vector breakpoints;
  Vector values;

  double operator()(double score) const;
  Json to_json() const;
  static IsotonicMap from_json(const Json& j);
};

IsotonicMap isotonic_fit(std::span<const double> scores, std::span<const double> labels);

// p(s) = 1 / (1 + exp(-(a s + b)))
struct PlattMap {
  double a = 1.0;
  double b = 0.0;

  double operator()(double score) const;
  Json to_json() const;
  static PlattMap from_json(const Json& j);
};

// Negative log-likelihood against the smoothed targets
// t+ = (N+ + 1) / (N+ + 2), t- = 1 / (N- + 2); params are (a, b).
PlainObjective platt_objective(std::span<const double> scores, std::span<const double> labels);
PlattMap platt_fit(std::span<const double> scores, std::span<const double> labels);

enum class ScoreKind { Logit, Probability };
std::string_view score_kind_name(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view name);

// Positive-class probability clamped to [1e-12, 1 - 1e-12], optionally as a logit.
Vector probability_scores(const ClassificationPrediction& pred, std::size_t positive_class, ScoreKind kind);

using ProbabilityMap = std::variant<IsotonicMap, PlattMap>;

ClassificationPrediction apply_probability_map(const ProbabilityMap& map, const ClassificationPrediction& pred,
                                               std::size_t positive_class = 1, ScoreKind kind = ScoreKind::Logit);

// Scale applied to both half-widths about the point prediction.
struct IntervalScale {
  double c = 1.0;

  Json to_json() const;
};

struct MissRateTarget {
  double miss_rate;
};
// Target mean interval width (upper - lower) in target units.
struct BandwidthTarget {
  double width;
};
using IntervalTarget = std::variant<MissRateTarget, BandwidthTarget>;

RegressionPrediction apply_interval_scale(const RegressionPrediction& pred, double c);

struct IntervalRecalibration {
  IntervalScale scale;
  RegressionPrediction prediction;
};

IntervalRecalibration interval_recalibrate(const RegressionPrediction& pred, std::span<const double> truths,
                                           const IntervalTarget& target);

}  // namespace uq
