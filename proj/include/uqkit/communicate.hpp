#pragma once

#include <string>
#include <variant>

#include "uqkit/core.hpp"
#include "uqkit/metrics.hpp"

namespace uq {

enum class SummaryStyle { Concise, Detailed };

// Three significant digits, plain notation for magnitudes in [1e-4, 1e6).
std::string format_sig3(double value);

std::string summarize_prediction(const RegressionPrediction& pred, std::size_t row, SummaryStyle style,
                                 double mass, std::string_view algorithm_id = {});
std::string summarize_prediction(const ClassificationPrediction& pred, std::size_t row, SummaryStyle style,
                                 std::string_view algorithm_id = {});

struct GaussianParams {
  double mu;
  double sigma;
};
struct Samples {
  Vector values;
};
using Distribution = std::variant<GaussianParams, Samples>;

struct DotPlotLayout {
  Vector bin_centers;
  std::vector<std::size_t> stack_heights;
  double bin_width = 0.0;
  double dot_radius = 0.0;
  std::size_t total_dots = 0;
  Vector quantiles;
  // Zero spread: every dot sits in a single stack.
  bool degenerate = false;
};

// K quantiles at p_j = (j - 0.5) / K placed in `bins` equal-width bins over
// [q_1, q_K]; a value on an interior edge belongs to the bin on its right.
DotPlotLayout quantile_dot_plot(const Distribution& dist, std::size_t k = 20, std::size_t bins = 10);

// Gaussian: pdf over mu +/- 4 sigma. Samples: Gaussian KDE with bandwidth
// 1.06 std n^(-1/5) over [min - h, max + h].
std::vector<CurvePoint> density_curve(const Distribution& dist, std::size_t points = 200);

enum class PlotKind { Interval, Density, QuantileDotPlot, ReliabilityDiagram, RiskRejection, UCC };
std::string_view plot_kind_name(PlotKind kind);
PlotKind parse_plot_kind(std::string_view name);

// Series layout by kind:
//   Interval          x, y_hat, lower, upper, optional truth
//   Density           x, y
//   QuantileDotPlot   bin_centers, stack_heights, bin_width
//   ReliabilityDiagram bin_edges, accuracy, mean_confidence, count
//   RiskRejection/UCC x, y
struct PlotSpec {
  PlotKind kind = PlotKind::Density;
  std::string title;
  std::string x_label;
  std::string y_label;
  double width = 640;
  double height = 400;
  Json series = Json::object();

  void validate() const;
  Json to_json() const;
  static PlotSpec from_json(const Json& j);
};

PlotSpec interval_plot(const RegressionPrediction& pred, std::span<const double> truths, std::size_t max_points = 50);
PlotSpec density_plot(const std::vector<CurvePoint>& curve, std::string title = "Predictive density");
PlotSpec dot_plot(const DotPlotLayout& layout, std::string title = "Quantile dot plot");
PlotSpec reliability_plot(const ReliabilityBins& bins);
PlotSpec curve_plot(const CurveResult& curve);

std::string render_svg(const PlotSpec& spec);

}  // namespace uq
