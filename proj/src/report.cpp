#include "uqkit/report.hpp"

#include <cmath>

#include "uqkit/error.hpp"
#include "uqkit/io.hpp"

namespace uq {

Json ReportBundle::index() const {
  Json curves_json = Json::array();
  for (const auto& c : curves) curves_json.push_back(curve_kind_name(c.kind));
  return Json{{"metrics", metrics}, {"curves", curves_json}, {"plots", plots}, {"summary", summary}, {"files", files}};
}

double interval_mass_of(const FittedEstimator& model) {
  for (const char* key : {"interval_mass", "target_mass", "alpha"})
    if (model.config.is_object() && model.config.contains(key) && model.config.at(key).is_number())
      return model.config.at(key).get<double>();
  return 0.95;
}

Distribution row_distribution(const RegressionPrediction& pred, std::size_t row, double mass) {
  require(row < pred.size(), ErrorKind::DimensionMismatch, "report row out of range");
  if (pred.samples) {
    const auto r = pred.samples->row(row);
    return Samples{Vector(r.begin(), r.end())};
  }
  if (pred.y_std) return GaussianParams{pred.y_hat[row], (*pred.y_std)[row]};
  const double z = central_z(mass);
  return GaussianParams{pred.y_hat[row], (pred.y_upper[row] - pred.y_lower[row]) / (2.0 * z)};
}

namespace {

std::vector<CurvePoint> safe_density(const Distribution& dist, std::size_t points) {
  try {
    return density_curve(dist, points);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateDistribution) throw;
  }
  // Zero spread: draw a narrow bump at the location instead of failing the report.
  double centre = 0.0;
  if (const auto* g = std::get_if<GaussianParams>(&dist)) centre = g->mu;
  else centre = mean(std::get<Samples>(dist).values);
  return density_curve(GaussianParams{centre, 1e-6 * std::max(1.0, std::abs(centre))}, points);
}

}  // namespace

ReportBundle write_report(const FittedEstimator& model, const Dataset& test, const std::filesystem::path& out_dir,
                          const ReportOptions& options) {
  require(test.task.kind == model.task().kind, ErrorKind::TaskMismatch, "test data task differs from the model task");
  const Prediction pred = predict(model, test.features);
  require(options.row < test.size(), ErrorKind::ConfigError,
          "report row " + std::to_string(options.row) + " is out of range for " + std::to_string(test.size()) + " rows");
  std::filesystem::create_directories(out_dir);
  ReportBundle bundle;
  auto write = [&](const std::string& name, const std::string& text) {
    write_text_file(out_dir / name, text);
    bundle.files.push_back(name);
  };
  auto write_plot = [&](const std::string& name, const PlotSpec& spec) {
    write(name, render_svg(spec));
    bundle.plots.push_back(name);
  };
  auto write_curve = [&](const std::string& name, const CurveResult& curve) {
    write(name, curve.to_json().dump(1) + "\n");
    bundle.curves.push_back(curve);
  };

  Distribution row_dist;
  if (const auto* reg = std::get_if<RegressionPrediction>(&pred)) {
    const double mass = interval_mass_of(model);
    bundle.metrics = compute_metrics(pred, test, {"picp", "mpiw", "ucc_auc"});
    const CurveResult u = ucc(*reg, test.target, options.ucc_normalization);
    Vector width(reg->size());
    for (std::size_t i = 0; i < width.size(); ++i) width[i] = reg->y_upper[i] - reg->y_lower[i];
    const CurveResult rr = risk_rejection_curve(width, absolute_residuals(*reg, test.target), default_rejection_grid());
    write_curve("ucc.json", u);
    write_plot("ucc.svg", curve_plot(u));
    write_curve("risk_rejection.json", rr);
    write_plot("risk_rejection.svg", curve_plot(rr));
    write_plot("intervals.svg", interval_plot(*reg, test.target));
    row_dist = row_distribution(*reg, options.row, mass);
    bundle.summary = summarize_prediction(*reg, options.row, SummaryStyle::Detailed, mass, model.algorithm_id);
  } else {
    const auto& cls = std::get<ClassificationPrediction>(pred);
    bundle.metrics = compute_metrics(pred, test, {"accuracy", "ece", "brier"});
    const ReliabilityBins bins = reliability_diagram(cls, test.target, options.reliability_bins);
    Vector uncertainty(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) uncertainty[i] = 1.0 - cls.confidence[i];
    const CurveResult rr =
        risk_rejection_curve(uncertainty, zero_one_losses(cls, test.target), default_rejection_grid());
    write_curve("reliability.json", reliability_curve(bins));
    write_plot("reliability.svg", reliability_plot(bins));
    write_curve("risk_rejection.json", rr);
    write_plot("risk_rejection.svg", curve_plot(rr));
    // Classification has no per-row predictive density; show the confidence
    // distribution over the test set instead.
    row_dist = Samples{cls.confidence};
    bundle.summary = summarize_prediction(cls, options.row, SummaryStyle::Detailed, model.algorithm_id);
  }
  write_plot("density.svg", density_plot(safe_density(row_dist, options.density_points)));
  write_plot("dot_plot.svg", dot_plot(quantile_dot_plot(row_dist, options.dot_quantiles, options.dot_bins)));
  write("metrics.json", Json(bundle.metrics).dump(1) + "\n");
  write("summary.txt", bundle.summary + "\n");
  write_text_file(out_dir / "index.json", bundle.index().dump(1) + "\n");
  return bundle;
}

}  // namespace uq
