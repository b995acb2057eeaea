#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uqkit/communicate.hpp"
#include "uqkit/core.hpp"
#include "uqkit/metrics.hpp"

namespace uq {

struct ReportOptions {
  std::size_t row = 0;
  std::size_t dot_quantiles = 20;
  std::size_t dot_bins = 10;
  std::size_t reliability_bins = 10;
  std::size_t density_points = 200;
  UccNormalization ucc_normalization = UccNormalization::TargetRange;
};

struct ReportBundle {
  std::map<std::string, double> metrics;
  std::vector<CurveResult> curves;
  std::vector<std::string> plots;  // SVG file names
  std::string summary;
  std::vector<std::string> files;  // every file written, relative to the bundle directory

  Json index() const;
};

// Central interval mass recorded in a model config (0.95 when absent).
double interval_mass_of(const FittedEstimator& model);

// Predictive distribution for one regression row: the stored draws when
// present, else a Gaussian from y_std, else a Gaussian matched to the interval.
Distribution row_distribution(const RegressionPrediction& pred, std::size_t row, double mass);

// Writes metrics, curves, plots and the text summary under `out_dir`, then
// index.json listing them.
ReportBundle write_report(const FittedEstimator& model, const Dataset& test, const std::filesystem::path& out_dir,
                          const ReportOptions& options = {});

}  // namespace uq
