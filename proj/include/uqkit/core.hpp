#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "uqkit/numerics.hpp"

namespace uq {

using Json = nlohmann::json;

enum class TaskKind { Regression, Classification };

struct Task {
  TaskKind kind = TaskKind::Regression;
  std::size_t n_classes = 0;  // only meaningful for classification

  static Task regression() { return {TaskKind::Regression, 0}; }
  static Task classification(std::size_t k) { return {TaskKind::Classification, k}; }
  bool is_regression() const { return kind == TaskKind::Regression; }
  bool is_classification() const { return kind == TaskKind::Classification; }
  friend bool operator==(const Task&, const Task&) = default;
};

std::string_view task_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct Dataset {
  Matrix features;
  Vector target;
  std::vector<std::string> feature_names;
  Task task;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  // Throws DataError on a broken invariant.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  std::size_t label(std::size_t i) const { return static_cast<std::size_t>(target[i]); }
};

// Builds and validates a dataset; missing feature names become x0, x1, ...
Dataset make_dataset(Matrix features, Vector target, Task task,
                     std::vector<std::string> feature_names = {});

// FNV-1a over the little-endian IEEE-754 bytes of features then target.
std::uint64_t content_hash(const Dataset& data);

struct RegressionPrediction {
  Vector y_hat;
  Vector y_lower;
  Vector y_upper;
  std::optional<Vector> y_std;
  std::optional<Matrix> samples;

  std::size_t size() const { return y_hat.size(); }
  void validate() const;
};

struct ClassificationPrediction {
  Matrix probs;
  std::vector<std::size_t> predicted_class;
  Vector confidence;

  std::size_t size() const { return probs.rows(); }
  std::size_t n_classes() const { return probs.cols(); }
  // Fills predicted_class with the row argmax (lowest index on ties) and
  // confidence with the row max.
  static ClassificationPrediction from_probs(Matrix probs);
  void validate() const;
};

using Prediction = std::variant<RegressionPrediction, ClassificationPrediction>;

// Sorts lower/upper around y_hat so that y_lower <= y_hat <= y_upper.
void enforce_interval_order(RegressionPrediction& pred);

struct DatasetFingerprint {
  std::size_t n = 0;
  std::size_t d = 0;
  Task task;
  std::uint64_t content_hash = 0;

  static DatasetFingerprint of(const Dataset& data);
  friend bool operator==(const DatasetFingerprint&, const DatasetFingerprint&) = default;
};

// Per-feature affine transform (x - mean) / scale; a zero spread keeps scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& features);
  Matrix apply(const Matrix& features) const;
  Json to_json() const;
  static Standardizer from_json(const Json& j);
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

inline constexpr int kSchemaVersion = 1;

struct FittedEstimator {
  std::string algorithm_id;
  Json config;
  Json state;
  int schema_version = kSchemaVersion;
  DatasetFingerprint trained_on;
  // Dataset-level standardization applied before the estimator sees features.
  std::optional<Standardizer> input_standardizer;
  std::vector<std::string> feature_names;

  Task task() const { return trained_on.task; }
};

struct EstimatorConfig {
  std::string algorithm_id;
  Json params = Json::object();
  // Dataset-level standardization before the estimator sees the features.
  bool standardize = false;
};

// Algorithm registry. Each entry validates its parameters (unknown keys are a
// ConfigError), fits a state payload and predicts from it.
struct AlgorithmInfo {
  std::string id;
  std::function<bool(const Task&)> supports;
  std::function<Json(const Json& params)> normalize_config;
  std::function<Json(const Json& config, const Dataset& train, RngStream& rng)> fit;
  std::function<Prediction(const Json& config, const Json& state, const Matrix& features)> predict;
};

const std::vector<AlgorithmInfo>& algorithm_registry();
const AlgorithmInfo& find_algorithm(std::string_view id);
std::vector<std::string> registered_algorithms();

FittedEstimator fit(const EstimatorConfig& config, const Dataset& train, RngStream& rng);
Prediction predict(const FittedEstimator& model, const Matrix& features);

std::string serialize(const FittedEstimator& model);
FittedEstimator deserialize(std::string_view text);
void save(const FittedEstimator& model, const std::filesystem::path& path);
FittedEstimator load(const std::filesystem::path& path);

// Metric registry used by scorers. Every entry declares its task and whether
// larger values are better.
struct MetricInfo {
  std::string name;
  TaskKind task;
  bool greater_is_better;
  std::function<double(const Prediction& pred, const Dataset& truth)> compute;
};

const std::vector<MetricInfo>& metric_registry();
const MetricInfo* find_metric(std::string_view name);
std::vector<std::string> registered_metric_names(std::optional<TaskKind> task = std::nullopt);

struct ScorerSpec {
  std::string metric_name;
  TaskKind task;
  bool greater_is_better;

  double score(const Prediction& pred, const Dataset& truth) const;
};

// Mirrors building a scorer from a task type, a metric and a direction.
ScorerSpec make_scorer(TaskKind task, std::string_view metric_name,
                       std::optional<bool> greater_is_better = std::nullopt);

// Seeded fold index for every row; stratified by class for classification.
std::vector<std::size_t> assign_folds(const Dataset& data, std::size_t folds, RngStream& rng);

Vector cross_validate(const EstimatorConfig& config, const Dataset& data, const ScorerSpec& scorer,
                      std::size_t folds, RngStream& rng);

struct GridRow {
  EstimatorConfig config;
  std::optional<double> mean_score;  // empty when the config failed
  Vector fold_scores;
  std::string failure;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  EstimatorConfig best_config;
  std::vector<GridRow> table;

  Json to_json(const ScorerSpec& scorer) const;
};

GridSearchResult grid_search(const std::vector<EstimatorConfig>& grid, const Dataset& data,
                             const ScorerSpec& scorer, std::size_t folds, RngStream& rng);

// JSON helpers shared by algorithm payloads.
Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);

// Reads typed keys from a config object and rejects keys that were never
// read once finish() is called.
class ConfigReader {
 public:
  ConfigReader(const Json& params, std::string context);

  double real(const std::string& key, double fallback);
  std::size_t count(const std::string& key, std::size_t fallback);
  bool flag(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<std::size_t> counts(const std::string& key, const std::vector<std::size_t>& fallback);
  // Positive real or the string "auto" (returned as nullopt).
  std::optional<double> real_or_auto(const std::string& key, std::optional<double> fallback);
  const Json* raw(const std::string& key);
  void finish() const;

 private:
  const Json* lookup(const std::string& key);
  const Json& params_;
  std::string context_;
  std::vector<std::string> used_;
};

}  // namespace uq
