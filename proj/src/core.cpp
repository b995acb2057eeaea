#include "uqkit/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uqkit/error.hpp"
#include "uqkit/extrinsic.hpp"
#include "uqkit/intrinsic.hpp"
#include "uqkit/metrics.hpp"

namespace uq {

std::string_view task_name(TaskKind kind) {
  return kind == TaskKind::Regression ? "regression" : "classification";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "regression") return TaskKind::Regression;
  if (name == "classification") return TaskKind::Classification;
  fail(ErrorKind::ConfigError, "unknown task '" + std::string(name) + "'");
}

void Dataset::validate() const {
  require(size() >= 1, ErrorKind::DataError, "dataset has no rows");
  require(target.size() == size(), ErrorKind::DataError, "target length does not match feature rows");
  require(feature_names.size() == dim(), ErrorKind::DataError, "feature name count does not match columns");
  require(features.all_finite(), ErrorKind::DataError, "dataset has non-finite feature values");
  for (double y : target) require(std::isfinite(y), ErrorKind::DataError, "dataset has non-finite targets");
  if (task.is_classification()) {
    require(task.n_classes >= 2, ErrorKind::DataError, "classification needs at least two classes");
    for (double y : target)
      require(y >= 0.0 && y < static_cast<double>(task.n_classes) && y == std::floor(y),
              ErrorKind::DataError, "class label outside [0, k)");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.target.reserve(indices.size());
  for (std::size_t i : indices) out.target.push_back(target[i]);
  out.feature_names = feature_names;
  out.task = task;
  return out;
}

Dataset make_dataset(Matrix features, Vector target, Task task, std::vector<std::string> feature_names) {
  if (feature_names.empty())
    for (std::size_t c = 0; c < features.cols(); ++c) feature_names.push_back("x" + std::to_string(c));
  Dataset d{std::move(features), std::move(target), std::move(feature_names), task};
  d.validate();
  return d;
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void hash_double(std::uint64_t& h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int byte = 0; byte < 8; ++byte) {
    h ^= (bits >> (8 * byte)) & 0xFFu;
    h *= kFnvPrime;
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  require(s.size() == 16, ErrorKind::CorruptPayload, "bad content hash");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else fail(ErrorKind::CorruptPayload, "bad content hash");
  }
  return v;
}

}  // namespace

std::uint64_t content_hash(const Dataset& data) {
  std::uint64_t h = kFnvOffset;
  for (double v : data.features.data()) hash_double(h, v);
  for (double v : data.target) hash_double(h, v);
  return h;
}

void RegressionPrediction::validate() const {
  const std::size_t n = y_hat.size();
  require(y_lower.size() == n && y_upper.size() == n, ErrorKind::DimensionMismatch,
          "prediction vectors differ in length");
  for (std::size_t i = 0; i < n; ++i)
    require(y_lower[i] <= y_hat[i] && y_hat[i] <= y_upper[i], ErrorKind::DataError,
            "prediction interval does not bracket the point estimate");
  if (y_std) {
    require(y_std->size() == n, ErrorKind::DimensionMismatch, "y_std length mismatch");
    for (double s : *y_std) require(s >= 0.0, ErrorKind::DataError, "negative predictive std");
  }
  if (samples) require(samples->rows() == n, ErrorKind::DimensionMismatch, "sample matrix row mismatch");
}

void enforce_interval_order(RegressionPrediction& pred) {
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double v[3] = {pred.y_lower[i], pred.y_hat[i], pred.y_upper[i]};
    std::sort(std::begin(v), std::end(v));
    pred.y_lower[i] = v[0];
    pred.y_hat[i] = v[1];
    pred.y_upper[i] = v[2];
  }
}

ClassificationPrediction ClassificationPrediction::from_probs(Matrix probs) {
  ClassificationPrediction out;
  const std::size_t n = probs.rows();
  out.predicted_class.resize(n);
  out.confidence.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = probs.row(i);
    const auto it = std::max_element(row.begin(), row.end());
    out.predicted_class[i] = static_cast<std::size_t>(it - row.begin());
    out.confidence[i] = *it;
  }
  out.probs = std::move(probs);
  return out;
}

void ClassificationPrediction::validate() const {
  require(predicted_class.size() == size() && confidence.size() == size(), ErrorKind::DimensionMismatch,
          "classification prediction fields differ in length");
  for (std::size_t i = 0; i < size(); ++i) {
    double total = 0.0;
    for (double p : probs.row(i)) {
      require(p >= 0.0 && p <= 1.0, ErrorKind::DataError, "probability outside [0, 1]");
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, ErrorKind::DataError, "probability row does not sum to 1");
  }
}

DatasetFingerprint DatasetFingerprint::of(const Dataset& data) {
  return {data.size(), data.dim(), data.task, uq::content_hash(data)};
}

Standardizer Standardizer::fit(const Matrix& features) {
  Standardizer s;
  const std::size_t d = features.cols();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  for (std::size_t c = 0; c < d; ++c) {
    Vector col = features.column(c);
    s.mean[c] = uq::mean(col);
    double ss = 0.0;
    for (double v : col) ss += (v - s.mean[c]) * (v - s.mean[c]);
    const double sd = std::sqrt(ss / static_cast<double>(col.size()));
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  require(features.cols() == mean.size(), ErrorKind::DimensionMismatch, "standardizer width mismatch");
  Matrix out = features;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / scale[c];
  return out;
}

Json Standardizer::to_json() const { return Json{{"mean", mean}, {"scale", scale}}; }

Standardizer Standardizer::from_json(const Json& j) {
  return {vector_from_json(j.at("mean")), vector_from_json(j.at("scale"))};
}

Json to_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const Json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), vector_from_json(j.at("data")));
}

Vector vector_from_json(const Json& j) { return j.get<Vector>(); }

const std::vector<AlgorithmInfo>& algorithm_registry() {
  static const std::vector<AlgorithmInfo> registry = [] {
    std::vector<AlgorithmInfo> all = intrinsic_algorithms();
    for (auto& a : extrinsic_algorithms()) all.push_back(std::move(a));
    return all;
  }();
  return registry;
}

const AlgorithmInfo& find_algorithm(std::string_view id) {
  for (const auto& a : algorithm_registry())
    if (a.id == id) return a;
  std::string known;
  for (const auto& a : algorithm_registry()) known += (known.empty() ? "" : ", ") + a.id;
  fail(ErrorKind::ConfigError, "unknown algorithm '" + std::string(id) + "' (registered: " + known + ")");
}

std::vector<std::string> registered_algorithms() {
  std::vector<std::string> ids;
  for (const auto& a : algorithm_registry()) ids.push_back(a.id);
  return ids;
}

FittedEstimator fit(const EstimatorConfig& config, const Dataset& train, RngStream& rng) {
  const AlgorithmInfo& algo = find_algorithm(config.algorithm_id);
  train.validate();
  require(algo.supports(train.task), ErrorKind::TaskMismatch,
          "algorithm '" + algo.id + "' does not support " + std::string(task_name(train.task.kind)) + " tasks");
  FittedEstimator model;
  model.algorithm_id = algo.id;
  model.config = algo.normalize_config(config.params);
  model.trained_on = DatasetFingerprint::of(train);
  model.feature_names = train.feature_names;
  if (config.standardize) {
    model.input_standardizer = Standardizer::fit(train.features);
    Dataset scaled = train;
    scaled.features = model.input_standardizer->apply(train.features);
    model.state = algo.fit(model.config, scaled, rng);
  } else {
    model.state = algo.fit(model.config, train, rng);
  }
  return model;
}

Prediction predict(const FittedEstimator& model, const Matrix& features) {
  require(features.cols() == model.trained_on.d, ErrorKind::DimensionMismatch,
          "feature width " + std::to_string(features.cols()) + " does not match trained width " +
              std::to_string(model.trained_on.d));
  const AlgorithmInfo& algo = find_algorithm(model.algorithm_id);
  Prediction pred = model.input_standardizer ? algo.predict(model.config, model.state, model.input_standardizer->apply(features))
                                             : algo.predict(model.config, model.state, features);
  std::visit([](auto& p) { p.validate(); }, pred);
  return pred;
}

std::string serialize(const FittedEstimator& model) {
  Json doc;
  doc["format"] = "uqkit-model";
  doc["schema_version"] = model.schema_version;
  doc["algorithm_id"] = model.algorithm_id;
  doc["config"] = model.config;
  doc["state"] = model.state;
  doc["trained_on"] = Json{{"n", model.trained_on.n},
                           {"d", model.trained_on.d},
                           {"task", task_name(model.trained_on.task.kind)},
                           {"n_classes", model.trained_on.task.n_classes},
                           {"content_hash", hex64(model.trained_on.content_hash)}};
  doc["input_standardizer"] = model.input_standardizer ? model.input_standardizer->to_json() : Json(nullptr);
  doc["feature_names"] = model.feature_names;
  return doc.dump(1) + "\n";
}

FittedEstimator deserialize(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("model document does not parse: ") + e.what());
  }
  try {
    require(doc.is_object() && doc.value("format", "") == "uqkit-model", ErrorKind::CorruptPayload,
            "not a uqkit model document");
    const int version = doc.at("schema_version").get<int>();
    require(version == kSchemaVersion, ErrorKind::SchemaVersionMismatch,
            "model schema_version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kSchemaVersion) + ")");
    FittedEstimator model;
    model.schema_version = version;
    model.algorithm_id = doc.at("algorithm_id").get<std::string>();
    const auto ids = registered_algorithms();
    require(std::find(ids.begin(), ids.end(), model.algorithm_id) != ids.end(), ErrorKind::CorruptPayload,
            "model names unregistered algorithm '" + model.algorithm_id + "'");
    model.config = doc.at("config");
    model.state = doc.at("state");
    const Json& t = doc.at("trained_on");
    model.trained_on.n = t.at("n").get<std::size_t>();
    model.trained_on.d = t.at("d").get<std::size_t>();
    model.trained_on.task = {parse_task_kind(t.at("task").get<std::string>()), t.at("n_classes").get<std::size_t>()};
    model.trained_on.content_hash = parse_hex64(t.at("content_hash").get<std::string>());
    if (!doc.at("input_standardizer").is_null())
      model.input_standardizer = Standardizer::from_json(doc.at("input_standardizer"));
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    require(model.feature_names.size() == model.trained_on.d, ErrorKind::CorruptPayload,
            "feature name count does not match the trained width");
    return model;
  } catch (const Json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("model document is incomplete: ") + e.what());
  }
}

void save(const FittedEstimator& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  out << serialize(model);
  require(static_cast<bool>(out), ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

FittedEstimator load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

namespace {

const RegressionPrediction& as_regression(const Prediction& p) {
  const auto* r = std::get_if<RegressionPrediction>(&p);
  require(r != nullptr, ErrorKind::TaskMismatch, "metric needs a regression prediction");
  return *r;
}

const ClassificationPrediction& as_classification(const Prediction& p) {
  const auto* c = std::get_if<ClassificationPrediction>(&p);
  require(c != nullptr, ErrorKind::TaskMismatch, "metric needs a classification prediction");
  return *c;
}

}  // namespace

const std::vector<MetricInfo>& metric_registry() {
  static const std::vector<MetricInfo> registry = {
      {"picp", TaskKind::Regression, true,
       [](const Prediction& p, const Dataset& d) { return picp(as_regression(p), d.target); }},
      {"mpiw", TaskKind::Regression, false,
       [](const Prediction& p, const Dataset&) { return mpiw(as_regression(p)); }},
      {"ucc_auc", TaskKind::Regression, false,
       [](const Prediction& p, const Dataset& d) {
         return ucc(as_regression(p), d.target).metadata.at("auc").get<double>();
       }},
      {"ece", TaskKind::Classification, false,
       [](const Prediction& p, const Dataset& d) { return ece(as_classification(p), d.target, 10); }},
      {"brier", TaskKind::Classification, false,
       [](const Prediction& p, const Dataset& d) {
         return brier(as_classification(p), d.target, BrierMode::MulticlassSum);
       }},
      {"brier_positive", TaskKind::Classification, false,
       [](const Prediction& p, const Dataset& d) {
         return brier(as_classification(p), d.target, BrierMode::PositiveClass);
       }},
      {"accuracy", TaskKind::Classification, true,
       [](const Prediction& p, const Dataset& d) {
         const auto losses = zero_one_losses(as_classification(p), d.target);
         return 1.0 - mean(losses);
       }},
  };
  return registry;
}

const MetricInfo* find_metric(std::string_view name) {
  for (const auto& m : metric_registry())
    if (m.name == name) return &m;
  return nullptr;
}

std::vector<std::string> registered_metric_names(std::optional<TaskKind> task) {
  std::vector<std::string> names;
  for (const auto& m : metric_registry())
    if (!task || m.task == *task) names.push_back(m.name);
  return names;
}

double ScorerSpec::score(const Prediction& pred, const Dataset& truth) const {
  const MetricInfo* info = find_metric(metric_name);
  require(info != nullptr, ErrorKind::ConfigError, "unknown metric '" + metric_name + "'");
  return info->compute(pred, truth);
}

ScorerSpec make_scorer(TaskKind task, std::string_view metric_name, std::optional<bool> greater_is_better) {
  const MetricInfo* info = find_metric(metric_name);
  if (info == nullptr || info->task != task) {
    std::string known;
    for (const auto& n : registered_metric_names(task)) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorKind::ConfigError, "unknown scorer '" + std::string(metric_name) + "' for " +
                                     std::string(task_name(task)) + " (registered: " + known + ")");
  }
  return {info->name, task, greater_is_better.value_or(info->greater_is_better)};
}

std::vector<std::size_t> assign_folds(const Dataset& data, std::size_t folds, RngStream& rng) {
  require(folds >= 2, ErrorKind::TooFewSamples, "cross-validation needs at least two folds");
  require(data.size() >= folds, ErrorKind::TooFewSamples, "fewer rows than folds");
  std::vector<std::size_t> assignment(data.size(), 0);
  if (data.task.is_classification()) {
    std::size_t dealt = 0;
    for (std::size_t k = 0; k < data.task.n_classes; ++k) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data.label(i) == k) members.push_back(i);
      rng.shuffle(members);
      for (std::size_t i : members) assignment[i] = dealt++ % folds;
    }
  } else {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); ++pos) assignment[order[pos]] = pos % folds;
  }
  return assignment;
}

namespace {

Vector cross_validate_with_folds(const EstimatorConfig& config, const Dataset& data, const ScorerSpec& scorer,
                                 const std::vector<std::size_t>& assignment, std::size_t folds,
                                 const RngStream& base) {
  Vector scores;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < data.size(); ++i) (assignment[i] == f ? test_idx : train_idx).push_back(i);
    const Dataset train = data.subset(train_idx);
    const Dataset test = data.subset(test_idx);
    RngStream fold_rng = base.substream(f);
    const FittedEstimator model = fit(config, train, fold_rng);
    scores.push_back(scorer.score(predict(model, test.features), test));
  }
  return scores;
}

}  // namespace

Vector cross_validate(const EstimatorConfig& config, const Dataset& data, const ScorerSpec& scorer,
                      std::size_t folds, RngStream& rng) {
  require(scorer.task == data.task.kind, ErrorKind::TaskMismatch, "scorer task does not match dataset");
  const auto assignment = assign_folds(data, folds, rng);
  return cross_validate_with_folds(config, data, scorer, assignment, folds, rng);
}

GridSearchResult grid_search(const std::vector<EstimatorConfig>& grid, const Dataset& data,
                             const ScorerSpec& scorer, std::size_t folds, RngStream& rng) {
  require(!grid.empty(), ErrorKind::ConfigError, "grid search needs at least one config");
  require(scorer.task == data.task.kind, ErrorKind::TaskMismatch, "scorer task does not match dataset");
  const auto assignment = assign_folds(data, folds, rng);
  GridSearchResult result;
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    GridRow row;
    row.config = grid[g];
    try {
      row.fold_scores = cross_validate_with_folds(grid[g], data, scorer, assignment, folds, rng);
      row.mean_score = mean(row.fold_scores);
    } catch (const Error& e) {
      row.failure = std::string(to_string(e.kind())) + ": " + e.what();
    }
    if (row.mean_score) {
      const double s = *row.mean_score;
      const bool better = !best || (scorer.greater_is_better ? s > *result.table[*best].mean_score
                                                             : s < *result.table[*best].mean_score);
      if (better) best = g;
    }
    result.table.push_back(std::move(row));
  }
  require(best.has_value(), ErrorKind::GridExhausted, "every config in the grid failed");
  result.best_index = *best;
  result.best_config = grid[*best];
  return result;
}

Json GridSearchResult::to_json(const ScorerSpec& scorer) const {
  Json rows = Json::array();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table[i];
    rows.push_back(Json{{"index", i},
                        {"algorithm", r.config.algorithm_id},
                        {"params", r.config.params},
                        {"status", r.mean_score ? "ok" : "failed"},
                        {"mean_score", r.mean_score ? Json(*r.mean_score) : Json(nullptr)},
                        {"fold_scores", r.fold_scores},
                        {"failure", r.failure}});
  }
  return Json{{"scorer",
               {{"metric", scorer.metric_name},
                {"task", task_name(scorer.task)},
                {"greater_is_better", scorer.greater_is_better}}},
              {"best_index", best_index},
              {"best_config", {{"algorithm", best_config.algorithm_id}, {"params", best_config.params}}},
              {"table", rows}};
}

ConfigReader::ConfigReader(const Json& params, std::string context)
    : params_(params), context_(std::move(context)) {
  require(params_.is_object() || params_.is_null(), ErrorKind::ConfigError, context_ + ": config must be an object");
}

const Json* ConfigReader::lookup(const std::string& key) {
  used_.push_back(key);
  if (!params_.is_object()) return nullptr;
  auto it = params_.find(key);
  return it == params_.end() ? nullptr : &*it;
}

const Json* ConfigReader::raw(const std::string& key) { return lookup(key); }

double ConfigReader::real(const std::string& key, double fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  require(v->is_number(), ErrorKind::ConfigError, context_ + ": '" + key + "' must be a number");
  const double x = v->get<double>();
  require(std::isfinite(x), ErrorKind::ConfigError, context_ + ": '" + key + "' must be finite");
  return x;
}

std::size_t ConfigReader::count(const std::string& key, std::size_t fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  require(v->is_number_integer() && v->get<long long>() >= 0, ErrorKind::ConfigError,
          context_ + ": '" + key + "' must be a non-negative integer");
  return v->get<std::size_t>();
}

bool ConfigReader::flag(const std::string& key, bool fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  require(v->is_boolean(), ErrorKind::ConfigError, context_ + ": '" + key + "' must be a boolean");
  return v->get<bool>();
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  require(v->is_string(), ErrorKind::ConfigError, context_ + ": '" + key + "' must be a string");
  return v->get<std::string>();
}

std::vector<std::size_t> ConfigReader::counts(const std::string& key, const std::vector<std::size_t>& fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  require(v->is_array(), ErrorKind::ConfigError, context_ + ": '" + key + "' must be a list of integers");
  std::vector<std::size_t> out;
  for (const auto& e : *v) {
    require(e.is_number_integer() && e.get<long long>() >= 0, ErrorKind::ConfigError,
            context_ + ": '" + key + "' must be a list of non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::optional<double> ConfigReader::real_or_auto(const std::string& key, std::optional<double> fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (v->is_string()) {
    require(v->get<std::string>() == "auto", ErrorKind::ConfigError,
            context_ + ": '" + key + "' must be a positive number or \"auto\"");
    return std::nullopt;
  }
  require(v->is_number() && v->get<double>() > 0.0, ErrorKind::ConfigError,
          context_ + ": '" + key + "' must be a positive number or \"auto\"");
  return v->get<double>();
}

void ConfigReader::finish() const {
  if (!params_.is_object()) return;
  for (const auto& [key, value] : params_.items())
    require(std::find(used_.begin(), used_.end(), key) != used_.end(), ErrorKind::ConfigError,
            context_ + ": unknown key '" + key + "'");
}

}  // namespace uq
