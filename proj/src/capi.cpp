#include "uqkit/uqkit.h"

#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "uqkit/core.hpp"
#include "uqkit/error.hpp"
#include "uqkit/io.hpp"
#include "uqkit/metrics.hpp"
#include "uqkit/recalibration.hpp"
#include "uqkit/report.hpp"

struct uq_dataset {
  uq::Dataset data;
};
struct uq_model {
  uq::FittedEstimator model;
};
struct uq_prediction {
  uq::Prediction pred;
};

namespace {

thread_local std::string g_message;
thread_local std::string g_kind;

uq_status status_for(uq::ErrorKind kind) {
  using K = uq::ErrorKind;
  switch (kind) {
    case K::ConfigError:
    case K::UnsupportedKind:
      return UQ_ERR_CONFIG;
    case K::NotPositiveDefinite:
    case K::NonFiniteObjective:
    case K::SingularHessian:
    case K::GridExhausted:
      return UQ_ERR_NUMERIC;
    case K::TaskMismatch:
    case K::NotBinary:
    case K::ModeTaskMismatch:
      return UQ_ERR_TASK_MISMATCH;
    case K::TargetUnreachable:
      return UQ_ERR_UNREACHABLE;
    default:
      return UQ_ERR_DATA;
  }
}

template <typename F>
uq_status guarded(F&& body) {
  try {
    body();
    g_message.clear();
    g_kind.clear();
    return UQ_OK;
  } catch (const uq::Error& e) {
    g_kind = std::string(uq::to_string(e.kind()));
    g_message = e.what();
    return status_for(e.kind());
  } catch (const uq::Json::exception& e) {
    g_kind = "ConfigError";
    g_message = std::string("invalid JSON: ") + e.what();
    return UQ_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_kind = "Internal";
    g_message = "out of memory";
    return UQ_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_kind = "Internal";
    g_message = e.what();
    return UQ_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  uq::require(p != nullptr, uq::ErrorKind::ConfigError, std::string(what) + " must not be null");
}

uq::TaskKind task_kind(const char* task) {
  need(task, "task");
  try {
    return uq::parse_task_kind(task);
  } catch (const uq::Error&) {
    uq::fail(uq::ErrorKind::ConfigError, std::string("unknown task '") + task + "' (expected regression or classification)");
  }
}

uq::Json parse_json(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return uq::Json::object();
  try {
    return uq::Json::parse(text);
  } catch (const uq::Json::exception& e) {
    uq::fail(uq::ErrorKind::ConfigError, std::string(what) + " is not valid JSON: " + e.what());
  }
}

uq::EstimatorConfig estimator_from_json(const uq::Json& j) {
  uq::require(j.is_object() && j.contains("algorithm_id") && j.at("algorithm_id").is_string(), uq::ErrorKind::ConfigError,
              "estimator config needs a string 'algorithm_id'");
  for (const auto& [key, _] : j.items())
    uq::require(key == "algorithm_id" || key == "params" || key == "standardize", uq::ErrorKind::ConfigError,
                "estimator config: unknown key '" + key + "'");
  uq::EstimatorConfig c;
  c.algorithm_id = j.at("algorithm_id").get<std::string>();
  c.params = j.value("params", uq::Json::object());
  uq::require(c.params.is_object(), uq::ErrorKind::ConfigError, "'params' must be an object");
  if (j.contains("standardize")) {
    uq::require(j.at("standardize").is_boolean(), uq::ErrorKind::ConfigError, "'standardize' must be a boolean");
    c.standardize = j.at("standardize").get<bool>();
  }
  return c;
}

std::vector<uq::EstimatorConfig> expand_grid(const uq::Json& spec) {
  std::vector<uq::EstimatorConfig> out;
  if (spec.contains("configs")) {
    uq::require(spec.size() == 1 && spec.at("configs").is_array(), uq::ErrorKind::ConfigError,
                "'configs' must be the only key and hold an array");
    for (const auto& c : spec.at("configs")) out.push_back(estimator_from_json(c));
    return out;
  }
  uq::Json base = spec;
  uq::Json grid = uq::Json::object();
  if (base.contains("grid")) {
    grid = base.at("grid");
    base.erase("grid");
  }
  uq::require(grid.is_object(), uq::ErrorKind::ConfigError, "'grid' must map parameter names to value lists");
  const uq::EstimatorConfig seed_config = estimator_from_json(base);
  std::vector<std::pair<std::string, std::vector<uq::Json>>> axes;
  for (const auto& [key, values] : grid.items()) {
    uq::require(values.is_array() && !values.empty(), uq::ErrorKind::ConfigError,
                "grid entry '" + key + "' must be a non-empty list");
    axes.emplace_back(key, std::vector<uq::Json>(values.begin(), values.end()));
  }
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    uq::EstimatorConfig c = seed_config;
    for (std::size_t a = 0; a < axes.size(); ++a) c.params[axes[a].first] = axes[a].second[idx[a]];
    out.push_back(std::move(c));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

std::vector<std::string> split_names(const char* list) {
  std::vector<std::string> out;
  if (list == nullptr) return out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::string> default_metrics(const uq::Prediction& p) {
  if (std::holds_alternative<uq::RegressionPrediction>(p)) return {"picp", "mpiw", "ucc_auc"};
  return {"accuracy", "ece", "brier"};
}

const uq::RegressionPrediction& regression_of(const uq::Prediction& p) {
  const auto* r = std::get_if<uq::RegressionPrediction>(&p);
  uq::require(r != nullptr, uq::ErrorKind::TaskMismatch, "this operation needs regression predictions");
  return *r;
}

const uq::ClassificationPrediction& classification_of(const uq::Prediction& p) {
  const auto* c = std::get_if<uq::ClassificationPrediction>(&p);
  uq::require(c != nullptr, uq::ErrorKind::TaskMismatch, "this operation needs classification predictions");
  return *c;
}

void check_rows(const uq::Prediction& p, const uq::Dataset& d) {
  const std::size_t n = std::visit([](const auto& x) { return x.size(); }, p);
  uq::require(n == d.size(), uq::ErrorKind::DimensionMismatch,
              "prediction rows (" + std::to_string(n) + ") differ from dataset rows (" + std::to_string(d.size()) + ")");
}

std::optional<double> final_objective(const uq::Json& state) {
  for (const char* key : {"final_objective", "log_marginal_likelihood"})
    if (state.is_object() && state.contains(key) && state.at(key).is_number()) return state.at(key).get<double>();
  return std::nullopt;
}

}  // namespace

extern "C" {

const char* uq_version(void) { return "1.0.0"; }

const char* uq_status_name(uq_status status) {
  switch (status) {
    case UQ_OK: return "ok";
    case UQ_ERR_CONFIG: return "config_error";
    case UQ_ERR_DATA: return "data_error";
    case UQ_ERR_NUMERIC: return "numeric_error";
    case UQ_ERR_TASK_MISMATCH: return "task_mismatch";
    case UQ_ERR_UNREACHABLE: return "target_unreachable";
    case UQ_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* uq_last_error_message(void) { return g_message.c_str(); }
const char* uq_last_error_kind(void) { return g_kind.c_str(); }
void uq_string_free(char* s) { std::free(s); }

uq_status uq_registry_json(char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    uq::Json algos = uq::Json::array();
    for (const auto& a : uq::algorithm_registry()) {
      uq::Json tasks = uq::Json::array();
      if (a.supports(uq::Task::regression())) tasks.push_back("regression");
      if (a.supports(uq::Task::classification(2))) tasks.push_back("classification");
      algos.push_back({{"id", a.id}, {"tasks", tasks}});
    }
    uq::Json metrics = uq::Json::array();
    for (const auto& m : uq::metric_registry())
      metrics.push_back({{"name", m.name}, {"task", uq::task_name(m.task)}, {"greater_is_better", m.greater_is_better}});
    *out_json = dup(uq::Json{{"algorithms", algos}, {"metrics", metrics}}.dump());
  });
}

uq_status uq_dataset_read_csv(const char* path, const char* target_column, const char* task, size_t n_classes,
                              uq_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(target_column, "target_column");
    need(out, "out");
    const auto kind = task_kind(task);
    auto d = uq::read_dataset(path, target_column, kind, n_classes ? std::optional<std::size_t>(n_classes) : std::nullopt);
    *out = new uq_dataset{std::move(d)};
  });
}

uq_status uq_dataset_from_arrays(const double* features, size_t n, size_t d, const double* target, const char* task,
                                 size_t n_classes, uq_dataset** out) {
  return guarded([&] {
    need(out, "out");
    uq::require(n == 0 || (features != nullptr || d == 0) , uq::ErrorKind::ConfigError, "features must not be null");
    need(target, "target");
    const auto kind = task_kind(task);
    uq::Matrix x(n, d, uq::Vector(features, features + n * d));
    uq::Vector y(target, target + n);
    uq::Task t = uq::Task::regression();
    if (kind == uq::TaskKind::Classification) {
      std::size_t k = n_classes;
      if (k == 0) {
        double top = 0.0;
        for (double v : y) top = std::max(top, v);
        k = std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1);
      }
      t = uq::Task::classification(k);
    }
    *out = new uq_dataset{uq::make_dataset(std::move(x), std::move(y), t)};
  });
}

uq_status uq_dataset_shape(const uq_dataset* data, size_t* rows, size_t* cols) {
  return guarded([&] {
    need(data, "data");
    if (rows) *rows = data->data.size();
    if (cols) *cols = data->data.dim();
  });
}

uq_status uq_dataset_hash(const uq_dataset* data, uint64_t* out) {
  return guarded([&] {
    need(data, "data");
    need(out, "out");
    *out = uq::content_hash(data->data);
  });
}

uq_status uq_dataset_to_csv(const uq_dataset* data, const char* target_column, char** out_csv) {
  return guarded([&] {
    need(data, "data");
    need(target_column, "target_column");
    need(out_csv, "out_csv");
    *out_csv = dup(uq::dataset_to_csv(data->data, target_column));
  });
}

void uq_dataset_free(uq_dataset* data) { delete data; }

uq_status uq_model_fit_json(const char* estimator_json, const uq_dataset* train, uint64_t seed, uq_model** out) {
  return guarded([&] {
    need(train, "train");
    need(out, "out");
    const uq::EstimatorConfig config = estimator_from_json(parse_json(estimator_json, "estimator config"));
    uq::RngStream rng(seed);
    *out = new uq_model{uq::fit(config, train->data, rng)};
  });
}

uq_status uq_model_save(const uq_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    uq::save(model->model, path);
  });
}

uq_status uq_model_load(const char* path, uq_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new uq_model{uq::load(path)};
  });
}

uq_status uq_model_serialize(const uq_model* model, char** out_text) {
  return guarded([&] {
    need(model, "model");
    need(out_text, "out_text");
    *out_text = dup(uq::serialize(model->model));
  });
}

uq_status uq_model_info_json(const uq_model* model, char** out_json) {
  return guarded([&] {
    need(model, "model");
    need(out_json, "out_json");
    const auto& m = model->model;
    const auto obj = final_objective(m.state);
    uq::Json j{{"algorithm_id", m.algorithm_id},
               {"task", uq::task_name(m.task().kind)},
               {"n_classes", m.task().n_classes},
               {"feature_names", m.feature_names},
               {"n", m.trained_on.n},
               {"d", m.trained_on.d},
               {"interval_mass", uq::interval_mass_of(m)},
               {"final_objective", obj ? uq::Json(*obj) : uq::Json(nullptr)},
               {"standardized", m.input_standardizer.has_value()}};
    *out_json = dup(j.dump());
  });
}

uq_status uq_model_read_dataset(const uq_model* model, const char* path, const char* target_column, uq_dataset** out) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    need(target_column, "target_column");
    need(out, "out");
    const auto& m = model->model;
    const uq::CsvTable table = uq::read_csv(path);
    const std::size_t t = table.column(target_column);
    uq::Matrix x(table.values.rows(), m.feature_names.size());
    std::vector<std::size_t> cols;
    for (const auto& name : m.feature_names) cols.push_back(table.column(name));
    uq::Vector y(table.values.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) x(r, c) = table.values(r, cols[c]);
      y[r] = table.values(r, t);
    }
    *out = new uq_dataset{uq::make_dataset(std::move(x), std::move(y), m.task(), m.feature_names)};
  });
}

void uq_model_free(uq_model* model) { delete model; }

uq_status uq_model_predict(const uq_model* model, const uq_dataset* data, uq_prediction** out) {
  return guarded([&] {
    need(model, "model");
    need(data, "data");
    need(out, "out");
    *out = new uq_prediction{uq::predict(model->model, data->data.features)};
  });
}

uq_status uq_model_predict_csv(const uq_model* model, const char* path, uq_prediction** out) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    need(out, "out");
    const uq::Matrix x = uq::read_features(path, model->model.feature_names);
    uq::require(x.rows() >= 1, uq::ErrorKind::DataError, "no rows to predict");
    *out = new uq_prediction{uq::predict(model->model, x)};
  });
}

uq_status uq_prediction_to_json(const uq_prediction* pred, char** out_json) {
  return guarded([&] {
    need(pred, "pred");
    need(out_json, "out_json");
    *out_json = dup(uq::prediction_to_json(pred->pred).dump(1) + "\n");
  });
}

uq_status uq_prediction_from_json(const char* json, uq_prediction** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    uq::Json j;
    try {
      j = uq::Json::parse(json);
    } catch (const uq::Json::exception& e) {
      uq::fail(uq::ErrorKind::DataError, std::string("predictions are not valid JSON: ") + e.what());
    }
    *out = new uq_prediction{uq::prediction_from_json(j)};
  });
}

uq_status uq_prediction_to_csv(const uq_prediction* pred, char** out_csv) {
  return guarded([&] {
    need(pred, "pred");
    need(out_csv, "out_csv");
    *out_csv = dup(uq::prediction_to_csv(pred->pred));
  });
}

uq_status uq_prediction_rows(const uq_prediction* pred, size_t* rows) {
  return guarded([&] {
    need(pred, "pred");
    need(rows, "rows");
    *rows = std::visit([](const auto& p) { return p.size(); }, pred->pred);
  });
}

void uq_prediction_free(uq_prediction* pred) { delete pred; }

uq_status uq_evaluate(const uq_prediction* pred, const uq_dataset* truth, const char* metrics, char** out_json) {
  return guarded([&] {
    need(pred, "pred");
    need(truth, "truth");
    need(out_json, "out_json");
    check_rows(pred->pred, truth->data);
    auto names = split_names(metrics);
    if (names.empty()) names = default_metrics(pred->pred);
    for (const auto& n : names)
      if (uq::find_metric(n) == nullptr) {
        std::string known;
        for (const auto& k : uq::registered_metric_names()) known += (known.empty() ? "" : ", ") + k;
        uq::fail(uq::ErrorKind::ConfigError, "unknown metric '" + n + "' (registered: " + known + ")");
      }
    const auto values = uq::compute_metrics(pred->pred, truth->data, names);
    uq::Json j = uq::Json::object();
    for (const auto& [k, v] : values) j[k] = v;
    *out_json = dup(j.dump(1) + "\n");
  });
}

uq_status uq_curve_json(const uq_prediction* pred, const uq_dataset* truth, const char* kind, char** out_json) {
  return guarded([&] {
    need(pred, "pred");
    need(truth, "truth");
    need(kind, "kind");
    need(out_json, "out_json");
    check_rows(pred->pred, truth->data);
    const std::string k = kind;
    uq::CurveResult curve;
    if (k == "ucc") {
      curve = uq::ucc(regression_of(pred->pred), truth->data.target);
    } else if (k == "reliability") {
      curve = uq::reliability_curve(uq::reliability_diagram(classification_of(pred->pred), truth->data.target));
    } else if (k == "risk_rejection") {
      if (const auto* r = std::get_if<uq::RegressionPrediction>(&pred->pred)) {
        uq::Vector width(r->size());
        for (std::size_t i = 0; i < width.size(); ++i) width[i] = r->y_upper[i] - r->y_lower[i];
        curve = uq::risk_rejection_curve(width, uq::absolute_residuals(*r, truth->data.target),
                                         uq::default_rejection_grid());
      } else {
        const auto& c = classification_of(pred->pred);
        uq::Vector u(c.size());
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = 1.0 - c.confidence[i];
        curve = uq::risk_rejection_curve(u, uq::zero_one_losses(c, truth->data.target), uq::default_rejection_grid());
      }
    } else {
      uq::fail(uq::ErrorKind::ConfigError, "unknown curve '" + k + "' (expected ucc, risk_rejection or reliability)");
    }
    *out_json = dup(curve.to_json().dump(1) + "\n");
  });
}

uq_status uq_recalibrate(const uq_prediction* pred, const uq_dataset* calibration, const char* method,
                         const char* options_json, char** out_map_json, uq_prediction** out) {
  return guarded([&] {
    need(pred, "pred");
    need(calibration, "calibration");
    need(method, "method");
    need(out_map_json, "out_map_json");
    need(out, "out");
    check_rows(pred->pred, calibration->data);
    const uq::Json opts = parse_json(options_json, "recalibration options");
    const std::string m = method;
    uq::Json map;
    uq::Prediction result;
    if (m == "interval-scale") {
      for (const auto& [key, _] : opts.items())
        uq::require(key == "miss_rate" || key == "bandwidth", uq::ErrorKind::ConfigError,
                    "interval-scale: unknown option '" + key + "'");
      uq::require(opts.size() == 1, uq::ErrorKind::ConfigError,
                  "interval-scale needs exactly one of 'miss_rate' or 'bandwidth'");
      uq::IntervalTarget target = opts.contains("miss_rate")
                                      ? uq::IntervalTarget(uq::MissRateTarget{opts.at("miss_rate").get<double>()})
                                      : uq::IntervalTarget(uq::BandwidthTarget{opts.at("bandwidth").get<double>()});
      auto r = uq::interval_recalibrate(regression_of(pred->pred), calibration->data.target, target);
      map = {{"method", m}, {"target", opts}, {"map", r.scale.to_json()}};
      result = std::move(r.prediction);
    } else if (m == "isotonic" || m == "platt") {
      for (const auto& [key, _] : opts.items())
        uq::require(key == "score" || key == "positive_class", uq::ErrorKind::ConfigError,
                    m + ": unknown option '" + key + "'");
      const auto& cls = classification_of(pred->pred);
      uq::require(calibration->data.task.n_classes == 2 && cls.n_classes() == 2, uq::ErrorKind::NotBinary,
                  m + " needs a binary classification task");
      const auto kind = uq::parse_score_kind(opts.value("score", std::string(m == "platt" ? "logit" : "probability")));
      const std::size_t positive = opts.value("positive_class", std::size_t{1});
      const uq::Vector scores = uq::probability_scores(cls, positive, kind);
      uq::Vector labels(calibration->data.size());
      for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = calibration->data.label(i) == positive ? 1.0 : 0.0;
      uq::ProbabilityMap pm = m == "platt" ? uq::ProbabilityMap(uq::platt_fit(scores, labels))
                                           : uq::ProbabilityMap(uq::isotonic_fit(scores, labels));
      map = {{"method", m},
             {"score", uq::score_kind_name(kind)},
             {"positive_class", positive},
             {"map", std::visit([](const auto& x) { return x.to_json(); }, pm)}};
      result = uq::apply_probability_map(pm, cls, positive, kind);
    } else {
      uq::fail(uq::ErrorKind::ConfigError, "unknown method '" + m + "' (expected isotonic, platt or interval-scale)");
    }
    *out_map_json = dup(map.dump(1) + "\n");
    *out = new uq_prediction{std::move(result)};
  });
}

uq_status uq_apply_map(const char* map_json, const uq_prediction* pred, uq_prediction** out) {
  return guarded([&] {
    need(pred, "pred");
    need(out, "out");
    const uq::Json map = parse_json(map_json, "map");
    const std::string m = map.at("method").get<std::string>();
    if (m == "interval-scale") {
      *out = new uq_prediction{uq::apply_interval_scale(regression_of(pred->pred), map.at("map").at("c").get<double>())};
      return;
    }
    const auto kind = uq::parse_score_kind(map.at("score").get<std::string>());
    const std::size_t positive = map.at("positive_class").get<std::size_t>();
    uq::ProbabilityMap pm = m == "platt" ? uq::ProbabilityMap(uq::PlattMap::from_json(map.at("map")))
                                         : uq::ProbabilityMap(uq::IsotonicMap::from_json(map.at("map")));
    *out = new uq_prediction{uq::apply_probability_map(pm, classification_of(pred->pred), positive, kind)};
  });
}

uq_status uq_grid_search_json(const char* spec_json, const uq_dataset* data, const char* scorer, size_t folds,
                              uint64_t seed, char** out_json) {
  return guarded([&] {
    need(data, "data");
    need(scorer, "scorer");
    need(out_json, "out_json");
    const auto grid = expand_grid(parse_json(spec_json, "grid spec"));
    for (const auto& c : grid) uq::find_algorithm(c.algorithm_id);
    const uq::ScorerSpec s = uq::make_scorer(data->data.task.kind, scorer);
    uq::RngStream rng(seed);
    const auto result = uq::grid_search(grid, data->data, s, folds, rng);
    uq::Json j = result.to_json(s);
    j["best_config"]["standardize"] = result.best_config.standardize;
    j["folds"] = folds;
    j["seed"] = seed;
    *out_json = dup(j.dump(1) + "\n");
  });
}

uq_status uq_report(const uq_model* model, const uq_dataset* test, const char* out_dir, const char* options_json,
                    char** out_index_json) {
  return guarded([&] {
    need(model, "model");
    need(test, "test");
    need(out_dir, "out_dir");
    const uq::Json o = parse_json(options_json, "report options");
    uq::ReportOptions opts;
    for (const auto& [key, value] : o.items()) {
      if (key == "row") opts.row = value.get<std::size_t>();
      else if (key == "dot_quantiles") opts.dot_quantiles = value.get<std::size_t>();
      else if (key == "dot_bins") opts.dot_bins = value.get<std::size_t>();
      else if (key == "reliability_bins") opts.reliability_bins = value.get<std::size_t>();
      else if (key == "density_points") opts.density_points = value.get<std::size_t>();
      else if (key == "ucc_normalization") opts.ucc_normalization = uq::parse_ucc_normalization(value.get<std::string>());
      else uq::fail(uq::ErrorKind::ConfigError, "report: unknown option '" + key + "'");
    }
    const auto bundle = uq::write_report(model->model, test->data, out_dir, opts);
    if (out_index_json) *out_index_json = dup(bundle.index().dump(1) + "\n");
  });
}

uq_status uq_summarize(const uq_prediction* pred, size_t row, const char* style, double mass, char** out_text) {
  return guarded([&] {
    need(pred, "pred");
    need(out_text, "out_text");
    const std::string s = style ? style : "concise";
    uq::require(s == "concise" || s == "detailed", uq::ErrorKind::ConfigError, "style must be concise or detailed");
    const auto st = s == "concise" ? uq::SummaryStyle::Concise : uq::SummaryStyle::Detailed;
    if (const auto* r = std::get_if<uq::RegressionPrediction>(&pred->pred))
      *out_text = dup(uq::summarize_prediction(*r, row, st, mass));
    else
      *out_text = dup(uq::summarize_prediction(std::get<uq::ClassificationPrediction>(pred->pred), row, st));
  });
}

uq_status uq_render_svg(const char* plot_spec_json, char** out_svg) {
  return guarded([&] {
    need(plot_spec_json, "plot_spec_json");
    need(out_svg, "out_svg");
    *out_svg = dup(uq::render_svg(uq::PlotSpec::from_json(parse_json(plot_spec_json, "plot spec"))));
  });
}

}  // extern "C"
