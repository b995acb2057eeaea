#include "uqkit/extrinsic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqkit/error.hpp"
#include "uqkit/mlp.hpp"

namespace uq {

namespace {

std::optional<EstimatorConfig> base_from_json(const Json* j) {
  if (j == nullptr || j->is_null()) return std::nullopt;
  require(j->is_object() && j->contains("algorithm_id"), ErrorKind::ConfigError,
          "'base' must be an object with 'algorithm_id' and optional 'params'");
  for (const auto& [key, _] : j->items())
    require(key == "algorithm_id" || key == "params", ErrorKind::ConfigError, "base: unknown key '" + key + "'");
  EstimatorConfig c;
  c.algorithm_id = j->at("algorithm_id").get<std::string>();
  c.params = j->value("params", Json::object());
  const AlgorithmInfo& info = find_algorithm(c.algorithm_id);
  require(info.id.rfind("blackbox_", 0) != 0, ErrorKind::ConfigError, "a meta-model cannot wrap another meta-model");
  c.params = info.normalize_config(c.params);
  return c;
}

Json base_to_json(const std::optional<EstimatorConfig>& c) {
  if (!c) return nullptr;
  return Json{{"algorithm_id", c->algorithm_id}, {"params", c->params}};
}

MetaBoostConfig read_boost(ConfigReader& r, const std::string& prefix, MetaBoostConfig c) {
  c.n_estimators = r.count(prefix + "n_estimators", c.n_estimators);
  c.max_depth = r.count(prefix + "max_depth", c.max_depth);
  c.learning_rate = r.real(prefix + "learning_rate", c.learning_rate);
  c.min_samples_leaf = r.count(prefix + "min_samples_leaf", c.min_samples_leaf);
  require(c.n_estimators >= 1 && c.max_depth >= 1 && c.min_samples_leaf >= 1 && c.learning_rate > 0.0,
          ErrorKind::ConfigError, prefix + "boosting settings must be positive");
  return c;
}

void write_boost(Json& j, const std::string& prefix, const MetaBoostConfig& c) {
  j[prefix + "n_estimators"] = c.n_estimators;
  j[prefix + "max_depth"] = c.max_depth;
  j[prefix + "learning_rate"] = c.learning_rate;
  j[prefix + "min_samples_leaf"] = c.min_samples_leaf;
}

double read_split_fraction(ConfigReader& r, double fallback) {
  const double v = r.real("split_fraction", fallback);
  require(v > 0.0 && v < 1.0, ErrorKind::ConfigError, "'split_fraction' must lie in (0, 1)");
  return v;
}

// Seeded split: the first part trains the base, the rest calibrates.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, RngStream& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto n_base = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  require(n_base >= 1 && n_base < data.size(), ErrorKind::DegenerateData, "split leaves an empty part");
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_base));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(n_base), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {data.subset(a), data.subset(b)};
}

void require_calibration_size(const Dataset& calibration) {
  require(calibration.size() >= 10, ErrorKind::DegenerateData, "calibration split has fewer than 10 points");
}

// Multinomial logistic regression on standardized features.
struct SoftmaxBase {
  Standardizer transform;
  MlpShape shape;
  Vector weights;

  ClassificationPrediction predict(const Matrix& features) const {
    const Matrix x = transform.apply(features);
    MlpPass pass(shape);
    Matrix probs(x.rows(), shape.outputs);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto z = pass.forward(weights, x.row(i));
      const double zmax = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (std::size_t c = 0; c < shape.outputs; ++c) total += (probs(i, c) = std::exp(z[c] - zmax));
      for (std::size_t c = 0; c < shape.outputs; ++c) probs(i, c) /= total;
    }
    return ClassificationPrediction::from_probs(std::move(probs));
  }

  Json to_json() const {
    return Json{{"kind", "softmax"},
                {"x_transform", transform.to_json()},
                {"inputs", shape.inputs},
                {"outputs", shape.outputs},
                {"weights", weights}};
  }

  static SoftmaxBase from_json(const Json& j) {
    SoftmaxBase b;
    b.transform = Standardizer::from_json(j.at("x_transform"));
    b.shape = {j.at("inputs").get<std::size_t>(), {}, j.at("outputs").get<std::size_t>(), Activation::Tanh, true};
    b.weights = vector_from_json(j.at("weights"));
    require(b.weights.size() == b.shape.num_params(), ErrorKind::CorruptPayload, "softmax base weight count mismatch");
    return b;
  }

  static SoftmaxBase fit(const Dataset& data, const MetaClassificationConfig& cfg, RngStream& rng) {
    SoftmaxBase b;
    b.transform = Standardizer::fit(data.features);
    b.shape = {data.dim(), {}, data.task.n_classes, Activation::Tanh, true};
    const Matrix x = b.transform.apply(data.features);
    const std::size_t n = x.rows(), k = b.shape.outputs;
    const double l2 = cfg.base_l2;
    const MlpShape shape = b.shape;
    const PlainObjective objective = [&](std::span<const double> w, std::span<double> grad) {
      std::fill(grad.begin(), grad.end(), 0.0);
      MlpPass pass(shape);
      Vector d(k);
      double total = 0.0;
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto z = pass.forward(w, x.row(i));
        const double zmax = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - zmax);
        const double lse = zmax + std::log(s);
        const std::size_t y = data.label(i);
        total += lse - z[y];
        for (std::size_t c = 0; c < k; ++c) d[c] = (std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0)) * inv;
        pass.backward(w, d, grad);
      }
      double penalty = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        penalty += 0.5 * l2 * w[j] * w[j];
        grad[j] += l2 * w[j];
      }
      return total * inv + penalty;
    };
    OptimizerConfig opt;
    opt.learning_rate = cfg.base_learning_rate;
    opt.max_iters = cfg.base_max_iters;
    b.weights = minimize(objective, mlp_init(b.shape, rng), opt, rng).params;
    return b;
  }
};

Json estimator_payload(const FittedEstimator& model) {
  return Json{{"kind", "estimator"}, {"model", Json::parse(serialize(model))}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Base handles

BaseModelHandle BaseModelHandle::from_function(std::function<Prediction(const Matrix&)> fn, bool concurrent) {
  BaseModelHandle h;
  h.predict_fn = std::move(fn);
  h.concurrent = concurrent;
  return h;
}

BaseModelHandle BaseModelHandle::from_estimator(const FittedEstimator& model) {
  BaseModelHandle h;
  h.predict_fn = [model](const Matrix& x) { return predict(model, x); };
  h.concurrent = true;
  h.payload = estimator_payload(model);
  return h;
}

BaseModelHandle BaseModelHandle::from_payload(const Json& payload) {
  const std::string kind = payload.at("kind").get<std::string>();
  BaseModelHandle h;
  h.concurrent = true;
  h.payload = payload;
  if (kind == "boosted_trees") {
    const BoostedEnsemble model = BoostedEnsemble::from_json(payload.at("model"));
    h.predict_fn = [model](const Matrix& x) -> Prediction {
      RegressionPrediction p;
      p.y_hat = model.predict(x);
      p.y_lower = p.y_hat;
      p.y_upper = p.y_hat;
      return p;
    };
  } else if (kind == "softmax") {
    const SoftmaxBase model = SoftmaxBase::from_json(payload);
    h.predict_fn = [model](const Matrix& x) -> Prediction { return model.predict(x); };
  } else if (kind == "estimator") {
    const FittedEstimator model = deserialize(payload.at("model").dump());
    h.predict_fn = [model](const Matrix& x) { return predict(model, x); };
  } else {
    fail(ErrorKind::CorruptPayload, "unknown base model kind '" + kind + "'");
  }
  return h;
}

Vector BaseModelHandle::predict_values(const Matrix& features) const {
  require(static_cast<bool>(predict_fn), ErrorKind::ConfigError, "base model has no predict function");
  Prediction p = predict_fn(features);
  auto* reg = std::get_if<RegressionPrediction>(&p);
  require(reg != nullptr, ErrorKind::TaskMismatch, "base model does not produce regression predictions");
  require(reg->size() == features.rows(), ErrorKind::DimensionMismatch, "base model returned the wrong row count");
  return std::move(reg->y_hat);
}

ClassificationPrediction BaseModelHandle::predict_classes(const Matrix& features) const {
  require(static_cast<bool>(predict_fn), ErrorKind::ConfigError, "base model has no predict function");
  Prediction p = predict_fn(features);
  auto* cls = std::get_if<ClassificationPrediction>(&p);
  require(cls != nullptr, ErrorKind::TaskMismatch, "base model does not produce class probabilities");
  require(cls->size() == features.rows(), ErrorKind::DimensionMismatch, "base model returned the wrong row count");
  return std::move(*cls);
}

BoostParams MetaBoostConfig::params() const { return {n_estimators, learning_rate, {max_depth, min_samples_leaf, 2}}; }

// ---------------------------------------------------------------------------
// Meta-model regression intervals

MetaRegressionConfig MetaRegressionConfig::from_json(const Json& params) {
  ConfigReader r(params, "blackbox_meta_regression");
  MetaRegressionConfig c;
  c.split_fraction = read_split_fraction(r, c.split_fraction);
  c.target_mass = r.real("target_mass", c.target_mass);
  require(c.target_mass > 0.0 && c.target_mass <= 1.0, ErrorKind::ConfigError, "'target_mass' must lie in (0, 1]");
  c.base = base_from_json(r.raw("base"));
  c.base_boost = read_boost(r, "base_", c.base_boost);
  c.meta = read_boost(r, "meta_", c.meta);
  r.finish();
  return c;
}

Json MetaRegressionConfig::to_json() const {
  Json j{{"split_fraction", split_fraction}, {"target_mass", target_mass}, {"base", base_to_json(base)}};
  write_boost(j, "base_", base_boost);
  write_boost(j, "meta_", meta);
  return j;
}

Matrix meta_regression_features(const Matrix& x, std::span<const double> base_pred) {
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::copy(x.row(i).begin(), x.row(i).end(), out.row(i).begin());
    out(i, x.cols()) = base_pred[i];
  }
  return out;
}

double covering_scale(std::span<const double> residuals, std::span<const double> meta, double eps_floor,
                      double mass) {
  const std::size_t n = residuals.size();
  require(n >= 1 && meta.size() == n, ErrorKind::DimensionMismatch, "covering scale inputs differ in length");
  Vector ratios(n);
  for (std::size_t i = 0; i < n; ++i) ratios[i] = residuals[i] / std::max(meta[i], eps_floor);
  std::sort(ratios.begin(), ratios.end());
  // Guard against mass * n landing a hair above an integer.
  auto k = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  return ratios[k - 1];
}

namespace {

MetaRegressorState finish_meta_regression(BaseModelHandle base, const Dataset& calibration,
                                          const MetaRegressionConfig& config) {
  require(calibration.task.is_regression(), ErrorKind::TaskMismatch, "meta regression needs a regression task");
  require_calibration_size(calibration);
  MetaRegressorState s;
  s.dim = calibration.dim();
  s.target_mass = config.target_mass;
  const Vector pred = base.predict_values(calibration.features);
  Vector resid(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) resid[i] = std::abs(calibration.target[i] - pred[i]);
  const auto [lo, hi] = std::minmax_element(calibration.target.begin(), calibration.target.end());
  const double range = *hi - *lo;
  s.eps_floor = 1e-6 * (range > 0.0 ? range : 1.0);
  const Matrix mf = meta_regression_features(calibration.features, pred);
  s.meta = BoostedEnsemble::fit(mf, resid, BoostLoss::Squared, config.meta.params());
  const Vector meta_pred = s.meta.predict(mf);
  s.coverage_scale = covering_scale(resid, meta_pred, s.eps_floor, config.target_mass);
  if (!(s.coverage_scale > 0.0)) {
    s.coverage_scale = 1.0;
    s.scale_fallback = true;
  }
  s.base = std::move(base);
  return s;
}

}  // namespace

MetaRegressorState meta_regression_fit(const MetaRegressionConfig& config, const Dataset& train, RngStream& rng) {
  require(train.task.is_regression(), ErrorKind::TaskMismatch, "meta regression needs a regression task");
  auto [base_part, calibration] = split_dataset(train, config.split_fraction, rng);
  require_calibration_size(calibration);
  BaseModelHandle base;
  if (config.base) {
    RngStream sub = rng.substream(1);
    base = BaseModelHandle::from_estimator(fit(*config.base, base_part, sub));
  } else {
    const BoostedEnsemble model = BoostedEnsemble::fit(base_part.features, base_part.target, BoostLoss::Squared,
                                                       config.base_boost.params());
    base = BaseModelHandle::from_payload(Json{{"kind", "boosted_trees"}, {"model", model.to_json()}});
  }
  return finish_meta_regression(std::move(base), calibration, config);
}

MetaRegressorState meta_regression_fit(const BaseModelHandle& base, const Dataset& calibration,
                                       const MetaRegressionConfig& config) {
  return finish_meta_regression(base, calibration, config);
}

RegressionPrediction meta_regression_predict(const MetaRegressorState& state, const Matrix& features) {
  require(features.cols() == state.dim, ErrorKind::DimensionMismatch, "meta regression: feature width mismatch");
  RegressionPrediction out;
  out.y_hat = state.base.predict_values(features);
  const Vector meta = state.meta.predict(meta_regression_features(features, out.y_hat));
  out.y_lower.resize(out.size());
  out.y_upper.resize(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double half = state.coverage_scale * std::max(meta[i], state.eps_floor);
    out.y_lower[i] = out.y_hat[i] - half;
    out.y_upper[i] = out.y_hat[i] + half;
  }
  return out;
}

Json MetaRegressorState::to_json() const {
  require(base.payload.has_value(), ErrorKind::ConfigError, "an external base model cannot be serialized");
  return Json{{"base", *base.payload},          {"meta", meta.to_json()},
              {"coverage_scale", coverage_scale}, {"target_mass", target_mass},
              {"eps_floor", eps_floor},           {"dim", dim},
              {"scale_fallback", scale_fallback}};
}

MetaRegressorState MetaRegressorState::from_json(const Json& j) {
  MetaRegressorState s;
  s.base = BaseModelHandle::from_payload(j.at("base"));
  s.meta = BoostedEnsemble::from_json(j.at("meta"));
  s.coverage_scale = j.at("coverage_scale").get<double>();
  s.target_mass = j.at("target_mass").get<double>();
  s.eps_floor = j.at("eps_floor").get<double>();
  s.dim = j.at("dim").get<std::size_t>();
  s.scale_fallback = j.at("scale_fallback").get<bool>();
  require(s.coverage_scale > 0.0, ErrorKind::CorruptPayload, "coverage scale must be positive");
  return s;
}

// ---------------------------------------------------------------------------
// Meta-model classification confidence

MetaClassificationConfig MetaClassificationConfig::from_json(const Json& params) {
  ConfigReader r(params, "blackbox_meta_classification");
  MetaClassificationConfig c;
  c.split_fraction = read_split_fraction(r, c.split_fraction);
  c.base = base_from_json(r.raw("base"));
  c.base_max_iters = r.count("base_max_iters", c.base_max_iters);
  c.base_learning_rate = r.real("base_learning_rate", c.base_learning_rate);
  c.base_l2 = r.real("base_l2", c.base_l2);
  c.meta = read_boost(r, "meta_", c.meta);
  r.finish();
  require(c.base_max_iters >= 1 && c.base_learning_rate > 0.0 && c.base_l2 >= 0.0, ErrorKind::ConfigError,
          "blackbox_meta_classification: invalid base optimizer settings");
  return c;
}

Json MetaClassificationConfig::to_json() const {
  Json j{{"split_fraction", split_fraction},
         {"base", base_to_json(base)},
         {"base_max_iters", base_max_iters},
         {"base_learning_rate", base_learning_rate},
         {"base_l2", base_l2}};
  write_boost(j, "meta_", meta);
  return j;
}

Matrix meta_classification_features(const Matrix& x, const ClassificationPrediction& base_pred) {
  const std::size_t d = x.cols(), k = base_pred.n_classes();
  Matrix out(x.rows(), d + k + 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = out.row(i);
    std::copy(x.row(i).begin(), x.row(i).end(), row.begin());
    double max_p = 0.0, entropy = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = base_pred.probs(i, c);
      row[d + c] = p;
      max_p = std::max(max_p, p);
      if (p > 0.0) entropy -= p * std::log(p);
    }
    row[d + k] = max_p;
    row[d + k + 1] = entropy;
  }
  return out;
}

namespace {

MetaClassifierState finish_meta_classifier(BaseModelHandle base, const Dataset& calibration,
                                           const MetaClassificationConfig& config) {
  require(calibration.task.is_classification(), ErrorKind::TaskMismatch,
          "meta classification needs a classification task");
  require_calibration_size(calibration);
  MetaClassifierState s;
  s.dim = calibration.dim();
  s.n_classes = calibration.task.n_classes;
  const ClassificationPrediction pred = base.predict_classes(calibration.features);
  require(pred.n_classes() == s.n_classes, ErrorKind::DimensionMismatch, "base model class count mismatch");
  Vector correct(calibration.size());
  for (std::size_t i = 0; i < correct.size(); ++i)
    correct[i] = pred.predicted_class[i] == calibration.label(i) ? 1.0 : 0.0;
  const bool all_same = std::all_of(correct.begin(), correct.end(), [&](double v) { return v == correct[0]; });
  if (all_same) {
    s.constant_probability = correct[0];
    s.constant_target_warning = true;
  } else {
    s.meta = BoostedEnsemble::fit(meta_classification_features(calibration.features, pred), correct,
                                  BoostLoss::Logistic, config.meta.params());
  }
  s.base = std::move(base);
  return s;
}

}  // namespace

MetaClassifierState meta_classifier_fit(const MetaClassificationConfig& config, const Dataset& train,
                                        RngStream& rng) {
  require(train.task.is_classification(), ErrorKind::TaskMismatch, "meta classification needs a classification task");
  auto [base_part, calibration] = split_dataset(train, config.split_fraction, rng);
  require_calibration_size(calibration);
  BaseModelHandle base;
  RngStream sub = rng.substream(1);
  if (config.base) {
    base = BaseModelHandle::from_estimator(fit(*config.base, base_part, sub));
  } else {
    base = BaseModelHandle::from_payload(SoftmaxBase::fit(base_part, config, sub).to_json());
  }
  return finish_meta_classifier(std::move(base), calibration, config);
}

MetaClassifierState meta_classifier_fit(const BaseModelHandle& base, const Dataset& calibration,
                                        const MetaClassificationConfig& config) {
  return finish_meta_classifier(base, calibration, config);
}

Vector MetaClassifierState::correctness(const Matrix& features) const {
  require(features.cols() == dim, ErrorKind::DimensionMismatch, "meta classifier: feature width mismatch");
  if (constant_probability) return Vector(features.rows(), *constant_probability);
  const ClassificationPrediction pred = base.predict_classes(features);
  Vector out = meta.predict(meta_classification_features(features, pred));
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

ClassificationPrediction meta_classifier_predict(const MetaClassifierState& state, const Matrix& features) {
  require(features.cols() == state.dim, ErrorKind::DimensionMismatch, "meta classifier: feature width mismatch");
  ClassificationPrediction out = state.base.predict_classes(features);
  out.confidence = state.correctness(features);
  return out;
}

double predict_accuracy_unlabeled(const MetaClassifierState& state, const Matrix& unlabeled_features) {
  require(unlabeled_features.rows() >= 1, ErrorKind::EmptyInput, "no unlabeled rows");
  return mean(state.correctness(unlabeled_features));
}

Json MetaClassifierState::to_json() const {
  require(base.payload.has_value(), ErrorKind::ConfigError, "an external base model cannot be serialized");
  return Json{{"base", *base.payload},
              {"meta", constant_probability ? Json(nullptr) : meta.to_json()},
              {"constant_probability", constant_probability ? Json(*constant_probability) : Json(nullptr)},
              {"constant_target_warning", constant_target_warning},
              {"dim", dim},
              {"n_classes", n_classes},
              {"feature_recipe", feature_recipe}};
}

MetaClassifierState MetaClassifierState::from_json(const Json& j) {
  MetaClassifierState s;
  s.feature_recipe = j.at("feature_recipe").get<int>();
  require(s.feature_recipe == kMetaFeatureRecipe, ErrorKind::SchemaVersionMismatch,
          "unsupported meta feature recipe " + std::to_string(s.feature_recipe));
  s.base = BaseModelHandle::from_payload(j.at("base"));
  if (!j.at("constant_probability").is_null()) s.constant_probability = j.at("constant_probability").get<double>();
  else s.meta = BoostedEnsemble::from_json(j.at("meta"));
  s.constant_target_warning = j.at("constant_target_warning").get<bool>();
  s.dim = j.at("dim").get<std::size_t>();
  s.n_classes = j.at("n_classes").get<std::size_t>();
  return s;
}

// ---------------------------------------------------------------------------

std::vector<AlgorithmInfo> extrinsic_algorithms() {
  std::vector<AlgorithmInfo> out;
  out.push_back({"blackbox_meta_regression", [](const Task& t) { return t.is_regression(); },
                 [](const Json& p) { return MetaRegressionConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream& rng) {
                   return meta_regression_fit(MetaRegressionConfig::from_json(c), d, rng).to_json();
                 },
                 [](const Json&, const Json& s, const Matrix& x) -> Prediction {
                   return meta_regression_predict(MetaRegressorState::from_json(s), x);
                 }});
  out.push_back({"blackbox_meta_classification", [](const Task& t) { return t.is_classification(); },
                 [](const Json& p) { return MetaClassificationConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream& rng) {
                   return meta_classifier_fit(MetaClassificationConfig::from_json(c), d, rng).to_json();
                 },
                 [](const Json&, const Json& s, const Matrix& x) -> Prediction {
                   return meta_classifier_predict(MetaClassifierState::from_json(s), x);
                 }});
  return out;
}

}  // namespace uq
