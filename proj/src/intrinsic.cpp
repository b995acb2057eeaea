#include "uqkit/intrinsic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uqkit/error.hpp"

namespace uq {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

Vector log_grid(double lo_exp, double hi_exp, std::size_t points) {
  Vector out(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    out[i] = std::pow(10.0, lo_exp + t * (hi_exp - lo_exp));
  }
  return out;
}

Vector positive_list(ConfigReader& r, const std::string& key, const Vector& fallback) {
  const Json* v = r.raw(key);
  if (v == nullptr) return fallback;
  require(v->is_array() && !v->empty(), ErrorKind::ConfigError, "'" + key + "' must be a non-empty list");
  Vector out;
  for (const auto& e : *v) {
    require(e.is_number() && e.get<double>() > 0.0, ErrorKind::ConfigError,
            "'" + key + "' entries must be positive numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

double unit_interval(ConfigReader& r, const std::string& key, double fallback) {
  const double v = r.real(key, fallback);
  require(v > 0.0 && v < 1.0, ErrorKind::ConfigError, "'" + key + "' must lie in (0, 1)");
  return v;
}

OptimizerConfig optimizer_from_json(const Json* j, const OptimizerConfig& defaults) {
  if (j == nullptr) return defaults;
  ConfigReader r(*j, "optimizer");
  OptimizerConfig c;
  c.learning_rate = r.real("learning_rate", defaults.learning_rate);
  c.max_iters = r.count("max_iters", defaults.max_iters);
  c.beta1 = r.real("beta1", defaults.beta1);
  c.beta2 = r.real("beta2", defaults.beta2);
  c.epsilon = r.real("epsilon", defaults.epsilon);
  if (const Json* clip = r.raw("gradient_clip"); clip != nullptr && !clip->is_null()) {
    require(clip->is_number(), ErrorKind::ConfigError, "optimizer: 'gradient_clip' must be a number");
    c.gradient_clip = clip->get<double>();
  } else {
    c.gradient_clip = defaults.gradient_clip;
  }
  c.batch_size = r.count("batch_size", defaults.batch_size);
  c.lr_decay = r.real("lr_decay", defaults.lr_decay);
  r.finish();
  c.validate();
  return c;
}

Json optimizer_to_json(const OptimizerConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"max_iters", c.max_iters},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"gradient_clip", c.gradient_clip ? Json(*c.gradient_clip) : Json(nullptr)},
              {"batch_size", c.batch_size},
              {"lr_decay", c.lr_decay}};
}

Json optional_standardizer(const std::optional<Standardizer>& s) { return s ? s->to_json() : Json(nullptr); }

std::optional<Standardizer> standardizer_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return Standardizer::from_json(j);
}

Matrix maybe_apply(const std::optional<Standardizer>& s, const Matrix& x) { return s ? s->apply(x) : x; }

// Mean and sample std of the target (std 1 when degenerate).
std::pair<double, double> target_stats(std::span<const double> y) {
  const double m = mean(y);
  const double sd = stddev(y);
  return {m, sd > 0.0 ? sd : 1.0};
}

void clamp_point_inside(RegressionPrediction& pred) {
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred.y_lower[i] = std::min(pred.y_lower[i], pred.y_hat[i]);
    pred.y_upper[i] = std::max(pred.y_upper[i], pred.y_hat[i]);
  }
}

Json mlp_shape_to_json(const MlpShape& s) {
  return Json{{"inputs", s.inputs},
              {"hidden", s.hidden},
              {"outputs", s.outputs},
              {"activation", activation_name(s.activation)},
              {"bias", s.bias}};
}

MlpShape mlp_shape_from_json(const Json& j) {
  MlpShape s;
  s.inputs = j.at("inputs").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.outputs = j.at("outputs").get<std::size_t>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.bias = j.at("bias").get<bool>();
  return s;
}

std::vector<std::size_t> hidden_sizes(ConfigReader& r, const std::vector<std::size_t>& fallback, bool allow_empty) {
  auto h = r.counts("hidden_sizes", fallback);
  require(allow_empty || !h.empty(), ErrorKind::ConfigError, "'hidden_sizes' must be non-empty");
  for (std::size_t v : h) require(v >= 1, ErrorKind::ConfigError, "'hidden_sizes' entries must be >= 1");
  return h;
}

void require_regression(const Dataset& d, const char* what) {
  require(d.task.is_regression(), ErrorKind::TaskMismatch, std::string(what) + " needs a regression task");
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian process

double rbf_kernel(std::span<const double> a, std::span<const double> b, double signal_variance, double lengthscale) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return signal_variance * std::exp(-d2 / (2.0 * lengthscale * lengthscale));
}

GpConfig::GpConfig()
    : signal_grid(log_grid(-2, 2, 7)), lengthscale_grid(log_grid(-2, 2, 7)), noise_grid(log_grid(-2, 2, 7)) {}

GpConfig GpConfig::from_json(const Json& params) {
  ConfigReader r(params, "gp_regression");
  GpConfig c;
  c.signal_variance = r.real_or_auto("signal_variance", std::nullopt);
  c.lengthscale = r.real_or_auto("lengthscale", std::nullopt);
  c.noise_variance = r.real_or_auto("noise_variance", std::nullopt);
  c.signal_grid = positive_list(r, "signal_grid", c.signal_grid);
  c.lengthscale_grid = positive_list(r, "lengthscale_grid", c.lengthscale_grid);
  c.noise_grid = positive_list(r, "noise_grid", c.noise_grid);
  c.interval_mass = unit_interval(r, "interval_mass", c.interval_mass);
  c.standardize = r.flag("standardize", c.standardize);
  c.normalize_target = r.flag("normalize_target", c.normalize_target);
  r.finish();
  return c;
}

Json GpConfig::to_json() const {
  auto value = [](const std::optional<double>& v) { return v ? Json(*v) : Json("auto"); };
  return Json{{"signal_variance", value(signal_variance)},
              {"lengthscale", value(lengthscale)},
              {"noise_variance", value(noise_variance)},
              {"signal_grid", signal_grid},
              {"lengthscale_grid", lengthscale_grid},
              {"noise_grid", noise_grid},
              {"interval_mass", interval_mass},
              {"standardize", standardize},
              {"normalize_target", normalize_target}};
}

namespace {

Matrix squared_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      d(i, j) = d(j, i) = s;
    }
  return d;
}

Matrix gp_system(const Matrix& dist2, double s2, double ell, double noise) {
  const std::size_t n = dist2.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k(i, j) = s2 * std::exp(-dist2(i, j) / (2.0 * ell * ell));
  for (std::size_t i = 0; i < n; ++i) k(i, i) += noise;
  return k;
}

double lml_from(const Cholesky& chol, std::span<const double> y, Vector* alpha_out) {
  Vector alpha = chol.solve(y);
  const double n = static_cast<double>(y.size());
  const double value = -0.5 * dot(y, alpha) - 0.5 * chol.log_det() - 0.5 * n * kLog2Pi;
  if (alpha_out) *alpha_out = std::move(alpha);
  return value;
}

}  // namespace

double gp_log_marginal_likelihood(const Matrix& x, std::span<const double> y, double signal_variance,
                                  double lengthscale, double noise_variance) {
  const Cholesky chol(gp_system(squared_distances(x), signal_variance, lengthscale, noise_variance));
  return lml_from(chol, y, nullptr);
}

GpModel gp_fit(const GpConfig& config, const Dataset& train) {
  require_regression(train, "gp_regression");
  const std::size_t n = train.size();
  const bool any_auto = !config.signal_variance || !config.lengthscale || !config.noise_variance;
  require(n >= 1, ErrorKind::DegenerateData, "gp_regression needs at least one row");
  require(!any_auto || n >= 2, ErrorKind::DegenerateData, "automatic GP hyperparameters need at least two rows");

  GpModel m;
  m.config = config;
  if (config.standardize) m.x_transform = Standardizer::fit(train.features);
  m.train_x = maybe_apply(m.x_transform, train.features);
  if (config.normalize_target && n >= 2) {
    std::tie(m.y_mean, m.y_scale) = target_stats(train.target);
  } else if (config.normalize_target) {
    m.y_mean = train.target[0];
  }
  m.train_y.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.train_y[i] = (train.target[i] - m.y_mean) / m.y_scale;

  double var_y = 1.0;
  if (!config.normalize_target && n >= 2) {
    const double sd = stddev(m.train_y);
    var_y = sd > 0.0 ? sd * sd : 1.0;
  }
  auto candidates = [](const std::optional<double>& fixed, const Vector& grid, double scale) {
    if (fixed) return Vector{*fixed};
    Vector out;
    for (double g : grid) out.push_back(g * scale);
    return out;
  };
  const Vector s2s = candidates(config.signal_variance, config.signal_grid, var_y);
  const Vector ells = candidates(config.lengthscale, config.lengthscale_grid, 1.0);
  const Vector noises = candidates(config.noise_variance, config.noise_grid, var_y);

  const Matrix dist2 = squared_distances(m.train_x);
  bool found = false;
  std::optional<Error> last_error;
  for (double s2 : s2s)
    for (double ell : ells)
      for (double noise : noises) {
        try {
          const Cholesky chol(gp_system(dist2, s2, ell, noise));
          Vector alpha;
          const double lml = lml_from(chol, m.train_y, &alpha);
          if (!std::isfinite(lml)) continue;
          if (!found || lml > m.log_marginal_likelihood) {
            found = true;
            m.log_marginal_likelihood = lml;
            m.signal_variance = s2;
            m.lengthscale = ell;
            m.noise_variance = noise;
            m.alpha = std::move(alpha);
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
          last_error = e;
        }
      }
  if (!found) {
    if (last_error) throw *last_error;
    fail(ErrorKind::DegenerateData, "no GP hyperparameter candidate gave a finite marginal likelihood");
  }
  return m;
}

RegressionPrediction GpModel::predict(const Matrix& features) const {
  const Matrix x = maybe_apply(x_transform, features);
  const Cholesky chol(gp_system(squared_distances(train_x), signal_variance, lengthscale, noise_variance));
  const double z = central_z(config.interval_mass);
  RegressionPrediction out;
  const std::size_t n = x.rows();
  out.y_hat.resize(n);
  out.y_lower.resize(n);
  out.y_upper.resize(n);
  out.y_std = Vector(n);
  Vector kstar(train_x.rows());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < train_x.rows(); ++j)
      kstar[j] = rbf_kernel(x.row(i), train_x.row(j), signal_variance, lengthscale);
    const double mu = dot(kstar, alpha);
    const Vector v = chol.solve_lower(kstar);
    const double var = std::max(0.0, signal_variance - dot(v, v) + noise_variance);
    const double sd = y_scale * std::sqrt(var);
    out.y_hat[i] = y_mean + y_scale * mu;
    (*out.y_std)[i] = sd;
    out.y_lower[i] = out.y_hat[i] - z * sd;
    out.y_upper[i] = out.y_hat[i] + z * sd;
  }
  return out;
}

Json GpModel::to_json() const {
  return Json{{"signal_variance", signal_variance},
              {"lengthscale", lengthscale},
              {"noise_variance", noise_variance},
              {"log_marginal_likelihood", log_marginal_likelihood},
              {"x_transform", optional_standardizer(x_transform)},
              {"y_mean", y_mean},
              {"y_scale", y_scale},
              {"train_x", uq::to_json(train_x)},
              {"train_y", train_y},
              {"alpha", alpha}};
}

GpModel GpModel::from_json(const Json& config, const Json& state) {
  GpModel m;
  m.config = GpConfig::from_json(config);
  m.signal_variance = state.at("signal_variance").get<double>();
  m.lengthscale = state.at("lengthscale").get<double>();
  m.noise_variance = state.at("noise_variance").get<double>();
  m.log_marginal_likelihood = state.at("log_marginal_likelihood").get<double>();
  m.x_transform = standardizer_from(state.at("x_transform"));
  m.y_mean = state.at("y_mean").get<double>();
  m.y_scale = state.at("y_scale").get<double>();
  m.train_x = matrix_from_json(state.at("train_x"));
  m.train_y = vector_from_json(state.at("train_y"));
  m.alpha = vector_from_json(state.at("alpha"));
  require(m.alpha.size() == m.train_x.rows() && m.train_y.size() == m.train_x.rows(), ErrorKind::CorruptPayload,
          "GP state arrays differ in length");
  return m;
}

RegressionPrediction gp_fit_predict(const GpConfig& config, const Dataset& train, const Matrix& test_features) {
  require(test_features.cols() == train.dim(), ErrorKind::DimensionMismatch, "test width does not match training");
  return gp_fit(config, train).predict(test_features);
}

// ---------------------------------------------------------------------------
// Quantile boosting

QuantileBoostConfig QuantileBoostConfig::from_json(const Json& params) {
  ConfigReader r(params, "quantile_regression");
  QuantileBoostConfig c;
  c.alpha = unit_interval(r, "alpha", c.alpha);
  c.n_estimators = r.count("n_estimators", c.n_estimators);
  c.max_depth = r.count("max_depth", c.max_depth);
  c.learning_rate = r.real("learning_rate", c.learning_rate);
  c.min_samples_leaf = r.count("min_samples_leaf", c.min_samples_leaf);
  c.min_samples_split = r.count("min_samples_split", c.min_samples_split);
  r.finish();
  require(c.n_estimators >= 1, ErrorKind::ConfigError, "quantile_regression: 'n_estimators' must be >= 1");
  require(c.max_depth >= 1, ErrorKind::ConfigError, "quantile_regression: 'max_depth' must be >= 1");
  require(c.learning_rate > 0.0, ErrorKind::ConfigError, "quantile_regression: 'learning_rate' must be positive");
  require(c.min_samples_leaf >= 1, ErrorKind::ConfigError, "quantile_regression: 'min_samples_leaf' must be >= 1");
  require(c.min_samples_split >= 2, ErrorKind::ConfigError, "quantile_regression: 'min_samples_split' must be >= 2");
  return c;
}

Json QuantileBoostConfig::to_json() const {
  return Json{{"alpha", alpha},
              {"n_estimators", n_estimators},
              {"max_depth", max_depth},
              {"learning_rate", learning_rate},
              {"min_samples_leaf", min_samples_leaf},
              {"min_samples_split", min_samples_split}};
}

BoostParams QuantileBoostConfig::boost_params() const {
  return {n_estimators, learning_rate, {max_depth, min_samples_leaf, min_samples_split}};
}

QuantileBoostModel quantile_boost_fit(const QuantileBoostConfig& config, const Dataset& train) {
  require_regression(train, "quantile_regression");
  require(train.size() >= config.min_samples_split, ErrorKind::DegenerateData,
          "quantile_regression needs at least min_samples_split rows");
  const BoostParams p = config.boost_params();
  QuantileBoostModel m;
  m.config = config;
  m.lower = BoostedEnsemble::fit(train.features, train.target, BoostLoss::Quantile, p, (1.0 - config.alpha) / 2.0);
  m.median = BoostedEnsemble::fit(train.features, train.target, BoostLoss::Quantile, p, 0.5);
  m.upper = BoostedEnsemble::fit(train.features, train.target, BoostLoss::Quantile, p, (1.0 + config.alpha) / 2.0);
  return m;
}

RegressionPrediction QuantileBoostModel::predict(const Matrix& features) const {
  RegressionPrediction out;
  out.y_hat = median.predict(features);
  out.y_lower = lower.predict(features);
  out.y_upper = upper.predict(features);
  enforce_interval_order(out);
  return out;
}

Json QuantileBoostModel::to_json() const {
  return Json{{"lower", lower.to_json()}, {"median", median.to_json()}, {"upper", upper.to_json()}};
}

QuantileBoostModel QuantileBoostModel::from_json(const Json& config, const Json& state) {
  QuantileBoostModel m;
  m.config = QuantileBoostConfig::from_json(config);
  m.lower = BoostedEnsemble::from_json(state.at("lower"));
  m.median = BoostedEnsemble::from_json(state.at("median"));
  m.upper = BoostedEnsemble::from_json(state.at("upper"));
  return m;
}

// ---------------------------------------------------------------------------
// Noise networks

double gaussian_nll(double y, double mu, double sigma) {
  const double r = y - mu;
  return 0.5 * kLog2Pi + std::log(sigma) + r * r / (2.0 * sigma * sigma);
}

NoiseNetConfig::NoiseNetConfig() {
  optimizer.learning_rate = 0.01;
  optimizer.max_iters = 2000;
}

NoiseNetConfig NoiseNetConfig::from_json(const Json& params) {
  ConfigReader r(params, "noise_net");
  NoiseNetConfig c;
  c.hidden_sizes = uq::hidden_sizes(r, c.hidden_sizes, false);
  c.activation = parse_activation(r.text("activation", "tanh"));
  const std::string nm = r.text("noise_model", "homoscedastic");
  if (nm == "homoscedastic") c.noise_model = NoiseModel::Homoscedastic;
  else if (nm == "heteroscedastic") c.noise_model = NoiseModel::Heteroscedastic;
  else fail(ErrorKind::ConfigError, "noise_net: unknown noise_model '" + nm + "'");
  c.optimizer = optimizer_from_json(r.raw("optimizer"), c.optimizer);
  c.interval_mass = unit_interval(r, "interval_mass", c.interval_mass);
  c.standardize = r.flag("standardize", c.standardize);
  r.finish();
  return c;
}

Json NoiseNetConfig::to_json() const {
  return Json{{"hidden_sizes", hidden_sizes},
              {"activation", activation_name(activation)},
              {"noise_model", noise_model == NoiseModel::Homoscedastic ? "homoscedastic" : "heteroscedastic"},
              {"optimizer", optimizer_to_json(optimizer)},
              {"interval_mass", interval_mass},
              {"standardize", standardize}};
}

MlpShape NoiseNetConfig::shape(std::size_t inputs) const {
  return {inputs, hidden_sizes, noise_model == NoiseModel::Homoscedastic ? 1u : 2u, activation, true};
}

NoiseNetObjective::NoiseNetObjective(const NoiseNetConfig& config, const Matrix& x, std::span<const double> y)
    : noise_model_(config.noise_model), shape_(config.shape(x.cols())), x_(x), y_(y) {}

std::size_t NoiseNetObjective::num_params() const {
  return shape_.num_params() + (noise_model_ == NoiseModel::Homoscedastic ? 1 : 0);
}

std::pair<double, double> NoiseNetObjective::evaluate(std::span<const double> params,
                                                      std::span<const double> row) const {
  MlpPass pass(shape_);
  const auto out = pass.forward(params.first(shape_.num_params()), row);
  const double raw = noise_model_ == NoiseModel::Homoscedastic ? params.back() : out[1];
  return {out[0], softplus(raw) + kSigmaFloor};
}

double NoiseNetObjective::operator()(std::span<const double> params, std::span<double> grad,
                                     std::span<const std::size_t> batch) const {
  const std::size_t p_net = shape_.num_params();
  const auto net = params.first(p_net);
  const bool homo = noise_model_ == NoiseModel::Homoscedastic;
  std::fill(grad.begin(), grad.end(), 0.0);
  MlpPass pass(shape_);
  const std::size_t count = batch.empty() ? x_.rows() : batch.size();
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  double d_out[2];
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = batch.empty() ? k : batch[k];
    const auto out = pass.forward(net, x_.row(i));
    const double raw = homo ? params.back() : out[1];
    const double sigma = softplus(raw) + kSigmaFloor;
    const double r = y_[i] - out[0];
    total += gaussian_nll(y_[i], out[0], sigma);
    d_out[0] = -r / (sigma * sigma) * inv;
    const double d_sigma = (1.0 / sigma - r * r / (sigma * sigma * sigma)) * inv;
    if (homo) {
      grad[p_net] += d_sigma * sigmoid(raw);
      pass.backward(net, std::span<const double>(d_out, 1), grad.first(p_net));
    } else {
      d_out[1] = d_sigma * sigmoid(raw);
      pass.backward(net, std::span<const double>(d_out, 2), grad.first(p_net));
    }
  }
  return total * inv;
}

NoiseNetModel noise_net_fit(const NoiseNetConfig& config, const Dataset& train, RngStream& rng) {
  require_regression(train, "noise_net");
  NoiseNetModel m;
  m.config = config;
  m.inputs = train.dim();
  if (config.standardize) {
    m.x_transform = Standardizer::fit(train.features);
    if (train.size() >= 2) std::tie(m.y_mean, m.y_scale) = target_stats(train.target);
  }
  const Matrix x = maybe_apply(m.x_transform, train.features);
  Vector y(train.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (train.target[i] - m.y_mean) / m.y_scale;

  const NoiseNetObjective objective(config, x, y);
  const MlpShape shape = config.shape(train.dim());
  Vector init = mlp_init(shape, rng);
  if (config.noise_model == NoiseModel::Homoscedastic) init.push_back(inverse_softplus(1.0 - kSigmaFloor));
  const Objective step = [&](std::span<const double> p, std::span<double> g, const StepContext& ctx) {
    return objective(p, g, ctx.batch);
  };
  MinimizeResult res = minimize(step, std::move(init), config.optimizer, rng, train.size());
  m.params = std::move(res.params);
  Vector scratch(m.params.size());
  m.final_objective = objective(m.params, scratch);
  return m;
}

RegressionPrediction NoiseNetModel::predict(const Matrix& features) const {
  const Matrix x = maybe_apply(x_transform, features);
  const MlpShape shape = config.shape(inputs);
  const double z = central_z(config.interval_mass);
  MlpPass pass(shape);
  const auto net = std::span<const double>(params).first(shape.num_params());
  RegressionPrediction out;
  const std::size_t n = x.rows();
  out.y_hat.resize(n);
  out.y_lower.resize(n);
  out.y_upper.resize(n);
  out.y_std = Vector(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = pass.forward(net, x.row(i));
    const double raw = config.noise_model == NoiseModel::Homoscedastic ? params.back() : o[1];
    const double sd = y_scale * (softplus(raw) + kSigmaFloor);
    out.y_hat[i] = y_mean + y_scale * o[0];
    (*out.y_std)[i] = sd;
    out.y_lower[i] = out.y_hat[i] - z * sd;
    out.y_upper[i] = out.y_hat[i] + z * sd;
  }
  return out;
}

double NoiseNetModel::shared_sigma() const {
  require(config.noise_model == NoiseModel::Homoscedastic, ErrorKind::ConfigError,
          "shared sigma is only defined for the homoscedastic model");
  return y_scale * (softplus(params.back()) + kSigmaFloor);
}

Json NoiseNetModel::to_json() const {
  return Json{{"params", params},         {"x_transform", optional_standardizer(x_transform)},
              {"y_mean", y_mean},         {"y_scale", y_scale},
              {"inputs", inputs},         {"final_objective", final_objective}};
}

NoiseNetModel NoiseNetModel::from_json(const Json& config, const Json& state) {
  NoiseNetModel m;
  m.config = NoiseNetConfig::from_json(config);
  m.params = vector_from_json(state.at("params"));
  m.x_transform = standardizer_from(state.at("x_transform"));
  m.y_mean = state.at("y_mean").get<double>();
  m.y_scale = state.at("y_scale").get<double>();
  m.inputs = state.at("inputs").get<std::size_t>();
  m.final_objective = state.at("final_objective").get<double>();
  const std::size_t expected =
      m.config.shape(m.inputs).num_params() + (m.config.noise_model == NoiseModel::Homoscedastic ? 1 : 0);
  require(m.params.size() == expected, ErrorKind::CorruptPayload, "noise_net parameter count mismatch");
  return m;
}

// ---------------------------------------------------------------------------
// Variational BNN

double gaussian_kl(double mu, double s, double prior_std) {
  const double r = s / prior_std;
  return std::log(prior_std / s) + 0.5 * (r * r + (mu * mu) / (prior_std * prior_std)) - 0.5;
}

BnnConfig::BnnConfig() {
  optimizer.learning_rate = 0.01;
  optimizer.max_iters = 2000;
}

namespace {

std::string likelihood_name(BnnLikelihood l) {
  switch (l) {
    case BnnLikelihood::Auto: return "auto";
    case BnnLikelihood::GaussianRegression: return "gaussian";
    case BnnLikelihood::Categorical: return "categorical";
  }
  return "auto";
}

BnnLikelihood parse_likelihood(const std::string& s) {
  if (s == "auto") return BnnLikelihood::Auto;
  if (s == "gaussian") return BnnLikelihood::GaussianRegression;
  if (s == "categorical") return BnnLikelihood::Categorical;
  fail(ErrorKind::ConfigError, "bnn: unknown likelihood '" + s + "'");
}

}  // namespace

BnnConfig BnnConfig::from_json(const Json& params) {
  ConfigReader r(params, "bnn");
  BnnConfig c;
  c.hidden_sizes = uq::hidden_sizes(r, c.hidden_sizes, true);
  c.activation = parse_activation(r.text("activation", "tanh"));
  c.prior_std = r.real("prior_std", c.prior_std);
  c.mc_train_samples = r.count("mc_train_samples", c.mc_train_samples);
  c.mc_predict_samples = r.count("mc_predict_samples", c.mc_predict_samples);
  c.optimizer = optimizer_from_json(r.raw("optimizer"), c.optimizer);
  c.likelihood = parse_likelihood(r.text("likelihood", "auto"));
  if (const Json* ns = r.raw("noise_std"); ns != nullptr && !(ns->is_string() && ns->get<std::string>() == "learned")) {
    require(ns->is_number() && ns->get<double>() > 0.0, ErrorKind::ConfigError,
            "bnn: 'noise_std' must be a positive number or \"learned\"");
    c.noise_std = ns->get<double>();
  }
  c.interval_mass = unit_interval(r, "interval_mass", c.interval_mass);
  c.standardize = r.flag("standardize", c.standardize);
  c.bias = r.flag("bias", c.bias);
  r.finish();
  require(c.prior_std > 0.0, ErrorKind::ConfigError, "bnn: 'prior_std' must be positive");
  require(c.mc_train_samples >= 1, ErrorKind::ConfigError, "bnn: 'mc_train_samples' must be >= 1");
  require(c.mc_predict_samples >= 2, ErrorKind::ConfigError, "bnn: 'mc_predict_samples' must be >= 2");
  return c;
}

Json BnnConfig::to_json() const {
  return Json{{"hidden_sizes", hidden_sizes},
              {"activation", activation_name(activation)},
              {"prior_std", prior_std},
              {"mc_train_samples", mc_train_samples},
              {"mc_predict_samples", mc_predict_samples},
              {"optimizer", optimizer_to_json(optimizer)},
              {"likelihood", likelihood_name(likelihood)},
              {"noise_std", noise_std ? Json(*noise_std) : Json("learned")},
              {"interval_mass", interval_mass},
              {"standardize", standardize},
              {"bias", bias}};
}

BnnObjective::BnnObjective(const BnnConfig& config, BnnLikelihood likelihood, MlpShape shape, const Matrix& x,
                           std::span<const double> y, double fixed_noise)
    : prior_std_(config.prior_std),
      likelihood_(likelihood),
      shape_(std::move(shape)),
      x_(x),
      y_(y),
      learn_noise_(likelihood == BnnLikelihood::GaussianRegression && !config.noise_std),
      fixed_noise_(fixed_noise) {}

double BnnObjective::kl(std::span<const double> params) const {
  const std::size_t P = num_weights();
  double total = 0.0;
  for (std::size_t j = 0; j < P; ++j) total += gaussian_kl(params[j], softplus(params[P + j]), prior_std_);
  return total;
}

double BnnObjective::operator()(std::span<const double> params, std::span<double> grad, const Matrix& eps,
                                std::span<const std::size_t> batch) const {
  const std::size_t P = num_weights();
  const std::size_t M = eps.rows();
  require(eps.cols() == P && M >= 1, ErrorKind::DimensionMismatch, "bnn: noise draws have the wrong shape");
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto mu = params.first(P);
  const auto rho = params.subspan(P, P);
  const std::size_t count = batch.empty() ? x_.rows() : batch.size();
  const double data_scale = static_cast<double>(x_.rows()) / static_cast<double>(count);
  const double inv_m = 1.0 / static_cast<double>(M);

  double noise_raw = 0.0, sigma = fixed_noise_;
  if (learn_noise_) {
    noise_raw = params[2 * P];
    sigma = softplus(noise_raw) + kSigmaFloor;
  }

  Vector w(P), gw(P), scale(P);
  for (std::size_t j = 0; j < P; ++j) scale[j] = softplus(rho[j]);
  MlpPass pass(shape_);
  Vector d_out(shape_.outputs);
  double data_term = 0.0;
  double d_sigma_total = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const auto e = eps.row(m);
    for (std::size_t j = 0; j < P; ++j) w[j] = mu[j] + scale[j] * e[j];
    std::fill(gw.begin(), gw.end(), 0.0);
    double sample_nll = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = batch.empty() ? k : batch[k];
      const auto out = pass.forward(w, x_.row(i));
      if (likelihood_ == BnnLikelihood::GaussianRegression) {
        const double r = y_[i] - out[0];
        sample_nll += gaussian_nll(y_[i], out[0], sigma);
        d_out[0] = -r / (sigma * sigma);
        d_sigma_total += (1.0 / sigma - r * r / (sigma * sigma * sigma)) * data_scale * inv_m;
      } else {
        const double zmax = *std::max_element(out.begin(), out.end());
        double z = 0.0;
        for (double o : out) z += std::exp(o - zmax);
        const double lse = zmax + std::log(z);
        const std::size_t label = static_cast<std::size_t>(y_[i]);
        sample_nll += lse - out[label];
        for (std::size_t c = 0; c < shape_.outputs; ++c)
          d_out[c] = std::exp(out[c] - lse) - (c == label ? 1.0 : 0.0);
      }
      pass.backward(w, d_out, gw);
    }
    data_term += sample_nll * data_scale * inv_m;
    const double f = data_scale * inv_m;
    for (std::size_t j = 0; j < P; ++j) {
      grad[j] += gw[j] * f;
      grad[P + j] += gw[j] * e[j] * sigmoid(rho[j]) * f;
    }
  }
  if (learn_noise_) grad[2 * P] = d_sigma_total * sigmoid(noise_raw);

  double kl_term = 0.0;
  const double pv = prior_std_ * prior_std_;
  for (std::size_t j = 0; j < P; ++j) {
    const double s = scale[j];
    kl_term += gaussian_kl(mu[j], s, prior_std_);
    grad[j] += mu[j] / pv;
    grad[P + j] += (-1.0 / s + s / pv) * sigmoid(rho[j]);
  }
  return data_term + kl_term;
}

namespace {

BnnLikelihood resolve_likelihood(BnnLikelihood l, const Task& task) {
  if (l == BnnLikelihood::Auto)
    return task.is_regression() ? BnnLikelihood::GaussianRegression : BnnLikelihood::Categorical;
  require((l == BnnLikelihood::GaussianRegression) == task.is_regression(), ErrorKind::TaskMismatch,
          "bnn: likelihood does not match the dataset task");
  return l;
}

}  // namespace

BnnModel bnn_fit(const BnnConfig& config, const Dataset& train, RngStream& rng) {
  BnnModel m;
  m.config = config;
  m.likelihood = resolve_likelihood(config.likelihood, train.task);
  const bool regression = m.likelihood == BnnLikelihood::GaussianRegression;
  m.shape = {train.dim(), config.hidden_sizes, regression ? 1 : train.task.n_classes, config.activation, config.bias};
  if (config.standardize) {
    m.x_transform = Standardizer::fit(train.features);
    if (regression && train.size() >= 2) std::tie(m.y_mean, m.y_scale) = target_stats(train.target);
  }
  const Matrix x = maybe_apply(m.x_transform, train.features);
  Vector y(train.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = regression ? (train.target[i] - m.y_mean) / m.y_scale : train.target[i];

  const double fixed_noise = config.noise_std ? *config.noise_std / m.y_scale : 1.0;
  const BnnObjective objective(config, m.likelihood, m.shape, x, y, fixed_noise);
  const std::size_t P = objective.num_weights();

  Vector init = mlp_init(m.shape, rng);
  init.resize(2 * P, inverse_softplus(0.05 * config.prior_std));
  if (objective.learns_noise()) init.push_back(inverse_softplus(1.0 - kSigmaFloor));

  Matrix eps(config.mc_train_samples, P);
  const Objective step = [&](std::span<const double> p, std::span<double> g, const StepContext& ctx) {
    for (double& e : eps.data()) e = ctx.rng->normal();
    return objective(p, g, eps, ctx.batch);
  };
  MinimizeResult res = minimize(step, std::move(init), config.optimizer, rng, train.size());
  m.mu.assign(res.params.begin(), res.params.begin() + static_cast<std::ptrdiff_t>(P));
  m.rho.assign(res.params.begin() + static_cast<std::ptrdiff_t>(P), res.params.begin() + static_cast<std::ptrdiff_t>(2 * P));
  m.noise_sigma = objective.learns_noise() ? softplus(res.params[2 * P]) + kSigmaFloor : fixed_noise;
  m.trace = std::move(res.trace);
  m.predict_seed = rng.next_u64();
  return m;
}

Prediction BnnModel::predict(const Matrix& features) const {
  RngStream rng(predict_seed);
  return predict(features, rng);
}

Prediction BnnModel::predict(const Matrix& features, RngStream& rng) const {
  require(features.cols() == shape.inputs, ErrorKind::DimensionMismatch, "bnn: feature width mismatch");
  const Matrix x = maybe_apply(x_transform, features);
  const std::size_t n = x.rows(), S = config.mc_predict_samples, P = mu.size();
  Vector w(P), scale(P);
  for (std::size_t j = 0; j < P; ++j) scale[j] = softplus(rho[j]);
  MlpPass pass(shape);

  if (likelihood == BnnLikelihood::GaussianRegression) {
    Matrix draws(n, S);
    Vector mean_sum(n, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t j = 0; j < P; ++j) w[j] = mu[j] + scale[j] * rng.normal();
      for (std::size_t i = 0; i < n; ++i) {
        const double f = pass.forward(w, x.row(i))[0];
        mean_sum[i] += f;
        draws(i, s) = y_mean + y_scale * (f + noise_sigma * rng.normal());
      }
    }
    RegressionPrediction out;
    out.y_hat.resize(n);
    out.y_lower.resize(n);
    out.y_upper.resize(n);
    out.y_std = Vector(n);
    const double lo = 0.5 * (1.0 - config.interval_mass), hi = 0.5 * (1.0 + config.interval_mass);
    for (std::size_t i = 0; i < n; ++i) {
      out.y_hat[i] = y_mean + y_scale * mean_sum[i] / static_cast<double>(S);
      Vector row(draws.row(i).begin(), draws.row(i).end());
      std::sort(row.begin(), row.end());
      out.y_lower[i] = sorted_quantile(row, lo);
      out.y_upper[i] = sorted_quantile(row, hi);
      (*out.y_std)[i] = stddev(row);
    }
    clamp_point_inside(out);
    out.samples = std::move(draws);
    return out;
  }

  const std::size_t k = shape.outputs;
  Matrix probs(n, k, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < P; ++j) w[j] = mu[j] + scale[j] * rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      const auto out = pass.forward(w, x.row(i));
      const double zmax = *std::max_element(out.begin(), out.end());
      double z = 0.0;
      for (double o : out) z += std::exp(o - zmax);
      for (std::size_t c = 0; c < k; ++c) probs(i, c) += std::exp(out[c] - zmax) / z;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += probs(i, c);
    for (std::size_t c = 0; c < k; ++c) probs(i, c) /= total;
  }
  return ClassificationPrediction::from_probs(std::move(probs));
}

Json BnnModel::to_json() const {
  return Json{{"likelihood", likelihood_name(likelihood)},
              {"shape", mlp_shape_to_json(shape)},
              {"mu", mu},
              {"rho", rho},
              {"noise_sigma", noise_sigma},
              {"x_transform", optional_standardizer(x_transform)},
              {"y_mean", y_mean},
              {"y_scale", y_scale},
              {"predict_seed", predict_seed},
              {"iterations", trace.size()},
              {"final_objective", trace.empty() ? 0.0 : trace.back()}};
}

BnnModel BnnModel::from_json(const Json& config, const Json& state) {
  BnnModel m;
  m.config = BnnConfig::from_json(config);
  m.likelihood = parse_likelihood(state.at("likelihood").get<std::string>());
  m.shape = mlp_shape_from_json(state.at("shape"));
  m.mu = vector_from_json(state.at("mu"));
  m.rho = vector_from_json(state.at("rho"));
  require(m.mu.size() == m.shape.num_params() && m.rho.size() == m.mu.size(), ErrorKind::CorruptPayload,
          "bnn parameter count mismatch");
  m.noise_sigma = state.at("noise_sigma").get<double>();
  m.x_transform = standardizer_from(state.at("x_transform"));
  m.y_mean = state.at("y_mean").get<double>();
  m.y_scale = state.at("y_scale").get<double>();
  m.predict_seed = state.at("predict_seed").get<std::uint64_t>();
  return m;
}

Prediction bnn_predict(const BnnModel& model, const Matrix& features, RngStream& rng) {
  return model.predict(features, rng);
}

// ---------------------------------------------------------------------------
// Infinitesimal jackknife

namespace {

std::string glm_name(Glm g) {
  switch (g) {
    case Glm::Auto: return "auto";
    case Glm::Linear: return "linear";
    case Glm::Logistic: return "logistic";
  }
  return "auto";
}

Glm parse_glm(const std::string& s) {
  if (s == "auto") return Glm::Auto;
  if (s == "linear") return Glm::Linear;
  if (s == "logistic") return Glm::Logistic;
  fail(ErrorKind::ConfigError, "infinitesimal_jackknife: unknown glm '" + s + "'");
}

Glm resolve_glm(Glm g, const Task& task) {
  if (g == Glm::Auto) g = task.is_regression() ? Glm::Linear : Glm::Logistic;
  if (g == Glm::Linear)
    require(task.is_regression(), ErrorKind::TaskMismatch, "linear IJ needs a regression task");
  else
    require(task.is_classification() && task.n_classes == 2, ErrorKind::TaskMismatch,
            "logistic IJ needs a binary classification task");
  return g;
}

Cholesky factor_hessian(const Matrix& h) {
  try {
    return Cholesky(h, false, 1e-12);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
    fail(ErrorKind::SingularHessian, "GLM Hessian is singular (increase ridge or remove collinear features)");
  }
}

double penalized_loglik(const Matrix& x, std::span<const double> y, std::span<const double> theta, double ridge) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = dot(x.row(i), theta);
    // log sigmoid(z) when y = 1, log sigmoid(-z) when y = 0
    const double s = y[i] == 1.0 ? z : -z;
    ll += s >= 0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s));
  }
  for (std::size_t j = 1; j < theta.size(); ++j) ll -= 0.5 * ridge * theta[j] * theta[j];
  return ll;
}

}  // namespace

IjConfig IjConfig::from_json(const Json& params) {
  ConfigReader r(params, "infinitesimal_jackknife");
  IjConfig c;
  c.glm = parse_glm(r.text("glm", "auto"));
  if (const Json* ridge = r.raw("ridge"); ridge != nullptr && !(ridge->is_string() && ridge->get<std::string>() == "auto")) {
    require(ridge->is_number() && ridge->get<double>() >= 0.0, ErrorKind::ConfigError,
            "infinitesimal_jackknife: 'ridge' must be a non-negative number or \"auto\"");
    c.ridge = ridge->get<double>();
  }
  c.n_replicates = r.count("n_replicates", c.n_replicates);
  c.interval_mass = unit_interval(r, "interval_mass", c.interval_mass);
  r.finish();
  require(c.n_replicates >= 10, ErrorKind::ConfigError, "infinitesimal_jackknife: 'n_replicates' must be >= 10");
  require(!(c.glm == Glm::Logistic && c.ridge && *c.ridge <= 0.0), ErrorKind::ConfigError,
          "infinitesimal_jackknife: logistic GLM needs ridge > 0");
  return c;
}

Json IjConfig::to_json() const {
  return Json{{"glm", glm_name(glm)},
              {"ridge", ridge ? Json(*ridge) : Json("auto")},
              {"n_replicates", n_replicates},
              {"interval_mass", interval_mass}};
}

Matrix glm_design(const Matrix& features) {
  Matrix x(features.rows(), features.cols() + 1);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    x(i, 0) = 1.0;
    for (std::size_t c = 0; c < features.cols(); ++c) x(i, c + 1) = features(i, c);
  }
  return x;
}

IjLinearization ij_linearize(const IjConfig& config, const Dataset& train) {
  IjLinearization lin;
  lin.glm = resolve_glm(config.glm, train.task);
  const std::size_t n = train.size();
  require(n >= 2, ErrorKind::DegenerateData, "infinitesimal_jackknife needs at least two rows");
  lin.ridge = config.ridge.value_or(lin.glm == Glm::Logistic ? 1e-3 * static_cast<double>(n) : 0.0);
  require(lin.glm == Glm::Linear || lin.ridge > 0.0, ErrorKind::ConfigError,
          "infinitesimal_jackknife: logistic GLM needs ridge > 0");
  const Matrix x = glm_design(train.features);
  const std::size_t p = x.cols();
  const auto& y = train.target;

  auto hessian_at = [&](std::span<const double> theta) {
    Matrix h(p, p);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      double w = 1.0;
      if (lin.glm == Glm::Logistic) {
        const double pr = sigmoid(dot(xi, theta));
        w = pr * (1.0 - pr);
      }
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) h(a, b) += w * xi[a] * xi[b];
    }
    for (std::size_t j = 1; j < p; ++j) h(j, j) += lin.ridge;
    return h;
  };

  if (lin.glm == Glm::Linear) {
    lin.hessian = hessian_at(Vector(p, 0.0));
    Vector xty(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < p; ++a) xty[a] += x(i, a) * y[i];
    lin.theta_hat = factor_hessian(lin.hessian).solve(xty);
  } else {
    bool has0 = false, has1 = false;
    for (double v : y) (v == 1.0 ? has1 : has0) = true;
    require(has0 && has1, ErrorKind::DegenerateData, "logistic IJ needs both classes in the training data");
    Vector theta(p, 0.0);
    double ll = penalized_loglik(x, y, theta, lin.ridge);
    for (int it = 0; it < 100; ++it) {
      Vector grad(p, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - sigmoid(dot(x.row(i), theta));
        for (std::size_t a = 0; a < p; ++a) grad[a] += r * x(i, a);
      }
      for (std::size_t j = 1; j < p; ++j) grad[j] -= lin.ridge * theta[j];
      const Vector step = factor_hessian(hessian_at(theta)).solve(grad);
      double t = 1.0;
      Vector candidate(p);
      double cand_ll = ll;
      for (int half = 0; half < 40; ++half, t *= 0.5) {
        for (std::size_t a = 0; a < p; ++a) candidate[a] = theta[a] + t * step[a];
        cand_ll = penalized_loglik(x, y, candidate, lin.ridge);
        if (cand_ll >= ll) break;
      }
      theta = candidate;
      ll = cand_ll;
      if (norm_inf(step) * t < 1e-10) break;
    }
    lin.theta_hat = theta;
    lin.hessian = hessian_at(theta);
  }

  lin.gradients = Matrix(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const double fitted = dot(x.row(i), lin.theta_hat);
    const double r = lin.glm == Glm::Linear ? y[i] - fitted : y[i] - sigmoid(fitted);
    for (std::size_t a = 0; a < p; ++a) lin.gradients(i, a) = r * x(i, a);
  }
  return lin;
}

std::vector<Vector> IjLinearization::replicates(const std::vector<Vector>& weight_sets) const {
  const Cholesky chol = factor_hessian(hessian);
  const std::size_t n = gradients.rows(), p = gradients.cols();
  std::vector<Vector> out;
  out.reserve(weight_sets.size());
  Vector rhs(p);
  for (const auto& w : weight_sets) {
    require(w.size() == n, ErrorKind::DimensionMismatch, "IJ weights must have one entry per training row");
    std::fill(rhs.begin(), rhs.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double dw = w[i] - 1.0;
      if (dw == 0.0) continue;
      for (std::size_t a = 0; a < p; ++a) rhs[a] += dw * gradients(i, a);
    }
    Vector theta = chol.solve(rhs);
    for (std::size_t a = 0; a < p; ++a) theta[a] += theta_hat[a];
    out.push_back(std::move(theta));
  }
  return out;
}

Vector IjLinearization::replicate(std::span<const double> weights) const {
  return replicates({Vector(weights.begin(), weights.end())}).front();
}

Vector bootstrap_counts(std::size_t n, RngStream& rng) {
  Vector counts(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) counts[rng.uniform_index(n)] += 1.0;
  return counts;
}

IjModel ij_fit(const IjConfig& config, const Dataset& train, RngStream& rng) {
  const IjLinearization lin = ij_linearize(config, train);
  std::vector<Vector> weights;
  weights.reserve(config.n_replicates);
  for (std::size_t b = 0; b < config.n_replicates; ++b) weights.push_back(bootstrap_counts(train.size(), rng));
  const auto reps = lin.replicates(weights);
  IjModel m;
  m.config = config;
  m.glm = lin.glm;
  m.theta_hat = lin.theta_hat;
  m.replicates = Matrix(reps.size(), lin.theta_hat.size());
  for (std::size_t b = 0; b < reps.size(); ++b) std::copy(reps[b].begin(), reps[b].end(), m.replicates.row(b).begin());
  return m;
}

Prediction IjModel::predict(const Matrix& features) const {
  require(features.cols() + 1 == theta_hat.size(), ErrorKind::DimensionMismatch, "IJ: feature width mismatch");
  const Matrix x = glm_design(features);
  const std::size_t n = x.rows(), B = replicates.rows();
  Vector values(B);
  if (glm == Glm::Linear) {
    RegressionPrediction out;
    out.y_hat.resize(n);
    out.y_lower.resize(n);
    out.y_upper.resize(n);
    out.y_std = Vector(n);
    const double lo = 0.5 * (1.0 - config.interval_mass), hi = 0.5 * (1.0 + config.interval_mass);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t b = 0; b < B; ++b) values[b] = dot(x.row(i), replicates.row(b));
      out.y_hat[i] = mean(values);
      (*out.y_std)[i] = stddev(values);
      std::sort(values.begin(), values.end());
      out.y_lower[i] = sorted_quantile(values, lo);
      out.y_upper[i] = sorted_quantile(values, hi);
    }
    clamp_point_inside(out);
    return out;
  }
  Matrix probs(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) total += sigmoid(dot(x.row(i), replicates.row(b)));
    const double p1 = total / static_cast<double>(B);
    probs(i, 1) = p1;
    probs(i, 0) = 1.0 - p1;
  }
  return ClassificationPrediction::from_probs(std::move(probs));
}

Json IjModel::to_json() const {
  return Json{{"glm", glm_name(glm)}, {"theta_hat", theta_hat}, {"replicates", uq::to_json(replicates)}};
}

IjModel IjModel::from_json(const Json& config, const Json& state) {
  IjModel m;
  m.config = IjConfig::from_json(config);
  m.glm = parse_glm(state.at("glm").get<std::string>());
  m.theta_hat = vector_from_json(state.at("theta_hat"));
  m.replicates = matrix_from_json(state.at("replicates"));
  require(m.replicates.cols() == m.theta_hat.size() && m.replicates.rows() >= 1, ErrorKind::CorruptPayload,
          "IJ replicate shape mismatch");
  return m;
}

Prediction ij_fit_predict(const IjConfig& config, const Dataset& train, const Matrix& test_features, RngStream& rng) {
  require(test_features.cols() == train.dim(), ErrorKind::DimensionMismatch, "test width does not match training");
  return ij_fit(config, train, rng).predict(test_features);
}

// ---------------------------------------------------------------------------
// Registry

std::vector<AlgorithmInfo> intrinsic_algorithms() {
  std::vector<AlgorithmInfo> out;
  auto regression_only = [](const Task& t) { return t.is_regression(); };

  out.push_back({"gp_regression", regression_only,
                 [](const Json& p) { return GpConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream&) { return gp_fit(GpConfig::from_json(c), d).to_json(); },
                 [](const Json& c, const Json& s, const Matrix& x) -> Prediction {
                   return GpModel::from_json(c, s).predict(x);
                 }});
  out.push_back({"quantile_regression", regression_only,
                 [](const Json& p) { return QuantileBoostConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream&) {
                   return quantile_boost_fit(QuantileBoostConfig::from_json(c), d).to_json();
                 },
                 [](const Json& c, const Json& s, const Matrix& x) -> Prediction {
                   return QuantileBoostModel::from_json(c, s).predict(x);
                 }});
  out.push_back({"noise_net", regression_only,
                 [](const Json& p) { return NoiseNetConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream& rng) {
                   return noise_net_fit(NoiseNetConfig::from_json(c), d, rng).to_json();
                 },
                 [](const Json& c, const Json& s, const Matrix& x) -> Prediction {
                   return NoiseNetModel::from_json(c, s).predict(x);
                 }});
  out.push_back({"bnn", [](const Task&) { return true; },
                 [](const Json& p) { return BnnConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream& rng) {
                   return bnn_fit(BnnConfig::from_json(c), d, rng).to_json();
                 },
                 [](const Json& c, const Json& s, const Matrix& x) { return BnnModel::from_json(c, s).predict(x); }});
  out.push_back({"infinitesimal_jackknife",
                 [](const Task& t) { return t.is_regression() || t.n_classes == 2; },
                 [](const Json& p) { return IjConfig::from_json(p).to_json(); },
                 [](const Json& c, const Dataset& d, RngStream& rng) {
                   return ij_fit(IjConfig::from_json(c), d, rng).to_json();
                 },
                 [](const Json& c, const Json& s, const Matrix& x) { return IjModel::from_json(c, s).predict(x); }});
  return out;
}

}  // namespace uq
