#pragma once

#include <optional>
#include <vector>

#include "uqkit/boosting.hpp"
#include "uqkit/core.hpp"
#include "uqkit/mlp.hpp"

namespace uq {

std::vector<AlgorithmInfo> intrinsic_algorithms();

// ---------------------------------------------------------------------------
// Exact Gaussian process regression with an RBF kernel.

double rbf_kernel(std::span<const double> a, std::span<const double> b, double signal_variance,
                  double lengthscale);

struct GpConfig {
  // nullopt selects the value by maximum marginal likelihood over the grid.
  std::optional<double> signal_variance;
  std::optional<double> lengthscale;
  std::optional<double> noise_variance;
  // Candidate multipliers; variances are relative to the target variance,
  // the lengthscale to the (standardized) feature scale.
  Vector signal_grid;
  Vector lengthscale_grid;
  Vector noise_grid;
  double interval_mass = 0.95;
  bool standardize = true;
  bool normalize_target = true;

  GpConfig();
  static GpConfig from_json(const Json& params);
  Json to_json() const;
};

// -1/2 y^T (K + s I)^-1 y - 1/2 log|K + s I| - n/2 log 2 pi
double gp_log_marginal_likelihood(const Matrix& x, std::span<const double> y, double signal_variance,
                                  double lengthscale, double noise_variance);

struct GpModel {
  GpConfig config;
  double signal_variance = 1.0;
  double lengthscale = 1.0;
  double noise_variance = 1.0;
  double log_marginal_likelihood = 0.0;
  std::optional<Standardizer> x_transform;
  double y_mean = 0.0;
  double y_scale = 1.0;
  Matrix train_x;  // transformed
  Vector train_y;  // transformed
  Vector alpha;    // (K + s I)^-1 y

  RegressionPrediction predict(const Matrix& features) const;
  Json to_json() const;
  static GpModel from_json(const Json& config, const Json& state);
};

GpModel gp_fit(const GpConfig& config, const Dataset& train);
RegressionPrediction gp_fit_predict(const GpConfig& config, const Dataset& train, const Matrix& test_features);

// ---------------------------------------------------------------------------
// Gradient-boosted quantile regression: lower, median and upper ensembles.

struct QuantileBoostConfig {
  double alpha = 0.95;
  std::size_t n_estimators = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;

  static QuantileBoostConfig from_json(const Json& params);
  Json to_json() const;
  BoostParams boost_params() const;
};

struct QuantileBoostModel {
  QuantileBoostConfig config;
  BoostedEnsemble lower;
  BoostedEnsemble median;
  BoostedEnsemble upper;

  // Sorts the three quantiles per row so crossing ensembles still give
  // lower <= median <= upper.
  RegressionPrediction predict(const Matrix& features) const;
  Json to_json() const;
  static QuantileBoostModel from_json(const Json& config, const Json& state);
};

QuantileBoostModel quantile_boost_fit(const QuantileBoostConfig& config, const Dataset& train);

// ---------------------------------------------------------------------------
// Gaussian-likelihood networks with a shared (homoscedastic) or input
// dependent (heteroscedastic) noise scale.

enum class NoiseModel { Homoscedastic, Heteroscedastic };

// 1/2 log(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2)
double gaussian_nll(double y, double mu, double sigma);

inline constexpr double kSigmaFloor = 1e-4;

struct NoiseNetConfig {
  std::vector<std::size_t> hidden_sizes{32};
  Activation activation = Activation::Tanh;
  NoiseModel noise_model = NoiseModel::Homoscedastic;
  OptimizerConfig optimizer;
  double interval_mass = 0.95;
  bool standardize = true;

  NoiseNetConfig();
  static NoiseNetConfig from_json(const Json& params);
  Json to_json() const;
  MlpShape shape(std::size_t inputs) const;
};

// Mean Gaussian NLL over (a batch of) the training rows. The parameter vector
// is the network followed, for the homoscedastic model, by the raw scale c
// with sigma = softplus(c) + 1e-4.
class NoiseNetObjective {
 public:
  NoiseNetObjective(const NoiseNetConfig& config, const Matrix& x, std::span<const double> y);

  std::size_t num_params() const;
  double operator()(std::span<const double> params, std::span<double> grad,
                    std::span<const std::size_t> batch = {}) const;
  // (mu, sigma) for one input row.
  std::pair<double, double> evaluate(std::span<const double> params, std::span<const double> row) const;

 private:
  NoiseModel noise_model_;
  MlpShape shape_;
  const Matrix& x_;
  std::span<const double> y_;
};

struct NoiseNetModel {
  NoiseNetConfig config;
  Vector params;
  std::optional<Standardizer> x_transform;
  double y_mean = 0.0;
  double y_scale = 1.0;
  std::size_t inputs = 0;
  double final_objective = 0.0;

  RegressionPrediction predict(const Matrix& features) const;
  // Homoscedastic noise scale in target units.
  double shared_sigma() const;
  Json to_json() const;
  static NoiseNetModel from_json(const Json& config, const Json& state);
};

NoiseNetModel noise_net_fit(const NoiseNetConfig& config, const Dataset& train, RngStream& rng);

// ---------------------------------------------------------------------------
// Mean-field variational Bayesian neural network.

enum class BnnLikelihood { Auto, GaussianRegression, Categorical };

// KL(N(mu, s^2) || N(0, prior_std^2)) for one coordinate.
double gaussian_kl(double mu, double s, double prior_std);

struct BnnConfig {
  std::vector<std::size_t> hidden_sizes{32};
  Activation activation = Activation::Tanh;
  double prior_std = 1.0;
  std::size_t mc_train_samples = 4;
  std::size_t mc_predict_samples = 100;
  OptimizerConfig optimizer;
  BnnLikelihood likelihood = BnnLikelihood::Auto;
  // Fixed observation noise in target units; nullopt learns it.
  std::optional<double> noise_std;
  double interval_mass = 0.95;
  bool standardize = true;
  bool bias = true;

  BnnConfig();
  static BnnConfig from_json(const Json& params);
  Json to_json() const;
};

// Negative ELBO with the reparameterisation w = mu + softplus(rho) * eps.
// Parameter layout: mu (P), rho (P), then the raw noise scale when the noise
// is learned. `eps` holds M rows of P standard normal draws that are reused
// for every data row (common random numbers).
class BnnObjective {
 public:
  BnnObjective(const BnnConfig& config, BnnLikelihood likelihood, MlpShape shape, const Matrix& x,
               std::span<const double> y, double fixed_noise);

  std::size_t num_weights() const { return shape_.num_params(); }
  std::size_t num_params() const { return 2 * num_weights() + (learn_noise_ ? 1 : 0); }
  bool learns_noise() const { return learn_noise_; }
  double operator()(std::span<const double> params, std::span<double> grad, const Matrix& eps,
                    std::span<const std::size_t> batch = {}) const;
  double kl(std::span<const double> params) const;

 private:
  double prior_std_;
  BnnLikelihood likelihood_;
  MlpShape shape_;
  const Matrix& x_;
  std::span<const double> y_;
  bool learn_noise_;
  double fixed_noise_;
};

struct BnnModel {
  BnnConfig config;
  BnnLikelihood likelihood = BnnLikelihood::GaussianRegression;
  MlpShape shape;
  Vector mu;
  Vector rho;
  double noise_sigma = 1.0;  // transformed-target units
  std::optional<Standardizer> x_transform;
  double y_mean = 0.0;
  double y_scale = 1.0;
  std::uint64_t predict_seed = 0;
  Vector trace;

  Prediction predict(const Matrix& features) const;
  Prediction predict(const Matrix& features, RngStream& rng) const;
  Json to_json() const;
  static BnnModel from_json(const Json& config, const Json& state);
};

BnnModel bnn_fit(const BnnConfig& config, const Dataset& train, RngStream& rng);
Prediction bnn_predict(const BnnModel& model, const Matrix& features, RngStream& rng);

// ---------------------------------------------------------------------------
// Infinitesimal jackknife around a single GLM fit.

enum class Glm { Auto, Linear, Logistic };

struct IjConfig {
  Glm glm = Glm::Auto;
  // nullopt: 0 for Linear, 1e-3 * n for Logistic.
  std::optional<double> ridge;
  std::size_t n_replicates = 200;
  double interval_mass = 0.95;

  static IjConfig from_json(const Json& params);
  Json to_json() const;
};

// Design rows are [1, x]; the intercept is not penalised.
Matrix glm_design(const Matrix& features);

// Unperturbed fit plus the pieces of the first-order expansion
// theta(w) = theta_hat + H^-1 sum_i (w_i - 1) g_i, with g_i the per-example
// log-likelihood gradient and H the negative Hessian of the penalised
// log-likelihood at theta_hat.
struct IjLinearization {
  Glm glm = Glm::Linear;
  double ridge = 0.0;
  Vector theta_hat;
  Matrix gradients;  // n x p
  Matrix hessian;    // p x p

  // Replicate for per-example weights whose unperturbed value is 1.
  Vector replicate(std::span<const double> weights) const;
  std::vector<Vector> replicates(const std::vector<Vector>& weight_sets) const;
};

IjLinearization ij_linearize(const IjConfig& config, const Dataset& train);

struct IjModel {
  IjConfig config;
  Glm glm = Glm::Linear;
  Vector theta_hat;
  Matrix replicates;  // B x p

  Prediction predict(const Matrix& features) const;
  Json to_json() const;
  static IjModel from_json(const Json& config, const Json& state);
};

// Multinomial bootstrap counts (n draws over n rows); they average to 1.
Vector bootstrap_counts(std::size_t n, RngStream& rng);

IjModel ij_fit(const IjConfig& config, const Dataset& train, RngStream& rng);
Prediction ij_fit_predict(const IjConfig& config, const Dataset& train, const Matrix& test_features, RngStream& rng);

}  // namespace uq
