#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "uqkit/boosting.hpp"
#include "uqkit/core.hpp"

namespace uq {

std::vector<AlgorithmInfo> extrinsic_algorithms();

// Black-box base model. `payload` is set when the model was trained here (or
// wraps a registry estimator) and can therefore be saved; a handle built from
// an arbitrary function cannot.
struct BaseModelHandle {
  std::function<Prediction(const Matrix&)> predict_fn;
  // Callers may only invoke predict_fn from several threads when this is set.
  bool concurrent = false;
  std::optional<Json> payload;

  static BaseModelHandle from_function(std::function<Prediction(const Matrix&)> fn, bool concurrent = false);
  static BaseModelHandle from_estimator(const FittedEstimator& model);
  static BaseModelHandle from_payload(const Json& payload);

  Vector predict_values(const Matrix& features) const;
  ClassificationPrediction predict_classes(const Matrix& features) const;
};

struct MetaBoostConfig {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 5;

  BoostParams params() const;
};

struct MetaRegressionConfig {
  double split_fraction = 0.5;
  double target_mass = 0.9;
  // Internal base model: boosted squared-loss trees unless a registry
  // estimator is named here.
  std::optional<EstimatorConfig> base;
  MetaBoostConfig base_boost{100, 3, 0.1, 1};
  MetaBoostConfig meta;

  static MetaRegressionConfig from_json(const Json& params);
  Json to_json() const;
};

struct MetaRegressorState {
  BaseModelHandle base;
  BoostedEnsemble meta;
  double coverage_scale = 1.0;
  double target_mass = 0.9;
  double eps_floor = 1e-6;
  std::size_t dim = 0;
  // True when the covering scale came out as 0 and was replaced by 1.
  bool scale_fallback = false;

  Json to_json() const;
  static MetaRegressorState from_json(const Json& state);
};

// Meta features: the input row followed by the base prediction.
Matrix meta_regression_features(const Matrix& x, std::span<const double> base_pred);

// Smallest s with ratio_i <= s for at least ceil(mass * n) rows.
double covering_scale(std::span<const double> residuals, std::span<const double> meta, double eps_floor,
                      double mass);

// Trains the base on the first split and the meta model on the held-out rest.
MetaRegressorState meta_regression_fit(const MetaRegressionConfig& config, const Dataset& train, RngStream& rng);
// Pre-trained base: the whole dataset is the calibration split.
MetaRegressorState meta_regression_fit(const BaseModelHandle& base, const Dataset& calibration,
                                       const MetaRegressionConfig& config);
RegressionPrediction meta_regression_predict(const MetaRegressorState& state, const Matrix& features);

struct MetaClassificationConfig {
  double split_fraction = 0.5;
  // Internal base: multinomial logistic regression unless overridden.
  std::optional<EstimatorConfig> base;
  std::size_t base_max_iters = 500;
  double base_learning_rate = 0.05;
  double base_l2 = 1e-4;
  MetaBoostConfig meta;

  static MetaClassificationConfig from_json(const Json& params);
  Json to_json() const;
};

inline constexpr int kMetaFeatureRecipe = 1;

struct MetaClassifierState {
  BaseModelHandle base;
  BoostedEnsemble meta;
  // Set when the calibration labels were all correct or all wrong.
  std::optional<double> constant_probability;
  bool constant_target_warning = false;
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  int feature_recipe = kMetaFeatureRecipe;

  Vector correctness(const Matrix& features) const;
  Json to_json() const;
  static MetaClassifierState from_json(const Json& state);
};

// Recipe 1: x, base probability row, base max probability, base entropy.
Matrix meta_classification_features(const Matrix& x, const ClassificationPrediction& base_pred);

MetaClassifierState meta_classifier_fit(const MetaClassificationConfig& config, const Dataset& train,
                                        RngStream& rng);
MetaClassifierState meta_classifier_fit(const BaseModelHandle& base, const Dataset& calibration,
                                        const MetaClassificationConfig& config);
// Base probabilities with confidence replaced by the meta correctness score.
ClassificationPrediction meta_classifier_predict(const MetaClassifierState& state, const Matrix& features);
double predict_accuracy_unlabeled(const MetaClassifierState& state, const Matrix& unlabeled_features);

}  // namespace uq
