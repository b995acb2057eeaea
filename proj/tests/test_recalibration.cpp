#include <doctest.h>

#include <cmath>

#include "uqkit/error.hpp"
#include "uqkit/metrics.hpp"
#include "uqkit/recalibration.hpp"

using namespace uq;
using doctest::Approx;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an uq::Error");
  return ErrorKind::DataError;
}

Vector fitted(const IsotonicMap& m, const Vector& scores) {
  Vector out;
  for (double s : scores) out.push_back(m(s));
  return out;
}

}  // namespace

TEST_CASE("isotonic hand cases") {
  const Vector s{1, 2, 3, 4};
  CHECK(fitted(isotonic_fit(s, Vector{0, 0, 1, 1}), s) == Vector{0, 0, 1, 1});
  CHECK(fitted(isotonic_fit(s, Vector{0, 1, 0, 1}), s) == Vector{0, 0.5, 0.5, 1});
  CHECK(fitted(isotonic_fit(s, Vector{1, 1, 1, 1}), s) == Vector{1, 1, 1, 1});
  CHECK(kind_of([] { isotonic_fit(Vector{1}, Vector{1}); }) == ErrorKind::DegenerateData);
}

TEST_CASE("isotonic ties, steps and clamping") {
  // Tied scores are pooled before PAV.
  const auto m = isotonic_fit(Vector{1, 1, 2, 3}, Vector{1, 0, 0, 1});
  CHECK(m.breakpoints == Vector{1, 2, 3});
  CHECK(m(1) == Approx(1.0 / 3.0));
  CHECK(m(2) == Approx(1.0 / 3.0));
  CHECK(m(3) == 1.0);
  CHECK(m(0.0) == m(1));
  CHECK(m(99) == 1.0);
  CHECK(m(2.5) == m(2));
  for (std::size_t i = 1; i < m.values.size(); ++i) CHECK(m.values[i] >= m.values[i - 1]);
  const auto back = IsotonicMap::from_json(m.to_json());
  CHECK(back.breakpoints == m.breakpoints);
  CHECK(back.values == m.values);
}

TEST_CASE("platt symmetric example") {
  const Vector s{-1, -1, 1, 1};
  const auto m = platt_fit(s, Vector{0, 0, 1, 1});
  CHECK(m.a == Approx(std::log(3.0)).epsilon(1e-8));
  CHECK(std::abs(m.b) < 1e-8);
  const auto flipped = platt_fit(s, Vector{1, 1, 0, 0});
  CHECK(flipped.a == Approx(-m.a).epsilon(1e-8));
  CHECK(std::abs(flipped.b + m.b) < 1e-8);
}

TEST_CASE("platt with uninformative scores") {
  const Vector s{0.3, 0.3, 0.3, 0.3, 0.3};
  const Vector y{1, 1, 1, 0, 0};
  const auto m = platt_fit(s, y);
  CHECK(m.a == 0.0);
  // Smoothed targets: t+ = 4/5, t- = 1/4; mean target = (3*0.8 + 2*0.25) / 5
  const double t = (3 * 0.8 + 2 * 0.25) / 5;
  CHECK(m.b == Approx(std::log(t / (1 - t))).epsilon(1e-12));
  // Direct scan over b agrees.
  const auto obj = platt_objective(s, y);
  Vector g(2);
  double best_b = 0, best = INFINITY;
  for (int i = -2000; i <= 2000; ++i) {
    const double b = i * 1e-3;
    const double v = obj(Vector{0, b}, g);
    if (v < best) {
      best = v;
      best_b = b;
    }
  }
  CHECK(std::abs(best_b - m.b) <= 1e-3);
  CHECK(kind_of([] { platt_fit(Vector{1, 2}, Vector{1, 1}); }) == ErrorKind::OneClassOnly);
}

TEST_CASE("platt beats random probes and has a correct gradient") {
  RngStream rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    Vector s(60), y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = rng.normal();
      y[i] = rng.uniform() < sigmoid(1.7 * s[i] - 0.4) ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    const auto m = platt_fit(s, y);
    const auto obj = platt_objective(s, y);
    Vector g(2);
    const double at = obj(Vector{m.a, m.b}, g);
    for (int k = 0; k < 200; ++k) CHECK(at <= obj(Vector{rng.uniform(-10, 10), rng.uniform(-10, 10)}, g) + 1e-12);
    for (int k = 0; k < 4; ++k) CHECK(check_gradient(obj, Vector{rng.uniform(-3, 3), rng.uniform(-3, 3)}) < 1e-4);
  }
}

TEST_CASE("probability maps") {
  const auto pred = ClassificationPrediction::from_probs(Matrix::from_rows({{0.2, 0.8}, {0.7, 0.3}, {0.5, 0.5}}));
  const auto same = apply_probability_map(PlattMap{1.0, 0.0}, pred, 1, ScoreKind::Logit);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(same.probs(i, 1) - pred.probs(i, 1)) <= 1e-9);
    CHECK(same.probs(i, 0) + same.probs(i, 1) == Approx(1.0));
  }
  const auto shifted = apply_probability_map(PlattMap{1.0, 2.0}, pred, 1, ScoreKind::Logit);
  CHECK(shifted.predicted_class[1] == 1);
  const auto three = ClassificationPrediction::from_probs(Matrix::from_rows({{0.2, 0.3, 0.5}}));
  CHECK(kind_of([&] { apply_probability_map(PlattMap{}, three); }) == ErrorKind::NotBinary);
  const auto scores = probability_scores(ClassificationPrediction::from_probs(Matrix::from_rows({{1.0, 0.0}})), 1,
                                         ScoreKind::Probability);
  CHECK(scores[0] == 1e-12);
}

TEST_CASE("platt halves ece on sharpened probabilities") {
  RngStream rng(11);
  const std::size_t n = 5000;
  Matrix p(n, 2);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = rng.uniform();
    y[i] = rng.uniform() < t ? 1 : 0;
    p(i, 1) = t * t;
    p(i, 0) = 1 - t * t;
  }
  const auto pred = ClassificationPrediction::from_probs(p);
  const auto map = platt_fit(probability_scores(pred, 1, ScoreKind::Logit), y);
  const auto after = apply_probability_map(map, pred, 1, ScoreKind::Logit);
  CHECK(ece(after, y) <= 0.5 * ece(pred, y));
}

TEST_CASE("interval recalibration hand examples") {
  const RegressionPrediction p{{0, 0}, {-1, -1}, {1, 1}, {}, {}};
  const Vector y{1, -2};
  const auto id = apply_interval_scale(p, 1.0);
  CHECK(id.y_lower == p.y_lower);
  CHECK(id.y_upper == p.y_upper);
  const auto zero = interval_recalibrate(p, y, MissRateTarget{0.0});
  CHECK(zero.scale.c == 2.0);
  CHECK(picp(zero.prediction, y) == 1.0);
  const auto half = interval_recalibrate(p, y, MissRateTarget{0.5});
  CHECK(half.scale.c == 1.0);
  // Bandwidth: mean width 2c; target 3 sits between the critical widths 2 and 4
  const auto bw = interval_recalibrate(p, y, BandwidthTarget{3.0});
  CHECK(bw.scale.c == 1.0);
  const auto bw2 = interval_recalibrate(p, y, BandwidthTarget{3.5});
  CHECK(bw2.scale.c == 2.0);
}

TEST_CASE("interval recalibration errors and idempotence") {
  const RegressionPrediction zero{{0, 0}, {0, 0}, {0, 0}, {}, {}};
  CHECK(kind_of([&] { interval_recalibrate(zero, Vector{1, 1}, MissRateTarget{0.1}); }) ==
        ErrorKind::AllZeroWidth);
  // Second row can never be covered: its interval has zero width.
  const RegressionPrediction stuck{{0, 0}, {-1, 0}, {1, 0}, {}, {}};
  CHECK(kind_of([&] { interval_recalibrate(stuck, Vector{0.5, 3}, MissRateTarget{0.0}); }) ==
        ErrorKind::TargetUnreachable);
  CHECK(interval_recalibrate(stuck, Vector{0.5, 3}, MissRateTarget{0.5}).scale.c == 0.5);

  RngStream rng(5);
  RegressionPrediction p;
  Vector y;
  for (int i = 0; i < 200; ++i) {
    const double h = rng.normal();
    p.y_hat.push_back(h);
    p.y_lower.push_back(h - 0.3 - std::abs(rng.normal()));
    p.y_upper.push_back(h + 0.3 + std::abs(rng.normal()));
    y.push_back(h + 2 * rng.normal());
  }
  for (double m : {0.05, 0.1, 0.3}) {
    const auto first = interval_recalibrate(p, y, MissRateTarget{m});
    CHECK((1.0 - picp(first.prediction, y)) * 200 <= m * 200 + 1e-9);
    const auto second = interval_recalibrate(first.prediction, y, MissRateTarget{m});
    CHECK(second.scale.c == 1.0);
  }
}
