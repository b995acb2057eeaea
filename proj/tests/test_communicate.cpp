#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "uqkit/communicate.hpp"
#include "uqkit/error.hpp"

using namespace uq;
using doctest::Approx;

TEST_CASE("three significant digits") {
  CHECK(format_sig3(0) == "0");
  CHECK(format_sig3(1.23456) == "1.23");
  CHECK(format_sig3(123456) == "123000");
  CHECK(format_sig3(0.000123456) == "0.000123");
  CHECK(format_sig3(-2.5) == "-2.5");
  CHECK(format_sig3(9.996) == "10");
  CHECK(format_sig3(1.5e7) == "1.50e+07");
  CHECK(format_sig3(2e-5) == "2.00e-05");
  CHECK(format_sig3(NAN) == "nan");
}

TEST_CASE("summary templates") {
  RegressionPrediction r{{1.234}, {0.5}, {2.0}, Vector{0.4}, {}};
  CHECK(summarize_prediction(r, 0, SummaryStyle::Concise, 0.95) == "estimate 1.23; 95% interval [0.5, 2]");
  CHECK(summarize_prediction(r, 0, SummaryStyle::Detailed, 0.9, "gp_regression") ==
        "estimate 1.23; 90% interval [0.5, 2]; std 0.4; model gp_regression");
  RegressionPrediction flat{{3}, {3}, {3}, {}, {}};
  CHECK(summarize_prediction(flat, 0, SummaryStyle::Concise, 0.95).find("interval width 0") != std::string::npos);
  const auto c = ClassificationPrediction::from_probs(Matrix::from_rows({{0.25, 0.75}}));
  CHECK(summarize_prediction(c, 0, SummaryStyle::Concise) == "class 1, confidence 75%");
  CHECK(summarize_prediction(c, 0, SummaryStyle::Detailed) == "class 1, confidence 75%; probabilities [0.25, 0.75]");
  CHECK_THROWS_AS(summarize_prediction(c, 1, SummaryStyle::Concise), Error);
}

TEST_CASE("dot plot layout") {
  const auto g = quantile_dot_plot(GaussianParams{2.0, 1.5}, 20, 10);
  REQUIRE(g.quantiles.size() == 20);
  for (std::size_t j = 0; j < 20; ++j) CHECK(g.quantiles[j] - 2.0 == Approx(2.0 - g.quantiles[19 - j]));
  std::size_t total = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    total += g.stack_heights[b];
    CHECK(g.stack_heights[b] == g.stack_heights[9 - b]);
  }
  CHECK(total == 20);

  const auto one = quantile_dot_plot(GaussianParams{4.0, 1.0}, 1, 10);
  CHECK(one.quantiles == Vector{4.0});
  CHECK(one.stack_heights == std::vector<std::size_t>{1});

  Vector u;
  for (int i = 1; i <= 100; ++i) u.push_back(i);
  const auto s = quantile_dot_plot(Samples{u}, 10, 5);
  CHECK(s.stack_heights == std::vector<std::size_t>{2, 2, 2, 2, 2});

  const auto flat = quantile_dot_plot(GaussianParams{1.0, 0.0}, 7, 4);
  CHECK(flat.degenerate);
  CHECK(flat.stack_heights == std::vector<std::size_t>{7});
  CHECK_THROWS_AS(quantile_dot_plot(GaussianParams{0, 1}, 0, 3), Error);
}

TEST_CASE("density curves") {
  const auto c = density_curve(GaussianParams{0.0, 1.0}, 201);
  CHECK(c[100].x == Approx(0.0));
  CHECK(c[100].y == Approx(0.39894).epsilon(1e-4));
  CHECK(c.front().x == Approx(-4.0));
  CHECK(c.back().x == Approx(4.0));

  RngStream rng(9);
  Vector v(300);
  for (double& x : v) x = rng.normal();
  const auto k = density_curve(Samples{v}, 400);
  double area = 0;
  for (std::size_t i = 1; i < k.size(); ++i) area += 0.5 * (k[i].y + k[i - 1].y) * (k[i].x - k[i - 1].x);
  // The window stops one bandwidth beyond the extremes, so a little tail mass is cut.
  CHECK(area > 0.95);
  CHECK(area <= 1.0 + 1e-9);
  CHECK_THROWS_AS(density_curve(Samples{Vector{1, 1, 1}}), Error);
  CHECK_THROWS_AS(density_curve(GaussianParams{0, 0}), Error);
}

TEST_CASE("svg rendering") {
  const auto p = ClassificationPrediction::from_probs(Matrix::from_rows({{0.9, 0.1}, {0.3, 0.7}, {0.6, 0.4}}));
  const auto bins = reliability_diagram(p, Vector{0, 1, 1}, 10);
  const std::string svg = render_svg(reliability_plot(bins));
  const auto xml = testsupport::check_xml(svg);
  INFO(xml.error);
  CHECK(xml.ok);
  CHECK(xml.root == "svg");
  CHECK(svg.find("class=\"reference\"") != std::string::npos);
  CHECK(render_svg(reliability_plot(bins)) == svg);

  RegressionPrediction r{{0, 1, 2}, {-1, 0, 1}, {1, 2, 3}, {}, {}};
  const Vector truth{0.5, 3, 2};
  std::vector<PlotSpec> specs{interval_plot(r, truth), density_plot(density_curve(GaussianParams{0, 1})),
                              dot_plot(quantile_dot_plot(GaussianParams{0, 1})), curve_plot(ucc(r, truth)),
                              curve_plot(risk_rejection_curve(Vector{1, 2, 3}, Vector{0, 1, 0},
                                                              default_rejection_grid()))};
  for (const auto& spec : specs) {
    const std::string s = render_svg(spec);
    const auto x = testsupport::check_xml(s);
    INFO(plot_kind_name(spec.kind), " ", x.error);
    CHECK(x.ok);
    CHECK(x.elements > 3);
    const auto back = PlotSpec::from_json(Json::parse(spec.to_json().dump()));
    CHECK(render_svg(back) == s);
  }
}

TEST_CASE("plot kinds") {
  CHECK(parse_plot_kind("ucc") == PlotKind::UCC);
  try {
    parse_plot_kind("pie");
    FAIL("expected UnsupportedKind");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedKind);
  }
  PlotSpec bad;
  bad.kind = PlotKind::Density;
  bad.series = Json{{"x", {1, 2}}};
  CHECK_THROWS_AS(render_svg(bad), Error);
}
