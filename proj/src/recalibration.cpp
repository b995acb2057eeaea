#include "uqkit/recalibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uqkit/error.hpp"

namespace uq {

namespace {

void check_binary_labels(std::span<const double> scores, std::span<const double> labels) {
  require(scores.size() == labels.size(), ErrorKind::DimensionMismatch, "scores and labels differ in length");
  for (double y : labels) require(y == 0.0 || y == 1.0, ErrorKind::DataError, "labels must be 0 or 1");
  for (double s : scores) require(std::isfinite(s), ErrorKind::DataError, "scores must be finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// Isotonic regression

double IsotonicMap::operator()(double score) const {
  require(!breakpoints.empty(), ErrorKind::ConfigError, "isotonic map is empty");
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), score);
  if (it == breakpoints.begin()) return values.front();
  return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

Json IsotonicMap::to_json() const { return Json{{"kind", "isotonic"}, {"breakpoints", breakpoints}, {"values", values}}; }

IsotonicMap IsotonicMap::from_json(const Json& j) {
  IsotonicMap m;
  m.breakpoints = vector_from_json(j.at("breakpoints"));
  m.values = vector_from_json(j.at("values"));
  require(!m.values.empty() && m.values.size() == m.breakpoints.size(), ErrorKind::CorruptPayload,
          "isotonic map arrays differ in length");
  for (std::size_t i = 1; i < m.values.size(); ++i)
    require(m.breakpoints[i] > m.breakpoints[i - 1] && m.values[i] >= m.values[i - 1], ErrorKind::CorruptPayload,
            "isotonic map is not monotone");
  return m;
}

IsotonicMap isotonic_fit(std::span<const double> scores, std::span<const double> labels) {
  check_binary_labels(scores, labels);
  const std::size_t n = scores.size();
  require(n >= 2, ErrorKind::DegenerateData, "isotonic regression needs at least two points");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  struct Block {
    double sum;
    double weight;
    std::size_t first;  // index of the first distinct score in the block
  };
  IsotonicMap map;
  std::vector<Block> stack;
  for (std::size_t k = 0; k < n;) {
    const double s = scores[order[k]];
    Block b{0.0, 0.0, map.breakpoints.size()};
    for (; k < n && scores[order[k]] == s; ++k) {
      b.sum += labels[order[k]];
      b.weight += 1.0;
    }
    map.breakpoints.push_back(s);
    // Pool while the previous block mean exceeds this one (cross-multiplied
    // so integer label sums compare exactly).
    while (!stack.empty() && stack.back().sum * b.weight > b.sum * stack.back().weight) {
      b.sum += stack.back().sum;
      b.weight += stack.back().weight;
      b.first = stack.back().first;
      stack.pop_back();
    }
    stack.push_back(b);
  }
  map.values.resize(map.breakpoints.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const std::size_t end = i + 1 < stack.size() ? stack[i + 1].first : map.values.size();
    const double v = stack[i].sum / stack[i].weight;
    std::fill(map.values.begin() + static_cast<std::ptrdiff_t>(stack[i].first),
              map.values.begin() + static_cast<std::ptrdiff_t>(end), v);
  }
  return map;
}

// ---------------------------------------------------------------------------
// Platt scaling

double PlattMap::operator()(double score) const { return sigmoid(a * score + b); }

Json PlattMap::to_json() const { return Json{{"kind", "platt"}, {"a", a}, {"b", b}}; }

PlattMap PlattMap::from_json(const Json& j) {
  PlattMap m{j.at("a").get<double>(), j.at("b").get<double>()};
  require(std::isfinite(m.a) && std::isfinite(m.b), ErrorKind::CorruptPayload, "Platt parameters must be finite");
  return m;
}

namespace {

Vector smoothed_targets(std::span<const double> labels) {
  double pos = 0.0;
  for (double y : labels) pos += y;
  const double neg = static_cast<double>(labels.size()) - pos;
  const double t_pos = (pos + 1.0) / (pos + 2.0), t_neg = 1.0 / (neg + 2.0);
  Vector t(labels.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = labels[i] == 1.0 ? t_pos : t_neg;
  return t;
}

double platt_nll(std::span<const double> scores, std::span<const double> t, double a, double b, double* ga,
                 double* gb) {
  double total = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double z = a * scores[i] + b;
    total += t[i] * softplus(-z) + (1.0 - t[i]) * softplus(z);
    const double r = sigmoid(z) - t[i];
    da += r * scores[i];
    db += r;
  }
  if (ga) *ga = da;
  if (gb) *gb = db;
  return total;
}

}  // namespace

PlainObjective platt_objective(std::span<const double> scores, std::span<const double> labels) {
  check_binary_labels(scores, labels);
  Vector s(scores.begin(), scores.end());
  Vector t = smoothed_targets(labels);
  return [s = std::move(s), t = std::move(t)](std::span<const double> p, std::span<double> grad) {
    return platt_nll(s, t, p[0], p[1], &grad[0], &grad[1]);
  };
}

PlattMap platt_fit(std::span<const double> scores, std::span<const double> labels) {
  check_binary_labels(scores, labels);
  double pos = 0.0;
  for (double y : labels) pos += y;
  require(pos > 0.0 && pos < static_cast<double>(labels.size()), ErrorKind::OneClassOnly,
          "Platt scaling needs both classes");
  const Vector t = smoothed_targets(labels);
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) {
    // No information in the score: only the base rate is identifiable.
    const double p = mean(t);
    return {0.0, std::log(p / (1.0 - p))};
  }

  double a = 0.0, b = std::log((pos + 1.0) / (static_cast<double>(labels.size()) - pos + 1.0));
  double ga = 0.0, gb = 0.0;
  double f = platt_nll(scores, t, a, b, &ga, &gb);
  const double n = static_cast<double>(scores.size());
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    double haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double p = sigmoid(a * scores[i] + b);
      const double w = p * (1.0 - p);
      haa += w * scores[i] * scores[i];
      hab += w * scores[i];
      hbb += w;
    }
    haa += 1e-12;
    hbb += 1e-12;
    const double det = haa * hbb - hab * hab;
    double da, db;
    if (det > 1e-300) {
      da = -(hbb * ga - hab * gb) / det;
      db = -(haa * gb - hab * ga) / det;
    } else {
      da = -ga;
      db = -gb;
    }
    double step = 1.0, na = a, nb = b, nga = ga, ngb = gb, nf = f;
    bool accepted = false;
    for (int half = 0; half < 60; ++half, step *= 0.5) {
      na = a + step * da;
      nb = b + step * db;
      nf = platt_nll(scores, t, na, nb, &nga, &ngb);
      if (nf <= f + 1e-4 * step * (ga * da + gb * db)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double moved = std::max(std::abs(na - a), std::abs(nb - b));
    a = na;
    b = nb;
    f = nf;
    ga = nga;
    gb = ngb;
    if (std::max(std::abs(ga), std::abs(gb)) < 1e-12 * n || moved < 1e-14 * (1.0 + std::abs(a) + std::abs(b))) {
      converged = true;
      break;
    }
  }
  if (!converged && std::max(std::abs(ga), std::abs(gb)) > 1e-6 * n) {
    OptimizerConfig opt;
    opt.learning_rate = 0.01;
    opt.max_iters = 5000;
    RngStream rng(0);
    const MinimizeResult res = minimize(platt_objective(scores, labels), Vector{a, b}, opt, rng);
    if (platt_nll(scores, t, res.params[0], res.params[1], nullptr, nullptr) < f) {
      a = res.params[0];
      b = res.params[1];
    }
  }
  require(std::isfinite(a) && std::isfinite(b), ErrorKind::NonFiniteObjective, "Platt fit diverged");
  return {a, b};
}

std::string_view score_kind_name(ScoreKind kind) { return kind == ScoreKind::Logit ? "logit" : "probability"; }

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "logit") return ScoreKind::Logit;
  if (name == "probability") return ScoreKind::Probability;
  fail(ErrorKind::ConfigError, "unknown score kind '" + std::string(name) + "'");
}

Vector probability_scores(const ClassificationPrediction& pred, std::size_t positive_class, ScoreKind kind) {
  require(pred.n_classes() == 2, ErrorKind::NotBinary, "probability maps need a binary task");
  require(positive_class < 2, ErrorKind::ConfigError, "positive class must be 0 or 1");
  Vector s(pred.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = std::clamp(pred.probs(i, positive_class), 1e-12, 1.0 - 1e-12);
    s[i] = kind == ScoreKind::Logit ? std::log(p / (1.0 - p)) : p;
  }
  return s;
}

ClassificationPrediction apply_probability_map(const ProbabilityMap& map, const ClassificationPrediction& pred,
                                               std::size_t positive_class, ScoreKind kind) {
  const Vector scores = probability_scores(pred, positive_class, kind);
  Matrix probs(pred.size(), 2);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(std::visit([&](const auto& m) { return m(scores[i]); }, map), 0.0, 1.0);
    probs(i, positive_class) = p;
    probs(i, 1 - positive_class) = 1.0 - p;
  }
  return ClassificationPrediction::from_probs(std::move(probs));
}

// ---------------------------------------------------------------------------
// Interval scaling

Json IntervalScale::to_json() const { return Json{{"kind", "interval_scale"}, {"c", c}, {"anchor", "prediction_center"}}; }

RegressionPrediction apply_interval_scale(const RegressionPrediction& pred, double c) {
  require(c > 0.0 && std::isfinite(c), ErrorKind::ConfigError, "interval scale must be positive and finite");
  RegressionPrediction out = pred;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.y_lower[i] = pred.y_hat[i] - c * (pred.y_hat[i] - pred.y_lower[i]);
    out.y_upper[i] = pred.y_hat[i] + c * (pred.y_upper[i] - pred.y_hat[i]);
  }
  if (out.y_std)
    for (double& s : *out.y_std) s *= c;
  out.samples.reset();
  return out;
}

IntervalRecalibration interval_recalibrate(const RegressionPrediction& pred, std::span<const double> truths,
                                           const IntervalTarget& target) {
  pred.validate();
  const Vector crit = ucc_critical_scales(pred, truths);
  const std::size_t n = crit.size();
  require(mpiw(pred) > 0.0, ErrorKind::AllZeroWidth, "every interval has zero width");

  Vector finite;
  for (double s : crit)
    if (std::isfinite(s)) finite.push_back(s);
  std::sort(finite.begin(), finite.end());
  finite.erase(std::unique(finite.begin(), finite.end()), finite.end());
  Vector positive;
  for (double s : finite)
    if (s > 0.0) positive.push_back(s);

  double c = 1.0;
  if (const auto* mr = std::get_if<MissRateTarget>(&target)) {
    const double m = mr->miss_rate;
    require(m >= 0.0 && m <= 1.0, ErrorKind::ConfigError, "miss-rate target must lie in [0, 1]");
    // Compare counts, not rates: 1 - 0.95 is not exactly 0.05 in binary.
    const auto allowed = static_cast<std::size_t>(std::floor(m * static_cast<double>(n) + 1e-9));
    const auto never = static_cast<std::size_t>(
        std::count_if(crit.begin(), crit.end(), [](double s) { return !std::isfinite(s); }));
    require(never <= allowed, ErrorKind::TargetUnreachable,
            "miss rate " + std::to_string(m) + " is unreachable; the best achievable is " +
                std::to_string(static_cast<double>(never) / static_cast<double>(n)));
    auto above = [&](double c0) {
      return static_cast<std::size_t>(std::count_if(crit.begin(), crit.end(), [&](double s) { return s > c0; }));
    };
    auto it = std::find_if(finite.begin(), finite.end(), [&](double s) { return above(s) <= allowed; });
    c = it != finite.end() ? *it : 1.0;
    if (c == 0.0) c = positive.empty() ? 1.0 : positive.front();
    auto misses = [&](const RegressionPrediction& p) {
      std::size_t k = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (!(truths[i] >= p.y_lower[i] && truths[i] <= p.y_upper[i])) ++k;
      return k;
    };
    if (std::abs(c - 1.0) <= 1e-9 && misses(pred) <= allowed) c = 1.0;
    RegressionPrediction out = apply_interval_scale(pred, c);
    // Rounding in the rescaled bounds can uncover a boundary point.
    for (int bump = 0; bump < 64 && misses(out) > allowed; ++bump) {
      c = std::nextafter(c, std::numeric_limits<double>::infinity());
      out = apply_interval_scale(pred, c);
    }
    return {{c}, std::move(out)};
  }

  const double w = std::get<BandwidthTarget>(target).width;
  require(w > 0.0 && std::isfinite(w), ErrorKind::ConfigError, "bandwidth target must be positive");
  require(!positive.empty(), ErrorKind::TargetUnreachable, "no positive critical scale to choose from");
  const double base = mpiw(pred);
  double best = std::numeric_limits<double>::infinity();
  for (double s : positive) {
    const double gap = std::abs(s * base - w);
    if (gap < best) {
      best = gap;
      c = s;
    }
  }
  return {{c}, apply_interval_scale(pred, c)};
}

}  // namespace uq
