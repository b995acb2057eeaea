#include "uqkit/communicate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "uqkit/error.hpp"

namespace uq {

std::string format_sig3(double value) {
  if (!std::isfinite(value)) return value != value ? "nan" : (value > 0 ? "inf" : "-inf");
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", value);
  const double rounded = std::strtod(buf, nullptr);
  const double mag = std::abs(rounded);
  if (mag < 1e-4 || mag >= 1e6) return buf;
  const int exponent = static_cast<int>(std::floor(std::log10(mag)));
  const int decimals = std::max(0, 2 - exponent);
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

std::string summarize_prediction(const RegressionPrediction& pred, std::size_t row, SummaryStyle style, double mass,
                                 std::string_view algorithm_id) {
  require(row < pred.size(), ErrorKind::DimensionMismatch, "summary row out of range");
  const double y = pred.y_hat[row], lo = pred.y_lower[row], hi = pred.y_upper[row];
  std::string text = "estimate " + format_sig3(y) + "; ";
  if (lo == hi)
    text += "interval width 0 (see documentation on degenerate intervals)";
  else
    text += format_sig3(100.0 * mass) + "% interval [" + format_sig3(lo) + ", " + format_sig3(hi) + "]";
  if (style == SummaryStyle::Detailed) {
    if (pred.y_std) text += "; std " + format_sig3((*pred.y_std)[row]);
    if (!algorithm_id.empty()) text += "; model " + std::string(algorithm_id);
  }
  return text;
}

std::string summarize_prediction(const ClassificationPrediction& pred, std::size_t row, SummaryStyle style,
                                 std::string_view algorithm_id) {
  require(row < pred.size(), ErrorKind::DimensionMismatch, "summary row out of range");
  std::string text = "class " + std::to_string(pred.predicted_class[row]) + ", confidence " +
                     format_sig3(100.0 * pred.confidence[row]) + "%";
  if (style == SummaryStyle::Detailed) {
    text += "; probabilities [";
    for (std::size_t c = 0; c < pred.n_classes(); ++c)
      text += (c ? ", " : "") + format_sig3(pred.probs(row, c));
    text += "]";
    if (!algorithm_id.empty()) text += "; model " + std::string(algorithm_id);
  }
  return text;
}

// ---------------------------------------------------------------------------
// Distributions

namespace {

Vector distribution_quantiles(const Distribution& dist, std::size_t k, bool& degenerate) {
  Vector q(k);
  degenerate = false;
  if (const auto* g = std::get_if<GaussianParams>(&dist)) {
    require(std::isfinite(g->mu) && std::isfinite(g->sigma) && g->sigma >= 0.0, ErrorKind::DegenerateDistribution,
            "Gaussian sigma must be finite and non-negative");
    degenerate = g->sigma == 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      const std::size_t mirror = k + 1 - j;
      double z;
      if (2 * j == k + 1) z = 0.0;
      else if (j <= k / 2) z = normal_quantile((static_cast<double>(j) - 0.5) / static_cast<double>(k));
      else z = -normal_quantile((static_cast<double>(mirror) - 0.5) / static_cast<double>(k));
      q[j - 1] = g->mu + g->sigma * z;
    }
    return q;
  }
  const auto& values = std::get<Samples>(dist).values;
  require(!values.empty(), ErrorKind::EmptyInput, "no samples");
  for (double v : values) require(std::isfinite(v), ErrorKind::DegenerateDistribution, "samples must be finite");
  Vector sorted = values;
  std::sort(sorted.begin(), sorted.end());
  degenerate = sorted.front() == sorted.back();
  for (std::size_t j = 1; j <= k; ++j)
    q[j - 1] = sorted_quantile(sorted, (static_cast<double>(j) - 0.5) / static_cast<double>(k));
  return q;
}

}  // namespace

DotPlotLayout quantile_dot_plot(const Distribution& dist, std::size_t k, std::size_t bins) {
  require(k >= 1 && bins >= 1, ErrorKind::ConfigError, "dot plot needs K >= 1 and bins >= 1");
  DotPlotLayout out;
  out.total_dots = k;
  out.quantiles = distribution_quantiles(dist, k, out.degenerate);
  const double lo = out.quantiles.front(), hi = out.quantiles.back();
  if (out.degenerate || !(hi > lo)) {
    out.bin_centers = {lo};
    out.stack_heights = {k};
    out.bin_width = std::max(1.0, std::abs(lo) * 0.1);
    out.dot_radius = out.bin_width / 2.0;
    return out;
  }
  out.bin_width = (hi - lo) / static_cast<double>(bins);
  out.dot_radius = out.bin_width / 2.0;
  out.stack_heights.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) out.bin_centers.push_back(lo + (static_cast<double>(b) + 0.5) * out.bin_width);
  for (double v : out.quantiles) {
    const double pos = (v - lo) / (hi - lo) * static_cast<double>(bins);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(pos))));
    ++out.stack_heights[b];
  }
  return out;
}

std::vector<CurvePoint> density_curve(const Distribution& dist, std::size_t points) {
  require(points >= 2, ErrorKind::ConfigError, "density curve needs at least two points");
  std::vector<CurvePoint> out(points);
  auto grid = [&](double lo, double hi, std::size_t i) {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  };
  if (const auto* g = std::get_if<GaussianParams>(&dist)) {
    require(std::isfinite(g->mu) && std::isfinite(g->sigma) && g->sigma > 0.0, ErrorKind::DegenerateDistribution,
            "Gaussian density needs sigma > 0");
    for (std::size_t i = 0; i < points; ++i) {
      const double x = grid(g->mu - 4.0 * g->sigma, g->mu + 4.0 * g->sigma, i);
      out[i] = {x, normal_pdf((x - g->mu) / g->sigma) / g->sigma};
    }
    return out;
  }
  const auto& v = std::get<Samples>(dist).values;
  require(v.size() >= 2, ErrorKind::DegenerateDistribution, "density estimate needs at least two samples");
  const double sd = stddev(v);
  require(sd > 0.0 && std::isfinite(sd), ErrorKind::DegenerateDistribution, "samples are constant");
  const double h = 1.06 * sd * std::pow(static_cast<double>(v.size()), -0.2);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double norm = 1.0 / (static_cast<double>(v.size()) * h);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = grid(*lo - h, *hi + h, i);
    double total = 0.0;
    for (double s : v) total += normal_pdf((x - s) / h);
    out[i] = {x, total * norm};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot specs

std::string_view plot_kind_name(PlotKind kind) {
  switch (kind) {
    case PlotKind::Interval: return "interval";
    case PlotKind::Density: return "density";
    case PlotKind::QuantileDotPlot: return "quantile_dot_plot";
    case PlotKind::ReliabilityDiagram: return "reliability_diagram";
    case PlotKind::RiskRejection: return "risk_rejection";
    case PlotKind::UCC: return "ucc";
  }
  return "density";
}

PlotKind parse_plot_kind(std::string_view name) {
  for (PlotKind k : {PlotKind::Interval, PlotKind::Density, PlotKind::QuantileDotPlot, PlotKind::ReliabilityDiagram,
                     PlotKind::RiskRejection, PlotKind::UCC})
    if (plot_kind_name(k) == name) return k;
  fail(ErrorKind::UnsupportedKind, "unsupported plot kind '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> series_keys(PlotKind kind) {
  switch (kind) {
    case PlotKind::Interval: return {"x", "y_hat", "lower", "upper"};
    case PlotKind::QuantileDotPlot: return {"bin_centers", "stack_heights"};
    case PlotKind::ReliabilityDiagram: return {"accuracy", "mean_confidence", "count"};
    default: return {"x", "y"};
  }
}

Vector series_vector(const Json& series, const std::string& key) {
  const Json& v = series.at(key);
  require(v.is_array(), ErrorKind::ConfigError, "plot series '" + key + "' must be an array");
  Vector out;
  for (const auto& e : v) {
    require(e.is_number() && std::isfinite(e.get<double>()), ErrorKind::ConfigError,
            "plot series '" + key + "' must hold finite numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

void PlotSpec::validate() const {
  require(std::isfinite(width) && std::isfinite(height) && width > 0 && height > 0, ErrorKind::ConfigError,
          "plot dimensions must be positive");
  require(series.is_object(), ErrorKind::ConfigError, "plot series must be an object");
  const auto keys = series_keys(kind);
  std::size_t n = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    require(series.contains(keys[i]), ErrorKind::ConfigError, "plot series lacks '" + keys[i] + "'");
    const std::size_t len = series_vector(series, keys[i]).size();
    if (i == 0) n = len;
    require(len == n, ErrorKind::ConfigError, "plot series lengths differ");
  }
  require(n >= 1, ErrorKind::ConfigError, "plot series is empty");
  if (kind == PlotKind::Interval && series.contains("truth"))
    require(series_vector(series, "truth").size() == n, ErrorKind::ConfigError, "truth length differs");
  if (kind == PlotKind::ReliabilityDiagram)
    require(series_vector(series, "bin_edges").size() == n + 1, ErrorKind::ConfigError, "bin edge count mismatch");
  if (kind == PlotKind::QuantileDotPlot) {
    require(series.contains("bin_width") && series.at("bin_width").is_number() &&
                series.at("bin_width").get<double>() > 0.0,
            ErrorKind::ConfigError, "dot plot needs a positive bin_width");
    const Vector c = series_vector(series, "bin_centers");
    for (std::size_t i = 1; i < c.size(); ++i)
      require(c[i] > c[i - 1], ErrorKind::ConfigError, "bin centers must increase");
  }
}

Json PlotSpec::to_json() const {
  return Json{{"kind", plot_kind_name(kind)}, {"title", title}, {"x_label", x_label}, {"y_label", y_label},
              {"width", width},               {"height", height}, {"series", series}};
}

PlotSpec PlotSpec::from_json(const Json& j) {
  PlotSpec s;
  s.kind = parse_plot_kind(j.at("kind").get<std::string>());
  s.title = j.value("title", "");
  s.x_label = j.value("x_label", "");
  s.y_label = j.value("y_label", "");
  s.width = j.value("width", 640.0);
  s.height = j.value("height", 400.0);
  s.series = j.at("series");
  s.validate();
  return s;
}

PlotSpec interval_plot(const RegressionPrediction& pred, std::span<const double> truths, std::size_t max_points) {
  const std::size_t n = std::min(pred.size(), max_points);
  PlotSpec s;
  s.kind = PlotKind::Interval;
  s.title = "Prediction intervals";
  s.x_label = "Row";
  s.y_label = "Target";
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  auto head = [n](const Vector& v) { return Vector(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)); };
  s.series = Json{{"x", x}, {"y_hat", head(pred.y_hat)}, {"lower", head(pred.y_lower)}, {"upper", head(pred.y_upper)}};
  if (!truths.empty()) s.series["truth"] = Vector(truths.begin(), truths.begin() + static_cast<std::ptrdiff_t>(n));
  return s;
}

PlotSpec density_plot(const std::vector<CurvePoint>& curve, std::string title) {
  PlotSpec s;
  s.kind = PlotKind::Density;
  s.title = std::move(title);
  s.x_label = "Value";
  s.y_label = "Density";
  Vector x, y;
  for (const auto& p : curve) {
    x.push_back(p.x);
    y.push_back(p.y);
  }
  s.series = Json{{"x", x}, {"y", y}};
  return s;
}

PlotSpec dot_plot(const DotPlotLayout& layout, std::string title) {
  PlotSpec s;
  s.kind = PlotKind::QuantileDotPlot;
  s.title = std::move(title);
  s.x_label = "Value";
  s.y_label = "Dots (" + std::to_string(layout.total_dots) + " quantiles)";
  s.series = Json{{"bin_centers", layout.bin_centers},
                  {"stack_heights", layout.stack_heights},
                  {"bin_width", layout.bin_width}};
  return s;
}

PlotSpec reliability_plot(const ReliabilityBins& bins) {
  PlotSpec s;
  s.kind = PlotKind::ReliabilityDiagram;
  s.title = "Reliability diagram";
  s.x_label = "Confidence";
  s.y_label = "Accuracy";
  s.series = Json{{"bin_edges", bins.bin_edges},
                  {"accuracy", bins.accuracy},
                  {"mean_confidence", bins.mean_confidence},
                  {"count", bins.count}};
  return s;
}

PlotSpec curve_plot(const CurveResult& curve) {
  PlotSpec s;
  if (curve.kind == CurveKind::UCC) {
    s.kind = PlotKind::UCC;
    s.title = "Uncertainty characteristic curve";
    s.x_label = "Normalized bandwidth";
    s.y_label = "Miss rate";
  } else if (curve.kind == CurveKind::RiskRejection) {
    s.kind = PlotKind::RiskRejection;
    s.title = "Risk vs rejection";
    s.x_label = "Rejection rate";
    s.y_label = "Risk";
  } else {
    fail(ErrorKind::UnsupportedKind, "reliability curves are drawn with reliability_plot");
  }
  Vector x, y;
  for (const auto& p : curve.points) {
    x.push_back(p.x);
    y.push_back(p.y);
  }
  s.series = Json{{"x", x}, {"y", y}};
  return s;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr const char* kInk = "#222222";
constexpr const char* kGrid = "#bbbbbb";
constexpr const char* kBlue = "#1f77b4";
constexpr const char* kRed = "#d62728";
constexpr const char* kGreen = "#2ca02c";

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Range {
  double lo, hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(0.5, std::abs(lo) * 0.1);
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

Range span_of(std::initializer_list<const Vector*> vs) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Vector* v : vs)
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  return padded(lo, hi);
}

class Canvas {
 public:
  Canvas(const PlotSpec& spec, Range x, Range y) : spec_(spec), x_(x), y_(y) {
    left_ = 64;
    right_ = spec.width - 20;
    top_ = 40;
    bottom_ = spec.height - 48;
    if (right_ <= left_) right_ = left_ + 1;
    if (bottom_ <= top_) bottom_ = top_ + 1;
  }

  double px(double x) const { return left_ + (x - x_.lo) / (x_.hi - x_.lo) * (right_ - left_); }
  double py(double y) const { return bottom_ - (y - y_.lo) / (y_.hi - y_.lo) * (bottom_ - top_); }
  double plot_width() const { return right_ - left_; }
  double plot_height() const { return bottom_ - top_; }
  double baseline() const { return bottom_; }

  void frame(std::ostringstream& out) const {
    out << "<line x1=\"" << num(left_) << "\" y1=\"" << num(bottom_) << "\" x2=\"" << num(right_) << "\" y2=\""
        << num(bottom_) << "\" stroke=\"" << kInk << "\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << num(left_) << "\" y1=\"" << num(top_) << "\" x2=\"" << num(left_) << "\" y2=\""
        << num(bottom_) << "\" stroke=\"" << kInk << "\" stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double xv = x_.lo + (x_.hi - x_.lo) * t / 4.0;
      const double yv = y_.lo + (y_.hi - y_.lo) * t / 4.0;
      out << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(bottom_) << "\" x2=\"" << num(px(xv)) << "\" y2=\""
          << num(bottom_ + 4) << "\" stroke=\"" << kInk << "\"/>\n";
      out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(bottom_ + 16) << "\" font-size=\"10\" text-anchor=\"middle\" fill=\""
          << kInk << "\">" << escape(format_sig3(xv)) << "</text>\n";
      out << "<line x1=\"" << num(left_ - 4) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << num(left_) << "\" y2=\""
          << num(py(yv)) << "\" stroke=\"" << kInk << "\"/>\n";
      out << "<text x=\"" << num(left_ - 6) << "\" y=\"" << num(py(yv) + 3) << "\" font-size=\"10\" text-anchor=\"end\" fill=\""
          << kInk << "\">" << escape(format_sig3(yv)) << "</text>\n";
    }
    out << "<text x=\"" << num(spec_.width / 2) << "\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" fill=\"" << kInk
        << "\">" << escape(spec_.title) << "</text>\n";
    out << "<text x=\"" << num((left_ + right_) / 2) << "\" y=\"" << num(spec_.height - 12)
        << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"" << kInk << "\">" << escape(spec_.x_label) << "</text>\n";
    out << "<text x=\"14\" y=\"" << num((top_ + bottom_) / 2) << "\" font-size=\"12\" text-anchor=\"middle\" fill=\""
        << kInk << "\" transform=\"rotate(-90 14 " << num((top_ + bottom_) / 2) << ")\">" << escape(spec_.y_label)
        << "</text>\n";
  }

  void polyline(std::ostringstream& out, const Vector& x, const Vector& y, const char* color,
                const char* extra = "") const {
    out << "<path d=\"";
    for (std::size_t i = 0; i < x.size(); ++i) out << (i ? " L " : "M ") << num(px(x[i])) << " " << num(py(y[i]));
    out << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << extra << "/>\n";
  }

 private:
  const PlotSpec& spec_;
  Range x_, y_;
  double left_, right_, top_, bottom_;
};

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  spec.validate();
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(spec.width) << "\" height=\""
      << num(spec.height) << "\" viewBox=\"0 0 " << num(spec.width) << " " << num(spec.height) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << num(spec.width) << "\" height=\"" << num(spec.height)
      << "\" fill=\"#ffffff\"/>\n";
  const Json& s = spec.series;

  switch (spec.kind) {
    case PlotKind::Density:
    case PlotKind::RiskRejection:
    case PlotKind::UCC: {
      const Vector x = series_vector(s, "x"), y = series_vector(s, "y");
      Range yr = span_of({&y});
      yr.lo = std::min(yr.lo, 0.0);
      const Canvas c(spec, span_of({&x}), yr);
      c.frame(out);
      c.polyline(out, x, y, kBlue);
      break;
    }
    case PlotKind::Interval: {
      const Vector x = series_vector(s, "x"), yh = series_vector(s, "y_hat"), lo = series_vector(s, "lower"),
                   hi = series_vector(s, "upper");
      const bool has_truth = s.contains("truth");
      const Vector truth = has_truth ? series_vector(s, "truth") : Vector{};
      const Range xr = padded(x.front() - 0.5, x.back() + 0.5);
      const Canvas c(spec, xr, has_truth ? span_of({&lo, &hi, &truth}) : span_of({&lo, &hi}));
      c.frame(out);
      for (std::size_t i = 0; i < x.size(); ++i) {
        out << "<line x1=\"" << num(c.px(x[i])) << "\" y1=\"" << num(c.py(lo[i])) << "\" x2=\"" << num(c.px(x[i]))
            << "\" y2=\"" << num(c.py(hi[i])) << "\" stroke=\"" << kBlue << "\" stroke-width=\"2\"/>\n";
        out << "<circle cx=\"" << num(c.px(x[i])) << "\" cy=\"" << num(c.py(yh[i])) << "\" r=\"3.00\" fill=\"" << kBlue
            << "\"/>\n";
        if (has_truth)
          out << "<circle cx=\"" << num(c.px(x[i])) << "\" cy=\"" << num(c.py(truth[i])) << "\" r=\"2.50\" fill=\""
              << kRed << "\"/>\n";
      }
      break;
    }
    case PlotKind::QuantileDotPlot: {
      const Vector centers = series_vector(s, "bin_centers"), heights = series_vector(s, "stack_heights");
      const double w = s.at("bin_width").get<double>();
      const double max_h = std::max(1.0, *std::max_element(heights.begin(), heights.end()));
      const Range xr{centers.front() - w / 2, centers.back() + w / 2};
      const Canvas c(spec, xr, {0.0, max_h});
      c.frame(out);
      const double r = std::min(c.plot_width() / static_cast<double>(std::max<std::size_t>(1, centers.size())),
                                c.plot_height() / max_h) /
                       2.0 * 0.9;
      for (std::size_t b = 0; b < centers.size(); ++b)
        for (std::size_t k = 0; k < static_cast<std::size_t>(heights[b]); ++k)
          out << "<circle cx=\"" << num(c.px(centers[b])) << "\" cy=\""
              << num(c.baseline() - (2.0 * static_cast<double>(k) + 1.0) * r / 0.9) << "\" r=\"" << num(r)
              << "\" fill=\"" << kBlue << "\"/>\n";
      break;
    }
    case PlotKind::ReliabilityDiagram: {
      const Vector edges = series_vector(s, "bin_edges"), acc = series_vector(s, "accuracy"),
                   count = series_vector(s, "count");
      const Canvas c(spec, {0.0, 1.0}, {0.0, 1.0});
      c.frame(out);
      for (std::size_t b = 0; b < acc.size(); ++b) {
        if (count[b] <= 0) continue;
        const double x0 = c.px(edges[b]), x1 = c.px(edges[b + 1]);
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(c.py(acc[b])) << "\" width=\"" << num(x1 - x0)
            << "\" height=\"" << num(c.baseline() - c.py(acc[b])) << "\" fill=\"" << kGreen
            << "\" fill-opacity=\"0.6\" stroke=\"" << kInk << "\"/>\n";
      }
      out << "<path class=\"reference\" d=\"M " << num(c.px(0)) << " " << num(c.py(0)) << " L " << num(c.px(1)) << " "
          << num(c.py(1)) << "\" fill=\"none\" stroke=\"" << kGrid << "\" stroke-dasharray=\"4 4\"/>\n";
      break;
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace uq
