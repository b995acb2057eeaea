#include "uqkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "uqkit/error.hpp"

namespace uq {

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorKind::DimensionMismatch,
          "matrix data length does not equal rows * cols");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == m.cols(), ErrorKind::DimensionMismatch, "ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::DimensionMismatch, "matmul shape mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), ErrorKind::DimensionMismatch, "matvec shape mismatch");
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

namespace {

bool try_factor(const Matrix& a, double jitter, double floor, Matrix& lower) {
  const std::size_t n = a.rows();
  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > floor) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

Cholesky::Cholesky(const Matrix& a, bool allow_jitter, double relative_pivot_floor) {
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "cholesky: matrix is not square");
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      require(std::abs(a(i, j) - a(j, i)) <= 1e-9 * std::max(scale, 1e-300),
              ErrorKind::NotPositiveDefinite, "cholesky: matrix is not symmetric");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  if (try_factor(a, 0.0, relative_pivot_floor * max_diag, lower_)) return;
  require(allow_jitter, ErrorKind::NotPositiveDefinite, "cholesky: matrix is singular or indefinite");
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
  jitter_ = 1e-8 * trace / static_cast<double>(n);
  if (jitter_ > 0.0 && try_factor(a, jitter_, 0.0, lower_)) return;
  fail(ErrorKind::NotPositiveDefinite, "cholesky: matrix is not positive definite after jitter retry");
}

Vector Cholesky::solve_lower(std::span<const double> b) const {
  const std::size_t n = size();
  require(b.size() == n, ErrorKind::DimensionMismatch, "cholesky solve: length mismatch");
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * y[k];
    y[i] = s / lower_(i, i);
  }
  return y;
}

Vector Cholesky::solve(std::span<const double> b) const {
  const std::size_t n = size();
  Vector x = solve_lower(b);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower_(k, ii) * x[k];
    x[ii] = s / lower_(ii, ii);
  }
  return x;
}

double Cholesky::log_det() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += std::log(lower_(i, i));
  return 2.0 * s;
}

Vector cholesky_solve(const Matrix& a, std::span<const double> b) { return Cholesky(a).solve(b); }

double log_det_cholesky(const Matrix& a) { return Cholesky(a).log_det(); }

double sorted_quantile(std::span<const double> sorted, double p) {
  require(!sorted.empty(), ErrorKind::EmptyInput, "quantile of empty input");
  require(p >= 0.0 && p <= 1.0, ErrorKind::ConfigError, "quantile level outside [0, 1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  if (lo >= n - 1) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(std::span<const double> values, double p) {
  require(!values.empty(), ErrorKind::EmptyInput, "quantile of empty input");
  Vector sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted_quantile(sorted, p);
}

double mean(std::span<const double> v) {
  require(!v.empty(), ErrorKind::EmptyInput, "mean of empty input");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::ConfigError, "normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  auto tail = [&](double q) {
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  };
  if (p < p_low) return tail(std::sqrt(-2.0 * std::log(p)));
  if (p > 1.0 - p_low) return -tail(std::sqrt(-2.0 * std::log1p(-p)));
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double central_z(double mass) {
  require(mass > 0.0 && mass < 1.0, ErrorKind::ConfigError, "interval mass must lie in (0, 1)");
  return normal_quantile(0.5 + 0.5 * mass);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double inverse_softplus(double y) {
  require(y > 0.0, ErrorKind::ConfigError, "inverse softplus needs a positive value");
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  require(n > 0, ErrorKind::ConfigError, "uniform_index needs n > 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

RngStream RngStream::substream(std::uint64_t index) const {
  std::uint64_t sm = seed_ ^ 0xD1B54A32D192ED03ULL;
  std::uint64_t mixed = splitmix64(sm);
  sm = mixed + index * 0x9E3779B97F4A7C15ULL;
  return RngStream(splitmix64(sm));
}

void OptimizerConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::ConfigError,
          "optimizer learning_rate must be positive");
  require(max_iters >= 1, ErrorKind::ConfigError, "optimizer max_iters must be >= 1");
  require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, ErrorKind::ConfigError,
          "optimizer moment decays must lie in (0, 1)");
  require(epsilon > 0.0, ErrorKind::ConfigError, "optimizer epsilon must be positive");
  require(!gradient_clip || *gradient_clip > 0.0, ErrorKind::ConfigError,
          "optimizer gradient_clip must be positive");
  require(lr_decay >= 0.0, ErrorKind::ConfigError, "optimizer lr_decay must be non-negative");
}

namespace {

[[noreturn]] void non_finite(std::size_t iteration) {
  std::ostringstream os;
  os << "objective or gradient became non-finite at iteration " << iteration;
  fail(ErrorKind::NonFiniteObjective, os.str());
}

}  // namespace

MinimizeResult minimize(const Objective& objective, Vector init, const OptimizerConfig& config,
                        RngStream& rng, std::size_t n_examples) {
  config.validate();
  const std::size_t dim = init.size();
  Vector x = std::move(init);
  Vector grad(dim), m(dim, 0.0), v(dim, 0.0);
  MinimizeResult result;
  result.trace.reserve(config.max_iters);

  const bool batched = config.batch_size > 0 && n_examples > 0 && config.batch_size < n_examples;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  if (batched) {
    order.resize(n_examples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
  }

  double b1t = 1.0, b2t = 1.0;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    StepContext ctx{it, {}, &rng};
    if (batched) {
      if (cursor >= n_examples) {
        rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t take = std::min(config.batch_size, n_examples - cursor);
      ctx.batch = std::span<const std::size_t>(order.data() + cursor, take);
      cursor += take;
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const double value = objective(x, grad, ctx);
    if (!std::isfinite(value)) non_finite(it);
    for (double g : grad)
      if (!std::isfinite(g)) non_finite(it);
    result.trace.push_back(value);

    if (config.gradient_clip) {
      double norm = std::sqrt(dot(grad, grad));
      if (norm > *config.gradient_clip) {
        const double scale = *config.gradient_clip / norm;
        for (double& g : grad) g *= scale;
      }
    }
    b1t *= config.beta1;
    b2t *= config.beta2;
    const double lr = config.learning_rate / (1.0 + config.lr_decay * static_cast<double>(it));
    for (std::size_t i = 0; i < dim; ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / (1.0 - b1t);
      const double vhat = v[i] / (1.0 - b2t);
      x[i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
  result.params = std::move(x);
  return result;
}

MinimizeResult minimize(const PlainObjective& objective, Vector init, const OptimizerConfig& config,
                        RngStream& rng) {
  Objective wrapped = [&](std::span<const double> x, std::span<double> g, const StepContext&) {
    return objective(x, g);
  };
  return minimize(wrapped, std::move(init), config, rng, 0);
}

double check_gradient(const PlainObjective& objective, std::span<const double> point) {
  const std::size_t dim = point.size();
  Vector analytic(dim, 0.0), scratch(dim, 0.0);
  const double f0 = objective(point, analytic);
  if (!std::isfinite(f0)) fail(ErrorKind::NonFiniteObjective, "check_gradient: non-finite objective");
  Vector x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(point[i]));
    x[i] = point[i] + h;
    const double fp = objective(x, scratch);
    x[i] = point[i] - h;
    const double fm = objective(x, scratch);
    x[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(ErrorKind::NonFiniteObjective, "check_gradient: non-finite objective near point");
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / (1e-8 + std::abs(numeric)));
  }
  return worst;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::TaskMismatch: return "TaskMismatch";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::GridExhausted: return "GridExhausted";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::CorruptPayload: return "CorruptPayload";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::AllZeroWidth: return "AllZeroWidth";
    case ErrorKind::TargetUnreachable: return "TargetUnreachable";
    case ErrorKind::OneClassOnly: return "OneClassOnly";
    case ErrorKind::NotBinary: return "NotBinary";
    case ErrorKind::ModeTaskMismatch: return "ModeTaskMismatch";
    case ErrorKind::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::UnsupportedKind: return "UnsupportedKind";
    case ErrorKind::DataError: return "DataError";
  }
  return "Unknown";
}

}  // namespace uq
