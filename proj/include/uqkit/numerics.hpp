#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace uq {

using Vector = std::vector<double>;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vector data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const Vector& data() const noexcept { return data_; }
  Vector& data() noexcept { return data_; }

  bool all_finite() const;
  Matrix transpose() const;
  Matrix select_rows(std::span<const std::size_t> indices) const;
  Vector column(std::size_t c) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> v);

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// On a failed pivot the factorization is retried once with
// 1e-8 * trace(A) / n added to the diagonal; the added amount is recorded.
// With allow_jitter false, any pivot at or below relative_pivot_floor times
// the largest diagonal entry fails immediately.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& a, bool allow_jitter = true, double relative_pivot_floor = 0.0);

  Vector solve(std::span<const double> b) const;
  // Solves L x = b (forward substitution only).
  Vector solve_lower(std::span<const double> b) const;
  double log_det() const;
  double jitter() const noexcept { return jitter_; }
  std::size_t size() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

Vector cholesky_solve(const Matrix& a, std::span<const double> b);
double log_det_cholesky(const Matrix& a);

// Linear interpolation between order statistics at zero-indexed position
// p * (n - 1).
double empirical_quantile(std::span<const double> values, double p);
// Same rule on data that is already sorted ascending.
double sorted_quantile(std::span<const double> sorted, double p);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for a single value.
double stddev(std::span<const double> v);

// Standard normal inverse CDF (Acklam's rational approximation, absolute
// error below 1.15e-9 on (0, 1)).
double normal_quantile(double p);
double normal_pdf(double x);
double normal_cdf(double x);
// z such that the central interval mean +/- z * std has the given mass.
double central_z(double mass);

double softplus(double x);
double sigmoid(double x);
double inverse_softplus(double y);

// xoshiro256** seeded through splitmix64. Identical seeds give identical
// sequences on every platform; uniform doubles use the top 53 bits and
// normals use the Box-Muller transform without caching.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  // Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }
  // Independent stream keyed by (seed, index); does not advance this stream.
  RngStream substream(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

struct OptimizerConfig {
  double learning_rate = 1e-2;
  std::size_t max_iters = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> gradient_clip;
  // 0 means full batch.
  std::size_t batch_size = 0;
  // Step size at iteration t is learning_rate / (1 + lr_decay * t).
  double lr_decay = 0.0;

  void validate() const;
};

struct StepContext {
  std::size_t iteration = 0;
  // Indices of the current mini-batch; empty for full-batch steps.
  std::span<const std::size_t> batch;
  RngStream* rng = nullptr;
};

// Returns the objective value and writes the gradient into `grad`.
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad, const StepContext& ctx)>;
using PlainObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct MinimizeResult {
  Vector params;
  Vector trace;
};

// Adaptive-moment first-order minimizer with bias correction. When
// config.batch_size > 0 and n_examples > 0, every epoch draws a seeded
// permutation of [0, n_examples) and steps through it in mini-batches.
MinimizeResult minimize(const Objective& objective, Vector init, const OptimizerConfig& config,
                        RngStream& rng, std::size_t n_examples = 0);
MinimizeResult minimize(const PlainObjective& objective, Vector init, const OptimizerConfig& config,
                        RngStream& rng);

// Central finite differences with h = 1e-5 * (1 + |x_i|); returns the max over
// coordinates of |analytic - numeric| / (1e-8 + |numeric|).
double check_gradient(const PlainObjective& objective, std::span<const double> point);

}  // namespace uq
