#include "uqkit/mlp.hpp"

#include <cmath>

#include "uqkit/error.hpp"

namespace uq {

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  fail(ErrorKind::ConfigError, "unknown activation '" + name + "'");
}

std::size_t MlpShape::num_params() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers(); ++l) total += layer_out(l) * layer_in(l) + (bias ? layer_out(l) : 0);
  return total;
}

Vector mlp_init(const MlpShape& shape, RngStream& rng) {
  Vector params(shape.num_params(), 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    const std::size_t in = shape.layer_in(l), out = shape.layer_out(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k) params[offset + k] = rng.uniform(-bound, bound);
    offset += in * out + (shape.bias ? out : 0);
  }
  return params;
}

MlpPass::MlpPass(const MlpShape& shape) : shape_(shape) {
  acts_.resize(shape.layers() + 1);
  deltas_.resize(shape.layers());
  acts_[0].resize(shape.inputs);
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    acts_[l + 1].resize(shape.layer_out(l));
    deltas_[l].resize(shape.layer_out(l));
  }
}

std::span<const double> MlpPass::forward(std::span<const double> params, std::span<const double> x) {
  std::copy(x.begin(), x.end(), acts_[0].begin());
  std::size_t offset = 0;
  const std::size_t last = shape_.layers() - 1;
  for (std::size_t l = 0; l < shape_.layers(); ++l) {
    const std::size_t in = shape_.layer_in(l), out = shape_.layer_out(l);
    const double* w = params.data() + offset;
    const double* b = shape_.bias ? w + in * out : nullptr;
    const Vector& a = acts_[l];
    Vector& z = acts_[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      double s = b ? b[o] : 0.0;
      const double* wo = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += wo[i] * a[i];
      if (l != last) s = shape_.activation == Activation::Tanh ? std::tanh(s) : (s > 0.0 ? s : 0.0);
      z[o] = s;
    }
    offset += in * out + (shape_.bias ? out : 0);
  }
  return acts_.back();
}

void MlpPass::backward(std::span<const double> params, std::span<const double> d_output, std::span<double> grad) {
  const std::size_t L = shape_.layers();
  std::vector<std::size_t> offsets(L);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offsets[l] = offset;
    offset += shape_.layer_in(l) * shape_.layer_out(l) + (shape_.bias ? shape_.layer_out(l) : 0);
  }
  std::copy(d_output.begin(), d_output.end(), deltas_[L - 1].begin());
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = shape_.layer_in(l), out = shape_.layer_out(l);
    const double* w = params.data() + offsets[l];
    double* gw = grad.data() + offsets[l];
    double* gb = shape_.bias ? gw + in * out : nullptr;
    const Vector& a = acts_[l];
    const Vector& delta = deltas_[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* go = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) go[i] += d * a[i];
      if (gb) gb[o] += d;
    }
    if (l == 0) break;
    Vector& prev = deltas_[l - 1];
    for (std::size_t i = 0; i < in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o) s += w[o * in + i] * delta[o];
      const double act = a[i];
      prev[i] = shape_.activation == Activation::Tanh ? s * (1.0 - act * act) : (act > 0.0 ? s : 0.0);
    }
  }
}

}  // namespace uq
