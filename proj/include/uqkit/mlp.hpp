#pragma once

#include <string>
#include <vector>

#include "uqkit/numerics.hpp"

namespace uq {

enum class Activation { Tanh, Relu };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

// Fully connected network with a linear output layer. Parameters are one flat
// vector: for every layer the (out x in) row-major weights, then the biases
// when `bias` is set.
struct MlpShape {
  std::size_t inputs = 1;
  std::vector<std::size_t> hidden;
  std::size_t outputs = 1;
  Activation activation = Activation::Tanh;
  bool bias = true;

  std::size_t layers() const { return hidden.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? inputs : hidden[l - 1]; }
  std::size_t layer_out(std::size_t l) const { return l == hidden.size() ? outputs : hidden[l]; }
  std::size_t num_params() const;
};

// Fan-in scaled uniform initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in));
// biases start at zero.
Vector mlp_init(const MlpShape& shape, RngStream& rng);

// Forward/backward scratch for a single example.
class MlpPass {
 public:
  explicit MlpPass(const MlpShape& shape);

  // Returns the output activations (length shape.outputs).
  std::span<const double> forward(std::span<const double> params, std::span<const double> x);
  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output) for the
  // example seen by the last forward call.
  void backward(std::span<const double> params, std::span<const double> d_output, std::span<double> grad);

 private:
  const MlpShape& shape_;
  std::vector<Vector> acts_;  // acts_[0] = input, acts_[l+1] = layer l output
  std::vector<Vector> deltas_;
};

}  // namespace uq
