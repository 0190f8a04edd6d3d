#pragma once

#include <utility>
#include <vector>

#include "fluxmut/rng.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

enum class Activation { Linear, Tanh, LeakyRelu };

inline constexpr double kLeakySlope = 0.01;

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One affine layer. Rows of a batch are samples: out = act(x * W + b).
struct DenseLayer {
  Matrix weights;  // (in_dim, out_dim)
  Vector bias;     // (out_dim)
  Activation activation = Activation::Linear;

  Index in_dim() const { return weights.rows(); }
  Index out_dim() const { return weights.cols(); }
  Index parameter_count() const { return weights.size() + bias.size(); }
};

struct LayerStack {
  std::vector<DenseLayer> layers;

  Index input_dim() const;
  Index output_dim() const;
  /// Weights plus biases, summed over layers.
  Index parameter_count() const;
};

/// Uniform fan-in-scaled init, bound sqrt(6 / fan_in); biases zero.
DenseLayer make_dense_layer(Index in, Index out, Activation act, Rng& rng);
LayerStack make_stack(Index in, const std::vector<Index>& hidden, Index out,
                      Activation hidden_act, Activation out_act, Rng& rng);

Matrix apply_activation(Activation act, const Matrix& pre);
/// Elementwise derivative of the activation, evaluated at the pre-activation.
Matrix activation_derivative(Activation act, const Matrix& pre);

/// Cache produced by forward(); consumed by backward(). Carries the layer
/// shape signature so a tape cannot be replayed against a different stack.
struct ForwardTape {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  std::vector<std::pair<Index, Index>> shape_sig;
  Index batch = 0;
};

Matrix forward(const LayerStack& stack, const Matrix& input,
               ForwardTape* tape = nullptr);

struct StackGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  Matrix input;  // dL/dinput, for chaining
};

StackGrads backward(const LayerStack& stack, const ForwardTape& tape,
                    const Matrix& output_grad);

}  // namespace fluxmut
