#include "fluxmut/net.hpp"

#include <cmath>
#include <string>

#include "fluxmut/errors.hpp"

namespace fluxmut {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::LeakyRelu: return "leaky_relu";
  }
  return "linear";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "tanh") return Activation::Tanh;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

Index LayerStack::input_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim();
}

Index LayerStack::output_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim();
}

Index LayerStack::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

DenseLayer make_dense_layer(Index in, Index out, Activation act, Rng& rng) {
  DenseLayer layer;
  layer.weights.resize(in, out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  rng.fill_uniform(layer.weights, -bound, bound);
  layer.bias = Vector::Zero(out);
  layer.activation = act;
  return layer;
}

LayerStack make_stack(Index in, const std::vector<Index>& hidden, Index out,
                      Activation hidden_act, Activation out_act, Rng& rng) {
  LayerStack stack;
  Index prev = in;
  for (Index width : hidden) {
    stack.layers.push_back(make_dense_layer(prev, width, hidden_act, rng));
    prev = width;
  }
  stack.layers.push_back(make_dense_layer(prev, out, out_act, rng));
  return stack;
}

Matrix apply_activation(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::Linear: return pre;
    case Activation::Tanh: return pre.array().tanh().matrix();
    case Activation::LeakyRelu:
      return pre.array().max(pre.array() * kLeakySlope).matrix();
  }
  return pre;
}

Matrix activation_derivative(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::Linear: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::Tanh:
      return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::LeakyRelu: {
      Eigen::ArrayXXd ones = Eigen::ArrayXXd::Ones(pre.rows(), pre.cols());
      return (pre.array() > 0.0).select(ones, kLeakySlope).matrix();
    }
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

Matrix forward(const LayerStack& stack, const Matrix& input,
               ForwardTape* tape) {
  if (stack.layers.empty()) throw UsageError("forward on empty stack");
  if (input.cols() != stack.input_dim())
    throw DimensionError("forward: input has " + std::to_string(input.cols()) +
                         " columns, stack expects " +
                         std::to_string(stack.input_dim()));
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
    tape->shape_sig.clear();
    tape->batch = input.rows();
  }
  Matrix a = input;
  for (const auto& layer : stack.layers) {
    Matrix pre = (a * layer.weights).rowwise() + layer.bias.transpose();
    if (tape) {
      tape->inputs.push_back(std::move(a));
      tape->pre.push_back(pre);
      tape->shape_sig.emplace_back(layer.in_dim(), layer.out_dim());
    }
    a = apply_activation(layer.activation, pre);
  }
  return a;
}

StackGrads backward(const LayerStack& stack, const ForwardTape& tape,
                    const Matrix& output_grad) {
  const auto n = stack.layers.size();
  if (tape.inputs.size() != n || tape.shape_sig.size() != n)
    throw UsageError("backward: tape does not match stack");
  for (std::size_t l = 0; l < n; ++l) {
    if (tape.shape_sig[l].first != stack.layers[l].in_dim() ||
        tape.shape_sig[l].second != stack.layers[l].out_dim())
      throw UsageError("backward: stale tape (layer shape changed)");
  }
  if (output_grad.rows() != tape.batch ||
      output_grad.cols() != stack.output_dim())
    throw DimensionError("backward: output_grad shape mismatch");

  StackGrads grads;
  grads.weights.resize(n);
  grads.bias.resize(n);
  Matrix g = output_grad;
  for (std::size_t l = n; l-- > 0;) {
    const auto& layer = stack.layers[l];
    Matrix gpre =
        g.cwiseProduct(activation_derivative(layer.activation, tape.pre[l]));
    grads.weights[l] = tape.inputs[l].transpose() * gpre;
    grads.bias[l] = gpre.colwise().sum();
    g = gpre * layer.weights.transpose();
  }
  grads.input = std::move(g);
  return grads;
}

void ensure_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite())
    throw NumericError(what + ": non-finite values encountered");
}

void ensure_finite(double v, const std::string& what) {
  if (!std::isfinite(v))
    throw NumericError(what + ": non-finite value encountered");
}

}  // namespace fluxmut
