#include "fluxmut/adam.hpp"

#include <cmath>
#include <string>

#include "fluxmut/errors.hpp"

namespace fluxmut {

OptimizerState make_adam_state(const std::vector<const DenseLayer*>& params,
                               double learning_rate) {
  if (!(learning_rate > 0.0))
    throw ConfigError("adam: learning rate must be positive");
  OptimizerState st;
  st.learning_rate = learning_rate;
  for (const auto* layer : params) {
    st.weight_m.push_back(Matrix::Zero(layer->weights.rows(), layer->weights.cols()));
    st.weight_v.push_back(Matrix::Zero(layer->weights.rows(), layer->weights.cols()));
    st.bias_m.push_back(Vector::Zero(layer->bias.size()));
    st.bias_v.push_back(Vector::Zero(layer->bias.size()));
  }
  return st;
}

OptimizerState make_adam_state(const LayerStack& stack, double learning_rate) {
  std::vector<const DenseLayer*> params;
  for (const auto& l : stack.layers) params.push_back(&l);
  return make_adam_state(params, learning_rate);
}

namespace {

template <typename T>
void update_tensor(T& param, const T& grad, T& m, T& v,
                   const OptimizerState& st, double bc1, double bc2) {
  m = st.beta1 * m + (1.0 - st.beta1) * grad;
  v.array() = st.beta2 * v.array() + (1.0 - st.beta2) * grad.array().square();
  param.array() -= st.learning_rate * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + st.epsilon);
}

}  // namespace

void adam_update(OptimizerState& state, const std::vector<DenseLayer*>& params,
                 const std::vector<const Matrix*>& weight_grads,
                 const std::vector<const Vector*>& bias_grads) {
  const std::size_t n = params.size();
  if (state.weight_m.size() != n || weight_grads.size() != n ||
      bias_grads.size() != n)
    throw DimensionError("adam_update: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (params[i]->weights.rows() != weight_grads[i]->rows() ||
        params[i]->weights.cols() != weight_grads[i]->cols() ||
        params[i]->bias.size() != bias_grads[i]->size())
      throw DimensionError("adam_update: gradient shape mismatch at layer " +
                           std::to_string(i));
    if (state.weight_m[i].rows() != params[i]->weights.rows() ||
        state.weight_m[i].cols() != params[i]->weights.cols())
      throw DimensionError("adam_update: moment shape mismatch at layer " +
                           std::to_string(i));
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    update_tensor(params[i]->weights, *weight_grads[i], state.weight_m[i],
                  state.weight_v[i], state, bc1, bc2);
    update_tensor(params[i]->bias, *bias_grads[i], state.bias_m[i],
                  state.bias_v[i], state, bc1, bc2);
  }
}

void adam_step(OptimizerState& state, LayerStack& stack,
               const StackGrads& grads) {
  std::vector<DenseLayer*> params;
  std::vector<const Matrix*> wg;
  std::vector<const Vector*> bg;
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    params.push_back(&stack.layers[i]);
    wg.push_back(&grads.weights[i]);
    bg.push_back(&grads.bias[i]);
  }
  adam_update(state, params, wg, bg);
}

}  // namespace fluxmut
