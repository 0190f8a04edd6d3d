#pragma once

#include <vector>

#include "fluxmut/net.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

/// Adam with bias correction. Moment buffers are congruent to the parameter
/// tensors they track; `step` counts completed updates.
struct OptimizerState {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> weight_m, weight_v;
  std::vector<Vector> bias_m, bias_v;
  long step = 0;
};

OptimizerState make_adam_state(const std::vector<const DenseLayer*>& params,
                               double learning_rate);
OptimizerState make_adam_state(const LayerStack& stack, double learning_rate);

/// One Adam update over an arbitrary layer collection. `weight_grads` and
/// `bias_grads` parallel `params`.
void adam_update(OptimizerState& state, const std::vector<DenseLayer*>& params,
                 const std::vector<const Matrix*>& weight_grads,
                 const std::vector<const Vector*>& bias_grads);

/// Convenience form for a single stack with grads from backward().
void adam_step(OptimizerState& state, LayerStack& stack,
               const StackGrads& grads);

}  // namespace fluxmut
