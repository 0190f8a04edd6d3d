#pragma once

#include <cstdint>
#include <vector>

#include "fluxmut/made.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

struct FlowConfig {
  Index n_blocks = 12;
  std::vector<Index> hidden{128, 128};
  double learning_rate = 1e-4;
  Index batch_size = 512;
  Index max_epochs = 200;
  Index patience = 20;
  double scale_clamp = 7.0;
  double validation_fraction = 0.1;
  std::uint64_t seed = 17;
};

/// Stack of masked affine autoregressive bijections over the augmented space,
/// each followed by a fixed dimension permutation, with a standard Gaussian
/// base. Density evaluation is one pass per block; generation is sequential
/// over dimensions.
struct FlowModel {
  Index dim = 0;
  Index cond_dim = 0;
  std::vector<MadeBlock> blocks;
  std::vector<double> train_loss_history;
  std::vector<double> val_loss_history;

  Index parameter_count() const;
};

FlowModel make_flow(Index dim, Index cond_dim, const FlowConfig& cfg);

/// Exact conditional log-density, one autoregressive pass per block.
Vector log_prob(const FlowModel& model, const Matrix& x, const Matrix& cond);
double log_prob(const FlowModel& model, const Vector& x, const Vector& cond);

/// Data -> base space (single pass per block).
Matrix inverse(const FlowModel& model, const Matrix& x, const Matrix& cond);

/// Base -> data space (dim sequential sub-steps per block).
Matrix sample(const FlowModel& model, const Matrix& z, const Matrix& cond);

struct FlowGrads {
  std::vector<MadeGrads> blocks;
};

struct NllResult {
  double loss = 0.0;
  FlowGrads grads;
};

/// Negative mean log-likelihood and its parameter gradients.
NllResult nll_loss(const FlowModel& model, const Matrix& x, const Matrix& cond);

/// Trains on augmented vectors with scaled conditions; keeps the best
/// validation checkpoint.
FlowModel train_flow(const Matrix& x, const Matrix& cond,
                     const FlowConfig& cfg);

std::vector<DenseLayer*> flow_parameters(FlowModel& model);

}  // namespace fluxmut
