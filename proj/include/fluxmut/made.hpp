#pragma once

#include <vector>

#include "fluxmut/net.hpp"
#include "fluxmut/rng.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

/// Masked conditioner producing per-dimension shift and log-scale from the
/// preceding dimensions plus the condition vector. Every layer input is
/// [activations ; conditions]; the condition rows of each mask are ones so
/// conditions reach all units, while the autoregressive rows enforce that
/// output i depends only on inputs with degree < i.
struct MadeBlock {
  Index dim = 0;       // autoregressive dimensions
  Index cond_dim = 0;  // condition inputs, unmasked
  std::vector<DenseLayer> hidden;
  std::vector<Matrix> hidden_mask;  // one per hidden layer, shaped like weights
  DenseLayer shift_head;
  DenseLayer scale_head;
  Matrix head_mask;  // strict mask shared by both heads
  std::vector<Index> permutation;          // applied after the AR transform
  std::vector<Index> inverse_permutation;  // derived
  double scale_clamp = 7.0;

  Index parameter_count() const;
};

std::vector<Index> reverse_permutation(Index dim);
std::vector<Index> invert_permutation(const std::vector<Index>& perm);

MadeBlock make_made_block(Index dim, Index cond_dim,
                          const std::vector<Index>& hidden_widths,
                          const std::vector<Index>& permutation,
                          double scale_clamp, Rng& rng);

/// Cache for one conditioner evaluation, consumed by the backward pass.
struct MadeTape {
  std::vector<Matrix> layer_inputs;  // [a ; k] per hidden layer and the heads
  std::vector<Matrix> pre;           // hidden pre-activations
  Matrix scale_raw;                  // before clamping
  Index batch = 0;
};

/// Evaluates shift and clamped log-scale for a batch (rows are samples).
void conditioner_forward(const MadeBlock& block, const Matrix& x,
                         const Matrix& cond, Matrix& shift, Matrix& scale,
                         MadeTape* tape = nullptr);

struct MadeGrads {
  std::vector<Matrix> hidden_w;
  std::vector<Vector> hidden_b;
  Matrix shift_w, scale_w;
  Vector shift_b, scale_b;
  Matrix input;  // dL/dx (autoregressive inputs only)
};

MadeGrads make_zero_grads(const MadeBlock& block);

/// Backpropagates head gradients through the masked trunk, accumulating into
/// `grads`; adds dL/dx into grads.input.
void conditioner_backward(const MadeBlock& block, const MadeTape& tape,
                          const Matrix& dshift, const Matrix& dscale,
                          MadeGrads& grads);

/// out.col(a) = in.col(perm[a])
Matrix permute_columns(const Matrix& in, const std::vector<Index>& perm);

}  // namespace fluxmut
