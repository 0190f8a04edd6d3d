#include "fluxmut/made.hpp"

#include <algorithm>
#include <string>

#include "fluxmut/errors.hpp"

namespace fluxmut {

std::vector<Index> reverse_permutation(Index dim) {
  std::vector<Index> p(static_cast<std::size_t>(dim));
  for (Index i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] = dim - 1 - i;
  return p;
}

std::vector<Index> invert_permutation(const std::vector<Index>& perm) {
  std::vector<Index> inv(perm.size());
  for (std::size_t a = 0; a < perm.size(); ++a)
    inv[static_cast<std::size_t>(perm[a])] = static_cast<Index>(a);
  return inv;
}

Matrix permute_columns(const Matrix& in, const std::vector<Index>& perm) {
  Matrix out(in.rows(), in.cols());
  for (std::size_t a = 0; a < perm.size(); ++a)
    out.col(static_cast<Index>(a)) = in.col(perm[a]);
  return out;
}

Index MadeBlock::parameter_count() const {
  Index n = 0;
  for (const auto& l : hidden) n += l.parameter_count();
  return n + shift_head.parameter_count() + scale_head.parameter_count();
}

namespace {

/// Degrees for hidden units cycle over 1..dim-1 (all 1 when dim == 1).
std::vector<Index> hidden_degrees(Index width, Index dim) {
  std::vector<Index> d(static_cast<std::size_t>(width));
  const Index span = std::max<Index>(1, dim - 1);
  for (Index u = 0; u < width; ++u)
    d[static_cast<std::size_t>(u)] = 1 + (u % span);
  return d;
}

Matrix build_mask(const std::vector<Index>& in_deg,
                  const std::vector<Index>& out_deg, Index cond_dim,
                  bool strict) {
  const Index rows = static_cast<Index>(in_deg.size()) + cond_dim;
  const Index cols = static_cast<Index>(out_deg.size());
  Matrix m = Matrix::Ones(rows, cols);
  for (std::size_t i = 0; i < in_deg.size(); ++i) {
    for (std::size_t o = 0; o < out_deg.size(); ++o) {
      const bool allow = strict ? out_deg[o] > in_deg[i] : out_deg[o] >= in_deg[i];
      if (!allow) m(static_cast<Index>(i), static_cast<Index>(o)) = 0.0;
    }
  }
  return m;
}

}  // namespace

MadeBlock make_made_block(Index dim, Index cond_dim,
                          const std::vector<Index>& hidden_widths,
                          const std::vector<Index>& permutation,
                          double scale_clamp, Rng& rng) {
  if (dim < 1) throw ConfigError("made: dim must be >= 1");
  if (static_cast<Index>(permutation.size()) != dim)
    throw DimensionError("made: permutation length mismatch");
  MadeBlock block;
  block.dim = dim;
  block.cond_dim = cond_dim;
  block.permutation = permutation;
  block.inverse_permutation = invert_permutation(permutation);
  block.scale_clamp = scale_clamp;

  std::vector<Index> in_deg(static_cast<std::size_t>(dim));
  for (Index i = 0; i < dim; ++i) in_deg[static_cast<std::size_t>(i)] = i + 1;

  std::vector<Index> prev_deg = in_deg;
  Index prev_width = dim;
  for (Index width : hidden_widths) {
    auto deg = hidden_degrees(width, dim);
    block.hidden.push_back(make_dense_layer(prev_width + cond_dim, width,
                                            Activation::Tanh, rng));
    block.hidden_mask.push_back(build_mask(prev_deg, deg, cond_dim, false));
    prev_deg = std::move(deg);
    prev_width = width;
  }

  std::vector<Index> out_deg = in_deg;
  block.head_mask = build_mask(prev_deg, out_deg, cond_dim, true);
  block.shift_head =
      make_dense_layer(prev_width + cond_dim, dim, Activation::Linear, rng);
  block.scale_head =
      make_dense_layer(prev_width + cond_dim, dim, Activation::Linear, rng);
  return block;
}

namespace {

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

void conditioner_forward(const MadeBlock& block, const Matrix& x,
                         const Matrix& cond, Matrix& shift, Matrix& scale,
                         MadeTape* tape) {
  if (x.cols() != block.dim)
    throw DimensionError("made: input has " + std::to_string(x.cols()) +
                         " columns, block expects " + std::to_string(block.dim));
  if (cond.cols() != block.cond_dim || cond.rows() != x.rows())
    throw DimensionError("made: condition shape mismatch");

  if (tape) {
    tape->layer_inputs.clear();
    tape->pre.clear();
    tape->batch = x.rows();
  }

  Matrix a = x;
  for (std::size_t l = 0; l < block.hidden.size(); ++l) {
    const auto& layer = block.hidden[l];
    Matrix input = concat_cols(a, cond);
    Matrix masked = layer.weights.cwiseProduct(block.hidden_mask[l]);
    Matrix pre = (input * masked).rowwise() + layer.bias.transpose();
    if (tape) {
      tape->layer_inputs.push_back(input);
      tape->pre.push_back(pre);
    }
    a = apply_activation(layer.activation, pre);
  }

  Matrix head_in = concat_cols(a, cond);
  if (tape) tape->layer_inputs.push_back(head_in);

  shift = (head_in * block.shift_head.weights.cwiseProduct(block.head_mask))
              .rowwise() +
          block.shift_head.bias.transpose();
  Matrix scale_raw =
      (head_in * block.scale_head.weights.cwiseProduct(block.head_mask))
          .rowwise() +
      block.scale_head.bias.transpose();
  if (tape) tape->scale_raw = scale_raw;
  scale =
      scale_raw.array().max(-block.scale_clamp).min(block.scale_clamp).matrix();
}

MadeGrads make_zero_grads(const MadeBlock& block) {
  MadeGrads g;
  for (const auto& l : block.hidden) {
    g.hidden_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    g.hidden_b.push_back(Vector::Zero(l.bias.size()));
  }
  g.shift_w = Matrix::Zero(block.shift_head.weights.rows(),
                           block.shift_head.weights.cols());
  g.scale_w = Matrix::Zero(block.scale_head.weights.rows(),
                           block.scale_head.weights.cols());
  g.shift_b = Vector::Zero(block.dim);
  g.scale_b = Vector::Zero(block.dim);
  return g;
}

void conditioner_backward(const MadeBlock& block, const MadeTape& tape,
                          const Matrix& dshift, const Matrix& dscale,
                          MadeGrads& grads) {
  if (tape.layer_inputs.size() != block.hidden.size() + 1)
    throw UsageError("made backward: tape does not match block");

  // Clamp passes no gradient outside its range.
  Matrix dscale_raw = (tape.scale_raw.array().abs() < block.scale_clamp)
                          .select(dscale.array(), 0.0)
                          .matrix();

  const Matrix& head_in = tape.layer_inputs.back();
  Matrix shift_masked = block.shift_head.weights.cwiseProduct(block.head_mask);
  Matrix scale_masked = block.scale_head.weights.cwiseProduct(block.head_mask);

  grads.shift_w +=
      (head_in.transpose() * dshift).cwiseProduct(block.head_mask);
  grads.shift_b += dshift.colwise().sum();
  grads.scale_w +=
      (head_in.transpose() * dscale_raw).cwiseProduct(block.head_mask);
  grads.scale_b += dscale_raw.colwise().sum();

  Matrix dhead_in = dshift * shift_masked.transpose() +
                    dscale_raw * scale_masked.transpose();
  const Index trunk_width = head_in.cols() - block.cond_dim;
  Matrix g = dhead_in.leftCols(trunk_width);

  for (std::size_t l = block.hidden.size(); l-- > 0;) {
    const auto& layer = block.hidden[l];
    Matrix gpre =
        g.cwiseProduct(activation_derivative(layer.activation, tape.pre[l]));
    grads.hidden_w[l] += (tape.layer_inputs[l].transpose() * gpre)
                             .cwiseProduct(block.hidden_mask[l]);
    grads.hidden_b[l] += gpre.colwise().sum();
    Matrix masked = layer.weights.cwiseProduct(block.hidden_mask[l]);
    Matrix dinput = gpre * masked.transpose();
    g = dinput.leftCols(dinput.cols() - block.cond_dim);
  }

  if (grads.input.size() == 0)
    grads.input = Matrix::Zero(tape.batch, block.dim);
  grads.input += g;
}

}  // namespace fluxmut
