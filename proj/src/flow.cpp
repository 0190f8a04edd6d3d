#include "fluxmut/flow.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "fluxmut/adam.hpp"
#include "fluxmut/errors.hpp"

namespace fluxmut {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

Index FlowModel::parameter_count() const {
  Index n = 0;
  for (const auto& b : blocks) n += b.parameter_count();
  return n;
}

FlowModel make_flow(Index dim, Index cond_dim, const FlowConfig& cfg) {
  if (cfg.n_blocks < 1) throw ConfigError("flow: need at least one bijection");
  FlowModel m;
  m.dim = dim;
  m.cond_dim = cond_dim;
  Rng rng(cfg.seed ^ 0x666C6F77ULL);
  auto perm = reverse_permutation(dim);
  for (Index b = 0; b < cfg.n_blocks; ++b)
    m.blocks.push_back(make_made_block(dim, cond_dim, cfg.hidden, perm,
                                       cfg.scale_clamp, rng));
  return m;
}

namespace {

void check_dims(const FlowModel& model, const Matrix& x, const Matrix& cond) {
  if (x.cols() != model.dim)
    throw DimensionError("flow: input has " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(model.dim));
  if (cond.cols() != model.cond_dim || cond.rows() != x.rows())
    throw DimensionError("flow: condition shape mismatch");
}

/// One block of the density-direction pass. Returns the base-side output and
/// adds the block's log-det contribution to `ldj`.
Matrix block_inverse(const MadeBlock& block, const Matrix& y,
                     const Matrix& cond, Vector& ldj, MadeTape* tape,
                     Matrix* w_out, Matrix* shift_out, Matrix* scale_out) {
  Matrix w = permute_columns(y, block.inverse_permutation);
  Matrix shift, scale;
  conditioner_forward(block, w, cond, shift, scale, tape);
  Matrix v = (w - shift).cwiseProduct((-scale.array()).exp().matrix());
  ldj -= scale.rowwise().sum();
  if (w_out) *w_out = std::move(w);
  if (shift_out) *shift_out = std::move(shift);
  if (scale_out) *scale_out = std::move(scale);
  return v;
}

}  // namespace

Matrix inverse(const FlowModel& model, const Matrix& x, const Matrix& cond) {
  check_dims(model, x, cond);
  Vector ldj = Vector::Zero(x.rows());
  Matrix cur = x;
  for (std::size_t j = model.blocks.size(); j-- > 0;) {
    cur = block_inverse(model.blocks[j], cur, cond, ldj, nullptr, nullptr,
                        nullptr, nullptr);
    if (!cur.allFinite())
      throw NumericError("flow inverse: non-finite values at block " +
                         std::to_string(j));
  }
  return cur;
}

Vector log_prob(const FlowModel& model, const Matrix& x, const Matrix& cond) {
  check_dims(model, x, cond);
  Vector ldj = Vector::Zero(x.rows());
  Matrix cur = x;
  for (std::size_t j = model.blocks.size(); j-- > 0;) {
    cur = block_inverse(model.blocks[j], cur, cond, ldj, nullptr, nullptr,
                        nullptr, nullptr);
    if (!cur.allFinite())
      throw NumericError("flow log_prob: non-finite values at block " +
                         std::to_string(j));
  }
  const double c = -0.5 * static_cast<double>(model.dim) * kLog2Pi;
  Vector base = -0.5 * cur.array().square().rowwise().sum();
  return (base.array() + c + ldj.array()).matrix();
}

double log_prob(const FlowModel& model, const Vector& x, const Vector& cond) {
  return log_prob(model, Matrix(x.transpose()), Matrix(cond.transpose()))[0];
}

namespace {

/// Pre-masked, pre-split weights for the generative loop. The condition
/// contribution to every layer is constant across the per-dimension
/// sub-steps, so it is computed once per block.
struct BlockSampler {
  std::vector<Matrix> w_a;      // masked trunk weights, activation rows
  std::vector<Matrix> k_base;   // cond * W_k + bias, per hidden layer
  Matrix shift_a, scale_a;      // head weights, activation rows
  Matrix shift_base, scale_base;  // cond * W_k + bias for the heads

  BlockSampler(const MadeBlock& block, const Matrix& cond) {
    const Index dim = block.dim;
    Index prev = dim;
    for (std::size_t l = 0; l < block.hidden.size(); ++l) {
      if (block.hidden[l].activation != Activation::Tanh)
        throw UsageError("sample: made trunk must use tanh");
      const Matrix masked =
          block.hidden[l].weights.cwiseProduct(block.hidden_mask[l]);
      w_a.push_back(masked.topRows(prev));
      k_base.push_back(((cond * masked.bottomRows(block.cond_dim)).rowwise() +
                        block.hidden[l].bias.transpose())
                           .eval());
      prev = block.hidden[l].out_dim();
    }
    const Matrix shift_masked =
        block.shift_head.weights.cwiseProduct(block.head_mask);
    const Matrix scale_masked =
        block.scale_head.weights.cwiseProduct(block.head_mask);
    shift_a = shift_masked.topRows(prev);
    scale_a = scale_masked.topRows(prev);
    shift_base = ((cond * shift_masked.bottomRows(block.cond_dim)).rowwise() +
                  block.shift_head.bias.transpose())
                     .eval();
    scale_base = ((cond * scale_masked.bottomRows(block.cond_dim)).rowwise() +
                  block.scale_head.bias.transpose())
                     .eval();
  }

  /// Shift and clamped log-scale for output column i only.
  void column(const MadeBlock& block, const Matrix& w, Index i, Vector& shift,
              Vector& scale, Matrix& a) const {
    a = w;
    for (std::size_t l = 0; l < w_a.size(); ++l)
      a = ((a * w_a[l] + k_base[l]).array().tanh()).matrix();
    shift = a * shift_a.col(i) + shift_base.col(i);
    scale = a * scale_a.col(i) + scale_base.col(i);
    scale = scale.array().max(-block.scale_clamp).min(block.scale_clamp);
  }
};

}  // namespace

Matrix sample(const FlowModel& model, const Matrix& z, const Matrix& cond) {
  check_dims(model, z, cond);
  Matrix cur = z;
  Vector shift, scale;
  Matrix a;
  for (std::size_t j = 0; j < model.blocks.size(); ++j) {
    const auto& block = model.blocks[j];
    const BlockSampler sampler(block, cond);
    Matrix w = Matrix::Zero(cur.rows(), block.dim);
    for (Index i = 0; i < block.dim; ++i) {
      sampler.column(block, w, i, shift, scale, a);
      w.col(i).array() =
          shift.array() + cur.col(i).array() * scale.array().exp();
    }
    cur = permute_columns(w, block.permutation);
    if (!cur.allFinite())
      throw NumericError("flow sample: non-finite values at block " +
                         std::to_string(j));
  }
  return cur;
}

NllResult nll_loss(const FlowModel& model, const Matrix& x,
                   const Matrix& cond) {
  check_dims(model, x, cond);
  if (x.rows() == 0) throw DataError("nll_loss: empty batch");
  const Index batch = x.rows();
  const std::size_t n_blocks = model.blocks.size();

  // Density pass, keeping per-block tapes. Blocks are consumed last-to-first.
  std::vector<MadeTape> tapes(n_blocks);
  std::vector<Matrix> w_cache(n_blocks), shift_cache(n_blocks),
      scale_cache(n_blocks), v_cache(n_blocks);
  Vector ldj = Vector::Zero(batch);
  Matrix cur = x;
  for (std::size_t j = n_blocks; j-- > 0;) {
    cur = block_inverse(model.blocks[j], cur, cond, ldj, &tapes[j], &w_cache[j],
                        &shift_cache[j], &scale_cache[j]);
    if (!cur.allFinite())
      throw NumericError("nll_loss: non-finite values at block " +
                         std::to_string(j));
    v_cache[j] = cur;
  }

  const double c = -0.5 * static_cast<double>(model.dim) * kLog2Pi;
  const double mean_base =
      (-0.5 * cur.array().square().rowwise().sum()).mean() + c;
  NllResult out;
  out.loss = -(mean_base + ldj.mean());

  out.grads.blocks.reserve(n_blocks);
  for (const auto& b : model.blocks) out.grads.blocks.push_back(make_zero_grads(b));

  const double inv_batch = 1.0 / static_cast<double>(batch);
  // dL/dz for L = mean(0.5*||z||^2 + ... ).
  Matrix g = cur * inv_batch;
  for (std::size_t j = 0; j < n_blocks; ++j) {
    const auto& block = model.blocks[j];
    const Matrix expneg = (-scale_cache[j].array()).exp().matrix();
    Matrix dw_direct = g.cwiseProduct(expneg);
    Matrix dshift = -dw_direct;
    // Path through v = (w - shift) * exp(-scale), plus the log-det term
    // (+mean of scale sums in the loss).
    Matrix dscale = -g.cwiseProduct(v_cache[j]);
    dscale.array() += inv_batch;

    MadeGrads& bg = out.grads.blocks[j];
    bg.input = Matrix::Zero(batch, block.dim);
    conditioner_backward(block, tapes[j], dshift, dscale, bg);
    Matrix dw_total = dw_direct + bg.input;
    bg.input = dw_total;
    g = permute_columns(dw_total, block.permutation);
  }
  return out;
}

std::vector<DenseLayer*> flow_parameters(FlowModel& model) {
  std::vector<DenseLayer*> params;
  for (auto& b : model.blocks) {
    for (auto& l : b.hidden) params.push_back(&l);
    params.push_back(&b.shift_head);
    params.push_back(&b.scale_head);
  }
  return params;
}

namespace {

std::vector<const Matrix*> grad_weight_ptrs(FlowGrads& grads) {
  std::vector<const Matrix*> ptrs;
  for (auto& bg : grads.blocks) {
    for (auto& w : bg.hidden_w) ptrs.push_back(&w);
    ptrs.push_back(&bg.shift_w);
    ptrs.push_back(&bg.scale_w);
  }
  return ptrs;
}

std::vector<const Vector*> grad_bias_ptrs(FlowGrads& grads) {
  std::vector<const Vector*> ptrs;
  for (auto& bg : grads.blocks) {
    for (auto& b : bg.hidden_b) ptrs.push_back(&b);
    ptrs.push_back(&bg.shift_b);
    ptrs.push_back(&bg.scale_b);
  }
  return ptrs;
}

double validation_nll(const FlowModel& model, const Matrix& x,
                      const Matrix& cond) {
  return -log_prob(model, x, cond).mean();
}

}  // namespace

FlowModel train_flow(const Matrix& x, const Matrix& cond,
                     const FlowConfig& cfg) {
  if (x.rows() < cfg.batch_size)
    throw DataError("train_flow: " + std::to_string(x.rows()) +
                    " records is fewer than batch size " +
                    std::to_string(cfg.batch_size));
  FlowModel model = make_flow(x.cols(), cond.cols(), cfg);

  Rng rng(cfg.seed ^ 0x74726E666C6FULL);
  const Index n = x.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(
                                rng.uniform_index(static_cast<Index>(i)))]);

  Index n_val = std::max<Index>(
      1, static_cast<Index>(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::min(n_val, n - cfg.batch_size);
  if (n_val < 1) n_val = 1;
  const Index n_train = n - n_val;

  Matrix xt(n_train, x.cols()), kt(n_train, cond.cols());
  Matrix xv(n_val, x.cols()), kv(n_val, cond.cols());
  for (Index i = 0; i < n_train; ++i) {
    xt.row(i) = x.row(order[static_cast<std::size_t>(i)]);
    kt.row(i) = cond.row(order[static_cast<std::size_t>(i)]);
  }
  for (Index i = 0; i < n_val; ++i) {
    xv.row(i) = x.row(order[static_cast<std::size_t>(n_train + i)]);
    kv.row(i) = cond.row(order[static_cast<std::size_t>(n_train + i)]);
  }

  auto params = flow_parameters(model);
  std::vector<const DenseLayer*> cparams(params.begin(), params.end());
  OptimizerState opt = make_adam_state(cparams, cfg.learning_rate);

  std::vector<MadeBlock> best_blocks = model.blocks;
  double best_val = validation_nll(model, xv, kv);
  Index epochs_since_best = 0;

  std::vector<Index> idx(static_cast<std::size_t>(n_train));
  std::iota(idx.begin(), idx.end(), Index{0});

  for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(
                                rng.uniform_index(static_cast<Index>(i)))]);
    double epoch_loss = 0.0;
    Index n_batches = 0;
    for (Index start = 0; start + cfg.batch_size <= n_train;
         start += cfg.batch_size) {
      Matrix xb(cfg.batch_size, x.cols());
      Matrix kb(cfg.batch_size, cond.cols());
      for (Index r = 0; r < cfg.batch_size; ++r) {
        xb.row(r) = xt.row(idx[static_cast<std::size_t>(start + r)]);
        kb.row(r) = kt.row(idx[static_cast<std::size_t>(start + r)]);
      }
      NllResult res = nll_loss(model, xb, kb);
      epoch_loss += res.loss;
      n_batches += 1;
      adam_update(opt, params, grad_weight_ptrs(res.grads),
                  grad_bias_ptrs(res.grads));
    }
    model.train_loss_history.push_back(
        n_batches > 0 ? epoch_loss / static_cast<double>(n_batches) : 0.0);
    const double vloss = validation_nll(model, xv, kv);
    model.val_loss_history.push_back(vloss);
    if (vloss < best_val) {
      best_val = vloss;
      best_blocks = model.blocks;
      epochs_since_best = 0;
    } else {
      epochs_since_best += 1;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  model.blocks = std::move(best_blocks);
  return model;
}

}  // namespace fluxmut
