#include "fluxmut/cae.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fluxmut/adam.hpp"
#include "fluxmut/errors.hpp"
#include "fluxmut/loss.hpp"
#include "fluxmut/rng.hpp"

namespace fluxmut {

Vector AugmentedVector::augmented() const {
  Vector out(reconstruction.size() + residual.size());
  out << reconstruction, residual;
  return out;
}

CaeScalers fit_scalers(const RecordBatch& records) {
  CaeScalers s;
  s.feature = fit_standard_scaler(records.features, "f");
  s.condition = fit_range_scaler(records.conditions, "k");
  return s;
}

CaeModel make_cae(Index n_features, Index n_conditions, const CaeConfig& cfg,
                  const CaeScalers& scalers) {
  if (cfg.latent_dim < 1) throw ConfigError("cae: latent_dim must be >= 1");
  CaeModel m;
  m.n_features = n_features;
  m.n_conditions = n_conditions;
  m.latent_dim = cfg.latent_dim;
  m.feature_scaler = scalers.feature;
  m.condition_scaler = scalers.condition;
  Rng rng(cfg.seed);
  m.encoder = make_stack(n_features + n_conditions, cfg.encoder_hidden,
                         cfg.latent_dim, cfg.hidden_activation,
                         Activation::Linear, rng);
  m.decoder = make_stack(cfg.latent_dim + n_conditions, cfg.decoder_hidden,
                         n_features, cfg.hidden_activation, Activation::Linear,
                         rng);
  return m;
}

namespace {

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

struct EpochLoss {
  double value = 0.0;
  Index elements = 0;
};

/// Forward pass in scaled space. Returns reconstruction (scaled).
Matrix cae_forward(const CaeModel& m, const Matrix& xs, const Matrix& ks,
                   ForwardTape* enc_tape, ForwardTape* dec_tape) {
  Matrix z = forward(m.encoder, concat_cols(xs, ks), enc_tape);
  return forward(m.decoder, concat_cols(z, ks), dec_tape);
}

double huber_batch(const Matrix& residual, double delta, Matrix* grad) {
  double total = 0.0;
  if (grad) grad->resize(residual.rows(), residual.cols());
  for (Index i = 0; i < residual.rows(); ++i) {
    for (Index j = 0; j < residual.cols(); ++j) {
      const double r = residual(i, j);
      const double a = std::abs(r);
      if (a <= delta) {
        total += 0.5 * r * r;
        if (grad) (*grad)(i, j) = r;
      } else {
        total += delta * (a - 0.5 * delta);
        if (grad) (*grad)(i, j) = r > 0.0 ? delta : -delta;
      }
    }
  }
  return total / static_cast<double>(residual.size());
}

double validation_loss(const CaeModel& m, const Matrix& xs, const Matrix& ks,
                       double delta) {
  Matrix recon = cae_forward(m, xs, ks, nullptr, nullptr);
  return huber_batch(recon - xs, delta, nullptr);
}

}  // namespace

CaeModel train_cae(const RecordBatch& records, const CaeConfig& cfg,
                   const RecordBatch* val) {
  if (records.size() < cfg.batch_size)
    throw DataError("train_cae: " + std::to_string(records.size()) +
                    " records is fewer than batch size " +
                    std::to_string(cfg.batch_size));

  CaeScalers scalers = fit_scalers(records);
  CaeModel model = make_cae(records.features.cols(), records.conditions.cols(),
                            cfg, scalers);

  Matrix xs_all = scalers.feature.transform(records.features);
  Matrix ks_all = scalers.condition.transform(records.conditions);

  Rng rng(cfg.seed ^ 0x7261696E6572ULL);
  std::vector<Index> order(static_cast<std::size_t>(records.size()));
  std::iota(order.begin(), order.end(), Index{0});

  Matrix xs_val, ks_val;
  Matrix xs_train, ks_train;
  if (val) {
    xs_val = scalers.feature.transform(val->features);
    ks_val = scalers.condition.transform(val->conditions);
    xs_train = xs_all;
    ks_train = ks_all;
  } else {
    // Deterministic holdout split.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(
                                  rng.uniform_index(static_cast<Index>(i)))]);
    Index n_val = std::max<Index>(1, static_cast<Index>(
        cfg.validation_fraction * static_cast<double>(records.size())));
    n_val = std::min(n_val, records.size() - cfg.batch_size);
    if (n_val < 1) n_val = 1;
    const Index n_train = records.size() - n_val;
    xs_train.resize(n_train, xs_all.cols());
    ks_train.resize(n_train, ks_all.cols());
    xs_val.resize(n_val, xs_all.cols());
    ks_val.resize(n_val, ks_all.cols());
    for (Index i = 0; i < n_train; ++i) {
      xs_train.row(i) = xs_all.row(order[static_cast<std::size_t>(i)]);
      ks_train.row(i) = ks_all.row(order[static_cast<std::size_t>(i)]);
    }
    for (Index i = 0; i < n_val; ++i) {
      xs_val.row(i) = xs_all.row(order[static_cast<std::size_t>(n_train + i)]);
      ks_val.row(i) = ks_all.row(order[static_cast<std::size_t>(n_train + i)]);
    }
  }

  OptimizerState enc_opt = make_adam_state(model.encoder, cfg.learning_rate);
  OptimizerState dec_opt = make_adam_state(model.decoder, cfg.learning_rate);

  LayerStack best_encoder = model.encoder;
  LayerStack best_decoder = model.decoder;
  double best_val = validation_loss(model, xs_val, ks_val, cfg.huber_delta);
  Index epochs_since_best = 0;

  const Index n_train = xs_train.rows();
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
      Matrix xb(cfg.batch_size, xs_train.cols());
      Matrix kb(cfg.batch_size, ks_train.cols());
      for (Index r = 0; r < cfg.batch_size; ++r) {
        xb.row(r) = xs_train.row(idx[static_cast<std::size_t>(start + r)]);
        kb.row(r) = ks_train.row(idx[static_cast<std::size_t>(start + r)]);
      }

      ForwardTape enc_tape, dec_tape;
      Matrix recon = cae_forward(model, xb, kb, &enc_tape, &dec_tape);
      ensure_finite(recon, "train_cae: reconstruction");

      Matrix grad;
      epoch_loss += huber_batch(recon - xb, cfg.huber_delta, &grad);
      n_batches += 1;
      grad /= static_cast<double>(recon.size());

      StackGrads dec_grads = backward(model.decoder, dec_tape, grad);
      Matrix dz = dec_grads.input.leftCols(model.latent_dim);
      StackGrads enc_grads = backward(model.encoder, enc_tape, dz);

      adam_step(dec_opt, model.decoder, dec_grads);
      adam_step(enc_opt, model.encoder, enc_grads);
    }

    model.train_loss_history.push_back(
        n_batches > 0 ? epoch_loss / static_cast<double>(n_batches) : 0.0);
    const double vloss = validation_loss(model, xs_val, ks_val, cfg.huber_delta);
    model.val_loss_history.push_back(vloss);

    if (vloss < best_val) {
      best_val = vloss;
      best_encoder = model.encoder;
      best_decoder = model.decoder;
      epochs_since_best = 0;
    } else {
      epochs_since_best += 1;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  model.encoder = std::move(best_encoder);
  model.decoder = std::move(best_decoder);
  return model;
}

Matrix scale_conditions(const CaeModel& model, const Matrix& conditions,
                        bool* clamped) {
  return model.condition_scaler.transform(conditions, clamped);
}

Matrix augment_batch(const CaeModel& model, const Matrix& features,
                     const Matrix& conditions) {
  if (features.cols() != model.n_features ||
      conditions.cols() != model.n_conditions)
    throw DimensionError("augment: record dimensions do not match the model");
  if (!features.allFinite() || !conditions.allFinite())
    throw NumericError("augment: non-finite input");
  Matrix xs = model.feature_scaler.transform(features);
  Matrix ks = model.condition_scaler.transform(conditions);
  Matrix z = forward(model.encoder, concat_cols(xs, ks), nullptr);
  Matrix recon = forward(model.decoder, concat_cols(z, ks), nullptr);
  Matrix out(features.rows(), 2 * model.n_features);
  out << recon, (recon - xs);
  return out;
}

AugmentedVector augment(const CaeModel& model, const FeatureRecord& record) {
  Matrix aug = augment_batch(model, record.features.transpose(),
                             record.conditions.transpose());
  AugmentedVector v;
  v.reconstruction = aug.row(0).head(model.n_features).transpose();
  v.residual = aug.row(0).tail(model.n_features).transpose();
  v.conditions = record.conditions;
  return v;
}

}  // namespace fluxmut
