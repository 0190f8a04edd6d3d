#pragma once

#include <cstdint>
#include <vector>

#include "fluxmut/net.hpp"
#include "fluxmut/records.hpp"
#include "fluxmut/scaler.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

struct CaeConfig {
  Index latent_dim = 6;
  std::vector<Index> encoder_hidden{64, 32};
  std::vector<Index> decoder_hidden{32, 64};
  double huber_delta = 1.0;
  double learning_rate = 5e-4;
  Index batch_size = 512;
  Index max_epochs = 200;
  Index patience = 20;
  double validation_fraction = 0.1;
  Activation hidden_activation = Activation::LeakyRelu;
  std::uint64_t seed = 17;
};

/// Conditional autoencoder. Both halves receive the (range-scaled) condition
/// vector by concatenation: encoder (N+L -> Z), decoder (Z+L -> N). Features
/// are standardized before encoding; reconstructions and residuals stay in
/// that scaled space for the downstream flow.
struct CaeModel {
  Index n_features = 0;
  Index n_conditions = 0;
  Index latent_dim = 0;
  StandardScaler feature_scaler;
  RangeScaler condition_scaler;
  LayerStack encoder;
  LayerStack decoder;
  std::vector<double> train_loss_history;
  std::vector<double> val_loss_history;
};

/// Reconstruction and residual (both in scaled feature space) plus the raw
/// conditions; the flow consumes [reconstruction ++ residual], length 2N.
struct AugmentedVector {
  Vector reconstruction;
  Vector residual;  // reconstruction - original
  Vector conditions;

  Vector augmented() const;
  Index dim() const { return reconstruction.size() + residual.size(); }
};

struct CaeScalers {
  StandardScaler feature;
  RangeScaler condition;
};

/// Standard scaling for features, [0,1] range scaling for conditions.
CaeScalers fit_scalers(const RecordBatch& records);

CaeModel make_cae(Index n_features, Index n_conditions, const CaeConfig& cfg,
                  const CaeScalers& scalers);

/// Trains on reference-class records with Huber reconstruction loss; keeps
/// the best validation checkpoint. `val` may be empty, in which case a
/// deterministic fraction of `records` is held out.
CaeModel train_cae(const RecordBatch& records, const CaeConfig& cfg,
                   const RecordBatch* val = nullptr);

AugmentedVector augment(const CaeModel& model, const FeatureRecord& record);

/// Batched augmented vectors, one row per record: [reconstruction, residual].
Matrix augment_batch(const CaeModel& model, const Matrix& features,
                     const Matrix& conditions);

/// Scaled conditions as used by the networks (clamped if out of range).
Matrix scale_conditions(const CaeModel& model, const Matrix& conditions,
                        bool* clamped = nullptr);

}  // namespace fluxmut
