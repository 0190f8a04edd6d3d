#pragma once

// Shared desk-scale benchmark: synthetic conditional data, trained cae and
// flow, binned kde, and pipeline options sized for fast tests.

#include "fluxmut/model_io.hpp"
#include "fluxmut/pipeline.hpp"
#include "fluxmut/synth.hpp"

namespace testutil {

using namespace fluxmut;

struct Bench {
  SynthSpec spec;
  SynthData data;
  Models models;
  PipelineOptions opts;
};

inline Bench build_bench(Index n_features, Index n_conditions, Index n_train,
                         Index ref_cluster_size, Index min_cluster_size,
                         Index min_samples, std::uint64_t seed) {
  Bench b;
  b.spec.n_features = n_features;
  b.spec.n_conditions = n_conditions;
  b.spec.noise_sigma = 0.1;
  b.spec.n_train = n_train;
  b.spec.n_val = std::max<Index>(200, n_train / 10);
  b.spec.n_test = 200;
  b.spec.seed = seed;
  b.data = generate(b.spec);

  CaeConfig ccfg;
  ccfg.latent_dim = 1;
  ccfg.encoder_hidden = {16, 8};
  ccfg.decoder_hidden = {8, 16};
  ccfg.learning_rate = 3e-3;
  ccfg.batch_size = 256;
  ccfg.max_epochs = 80;
  ccfg.patience = 15;
  ccfg.seed = seed + 1;
  b.models.cae = train_cae(b.data.train, ccfg, &b.data.val);

  Matrix aug = augment_batch(b.models.cae, b.data.train.features,
                             b.data.train.conditions);
  Matrix ks = scale_conditions(b.models.cae, b.data.train.conditions);
  FlowConfig fcfg;
  fcfg.n_blocks = 3;
  fcfg.hidden = {24, 24};
  fcfg.learning_rate = 1e-3;
  fcfg.batch_size = 256;
  fcfg.max_epochs = 60;
  fcfg.patience = 12;
  fcfg.seed = seed + 2;
  b.models.flow = train_flow(aug, ks, fcfg);

  BinGrid grid = make_uniform_grid(Vector::Zero(n_conditions),
                                   Vector::Ones(n_conditions),
                                   std::vector<Index>(
                                       static_cast<std::size_t>(n_conditions),
                                       Index{4}));
  b.models.kde = build_kde(b.models.cae, b.models.flow, b.data.train, grid);

  b.opts.ref_cluster_size = ref_cluster_size;
  b.opts.min_cluster_size = min_cluster_size;
  b.opts.min_samples = min_samples;
  b.opts.normalization = Normalization::Hypersphere;
  return b;
}

/// Small, fast configuration shared by the pipeline unit tests.
inline const Bench& small_bench() {
  static Bench b = build_bench(4, 2, 6000, 300, 200, 15, 2024);
  return b;
}

}  // namespace testutil
