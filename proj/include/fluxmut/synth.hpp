#pragma once

#include <cstdint>

#include "fluxmut/records.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

/// Deterministic benchmark generator. Reference features follow a per-feature
/// affine map of the conditions plus Gaussian noise; anomalies displace the
/// conditional mean and/or break the feature-condition correlation while
/// keeping marginals.
struct SynthSpec {
  Index n_features = 6;
  Index n_conditions = 2;
  Vector condition_lo;  // defaults to zeros
  Vector condition_hi;  // defaults to ones
  double noise_sigma = 0.1;
  /// Shift of each anomaly feature mean, in units of noise_sigma.
  double displacement = 0.0;
  /// Anomaly features generated from an independent condition draw (the
  /// recorded conditions stay the true ones), so marginals match but the
  /// correlation with conditions is broken.
  bool decorrelate = false;
  Index n_train = 20000;
  Index n_val = 2000;
  Index n_test = 2000;  // per class
  std::uint64_t seed = 17;
};

struct SynthData {
  RecordBatch train;  // reference only
  RecordBatch val;    // reference only
  RecordBatch test;   // reference + anomalies, labeled
};

SynthData generate(const SynthSpec& spec);

/// Extra labeled batches from the same generator, e.g. fresh reference
/// objects for calibration studies.
RecordBatch generate_batch(const SynthSpec& spec, Index count, Label label,
                           std::uint64_t seed);

/// Bounded monotone rescaling of a value inside [xmin, xmax]:
/// x + sign * effect * (x - xmin) * (xmax - x) / (xmax - xmin)^2.
/// Endpoints are fixed points; out-of-range x clamps with a warning.
double perturb(double x, double xmin, double xmax, int sign, double effect);

/// Applies perturb columnwise using each feature's observed min/max.
Matrix perturb_features(const Matrix& features, int sign, double effect);

}  // namespace fluxmut
