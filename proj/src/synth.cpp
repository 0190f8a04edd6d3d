#include "fluxmut/synth.hpp"

#include <cmath>
#include <string>

#include "fluxmut/errors.hpp"
#include "fluxmut/log.hpp"
#include "fluxmut/rng.hpp"

namespace fluxmut {

namespace {

/// Fixed per-feature affine response to the conditions. Coefficients are a
/// deterministic function of the spec seed so datasets are reproducible.
struct ResponseMap {
  Vector bias;     // (N)
  Matrix weights;  // (N, L)
};

ResponseMap make_response(const SynthSpec& spec) {
  Rng rng(spec.seed ^ 0x73796E7468ULL);
  ResponseMap map;
  map.bias.resize(spec.n_features);
  map.weights.resize(spec.n_features, spec.n_conditions);
  for (Index i = 0; i < spec.n_features; ++i) {
    map.bias[i] = rng.uniform(-1.0, 1.0);
    for (Index j = 0; j < spec.n_conditions; ++j)
      map.weights(i, j) = rng.uniform(0.5, 2.0) * (rng.uniform() < 0.5 ? -1 : 1);
  }
  return map;
}

void validate(const SynthSpec& spec) {
  if (spec.n_features < 1 || spec.n_conditions < 1)
    throw ConfigError("synth: need at least one feature and one condition");
  if (spec.n_train < 1 || spec.n_val < 1 || spec.n_test < 1)
    throw ConfigError("synth: counts must be positive");
  if (!(spec.noise_sigma >= 0.0))
    throw ConfigError("synth: noise_sigma must be non-negative");
  if (spec.condition_lo.size() != 0) {
    if (spec.condition_lo.size() != spec.n_conditions ||
        spec.condition_hi.size() != spec.n_conditions)
      throw ConfigError("synth: condition range dimension mismatch");
    for (Index j = 0; j < spec.n_conditions; ++j)
      if (!(spec.condition_hi[j] > spec.condition_lo[j]))
        throw ConfigError("synth: invalid condition range on axis " +
                          std::to_string(j));
  }
}

Vector cond_lo(const SynthSpec& spec) {
  return spec.condition_lo.size() ? spec.condition_lo
                                  : Vector::Zero(spec.n_conditions);
}

Vector cond_hi(const SynthSpec& spec) {
  return spec.condition_hi.size() ? spec.condition_hi
                                  : Vector::Ones(spec.n_conditions);
}

RecordBatch draw_batch(const SynthSpec& spec, const ResponseMap& map,
                       Index count, Label label, Rng rng) {
  const Vector lo = cond_lo(spec);
  const Vector hi = cond_hi(spec);
  RecordBatch batch;
  batch.features.resize(count, spec.n_features);
  batch.conditions.resize(count, spec.n_conditions);
  batch.labels.assign(static_cast<std::size_t>(count), label);

  const bool anomalous = label == Label::Complementary;
  for (Index i = 0; i < count; ++i) {
    Vector k(spec.n_conditions);
    for (Index j = 0; j < spec.n_conditions; ++j)
      k[j] = rng.uniform(lo[j], hi[j]);
    Vector k_for_mean = k;
    if (anomalous && spec.decorrelate) {
      for (Index j = 0; j < spec.n_conditions; ++j)
        k_for_mean[j] = rng.uniform(lo[j], hi[j]);
    }
    Vector mean = map.bias + map.weights * k_for_mean;
    if (anomalous && spec.displacement != 0.0)
      mean.array() += spec.displacement * spec.noise_sigma;
    for (Index f = 0; f < spec.n_features; ++f)
      batch.features(i, f) = mean[f] + spec.noise_sigma * rng.normal();
    batch.conditions.row(i) = k.transpose();
  }
  return batch;
}

}  // namespace

RecordBatch generate_batch(const SynthSpec& spec, Index count, Label label,
                           std::uint64_t seed) {
  validate(spec);
  const ResponseMap map = make_response(spec);
  return draw_batch(spec, map, count, label, Rng(seed));
}

SynthData generate(const SynthSpec& spec) {
  validate(spec);
  const ResponseMap map = make_response(spec);
  Rng master(spec.seed);

  SynthData data;
  data.train = draw_batch(spec, map, spec.n_train, Label::Reference,
                          master.split(1));
  data.val =
      draw_batch(spec, map, spec.n_val, Label::Reference, master.split(2));

  RecordBatch test_ref = draw_batch(spec, map, spec.n_test, Label::Reference,
                                    master.split(3));
  RecordBatch test_anom = draw_batch(spec, map, spec.n_test,
                                     Label::Complementary, master.split(4));
  data.test.features.resize(2 * spec.n_test, spec.n_features);
  data.test.conditions.resize(2 * spec.n_test, spec.n_conditions);
  data.test.features << test_ref.features, test_anom.features;
  data.test.conditions << test_ref.conditions, test_anom.conditions;
  data.test.labels = test_ref.labels;
  data.test.labels.insert(data.test.labels.end(), test_anom.labels.begin(),
                          test_anom.labels.end());
  return data;
}

double perturb(double x, double xmin, double xmax, int sign, double effect) {
  if (!(xmin < xmax)) throw ConfigError("perturb: xmin must be below xmax");
  if (!(effect >= 0.0 && effect <= 1.0))
    throw ConfigError("perturb: effect fraction must lie in [0, 1]");
  if (x < xmin || x > xmax) {
    warn("perturb: value outside [xmin, xmax]; clamped");
    x = std::clamp(x, xmin, xmax);
  }
  const double range = xmax - xmin;
  const double s = sign >= 0 ? 1.0 : -1.0;
  return x + s * effect * (x - xmin) * (xmax - x) / (range * range);
}

Matrix perturb_features(const Matrix& features, int sign, double effect) {
  Matrix out(features.rows(), features.cols());
  for (Index j = 0; j < features.cols(); ++j) {
    const double xmin = features.col(j).minCoeff();
    const double xmax = features.col(j).maxCoeff();
    if (!(xmin < xmax))
      throw DataError("perturb: feature column " + std::to_string(j + 1) +
                      " is constant");
    for (Index i = 0; i < features.rows(); ++i)
      out(i, j) = perturb(features(i, j), xmin, xmax, sign, effect);
  }
  return out;
}

}  // namespace fluxmut
