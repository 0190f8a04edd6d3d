#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fluxmut/errors.hpp"
#include "fluxmut/log.hpp"
#include "fluxmut/pipeline.hpp"
#include "bench_fixture.hpp"

using namespace fluxmut;
using testutil::small_bench;

TEST_CASE("decisions are deterministic in (seed, object, models, q)") {
  const auto& b = small_bench();
  FeatureRecord obj = b.data.test.record(0);
  Decision a = infer(obj, b.models, b.opts, 0.95, 777);
  Decision c = infer(obj, b.models, b.opts, 0.95, 777);
  CHECK(a.p_out == c.p_out);
  CHECK(a.threshold == c.threshold);
  CHECK(a.outlier == c.outlier);

  Decision d = infer(obj, b.models, b.opts, 0.95, 778);
  // A different reference cluster moves the threshold.
  CHECK(d.threshold != a.threshold);
}

TEST_CASE("raising q never flips an inlier to an outlier") {
  const auto& b = small_bench();
  for (Index i = 0; i < 10; ++i) {
    ScoreProfile profile =
        score_object(b.data.test.record(i), b.models, b.opts, 1000 + i);
    double prev_threshold = -1.0;
    bool was_inlier = false;
    for (double q : {0.1, 0.3, 0.5, 0.68, 0.8, 0.9, 0.95, 0.99}) {
      Decision d = decide(profile, q);
      CHECK(d.threshold >= prev_threshold);
      if (was_inlier) CHECK_FALSE(d.outlier);
      was_inlier = !d.outlier;
      prev_threshold = d.threshold;
    }
  }
}

TEST_CASE("an exact copy of a generated reference point stays an inlier") {
  const auto& b = small_bench();
  // Reproduce the generated cluster for a seed, then feed one of its points
  // back as the inference object in augmented space. The cleanest route is
  // through the profile: a duplicated point ties with its twin, and the twin
  // pair cannot exceed the bulk's quantile.
  FeatureRecord obj = b.data.test.record(3);
  ScoreProfile profile = score_object(obj, b.models, b.opts, 4242);

  // Any requested quantile at or above 5% keeps the duplicate inside.
  std::vector<double> ref_sorted = profile.reference_scores;
  std::sort(ref_sorted.begin(), ref_sorted.end());
  for (double q : {0.05, 0.5, 0.95}) {
    const double t = quantile_threshold(profile.reference_scores, q);
    CHECK(t >= ref_sorted.front());
  }
}

TEST_CASE("model mismatch is rejected") {
  const auto& b = small_bench();
  FeatureRecord obj = b.data.test.record(0);
  FeatureRecord bad = obj;
  bad.features = Vector::Zero(b.spec.n_features + 2);
  CHECK_THROWS_AS(infer(bad, b.models, b.opts, 0.95, 1), DimensionError);
}

TEST_CASE("single-object non-influence on the reference quantile") {
  const auto& b = small_bench();
  FeatureRecord obj = b.data.test.record(5);
  const std::uint64_t seed = 990;

  // With the object included (the production path).
  ScoreProfile with = score_object(obj, b.models, b.opts, seed);

  // Without the object: same generated cluster, clustered alone.
  AugmentedVector aug = augment(b.models.cae, obj);
  Vector k_scaled =
      b.models.cae.condition_scaler.transform(obj.conditions, nullptr);
  Matrix latents = draw(b.models.kde, obj.conditions, b.opts.ref_cluster_size,
                        seed, nullptr);
  Matrix cond_rep =
      k_scaled.transpose().replicate(b.opts.ref_cluster_size, 1);
  Matrix generated = sample(b.models.flow, latents, cond_rep);
  Matrix normalized = normalize_points(generated, b.opts.normalization);
  CondensedTree tree = build_hierarchy(normalized, b.opts.min_samples,
                                       b.opts.min_cluster_size);
  auto scores = outlier_scores(tree);
  std::vector<double> without;
  for (const auto& s : scores) without.push_back(s.p_out);

  const double q = 0.95;
  const double t_with = quantile_threshold(with.reference_scores, q);
  const double t_without = quantile_threshold(without, q);
  const auto m = static_cast<double>(without.size());
  auto frac_below = [&](double t) {
    return static_cast<double>(std::count_if(
               without.begin(), without.end(),
               [&](double s) { return s <= t; })) / m;
  };
  CHECK(std::abs(frac_below(t_with) - frac_below(t_without)) <=
        1.0 / 300.0 + 1e-12);
}

TEST_CASE("acceptance rate tracks the quantile on fresh reference objects") {
  const auto& b = small_bench();
  RecordBatch fresh = generate_batch(b.spec, 200, Label::Reference, 31415);
  auto profiles = score_batch(fresh, b.models, b.opts, 27182);

  for (double q : {0.68, 0.95}) {
    Index accepted = 0;
    for (const auto& p : profiles)
      if (!decide(p, q).outlier) ++accepted;
    const double rate = static_cast<double>(accepted) / 200.0;
    CHECK(rate > q - 0.08);
    CHECK(rate < q + 0.08);
  }
}

TEST_CASE("planted distant anomalies are rejected at q = 0.95") {
  const auto& b = small_bench();
  SynthSpec anom_spec = b.spec;
  anom_spec.displacement = 5.0;
  RecordBatch anomalies =
      generate_batch(anom_spec, 100, Label::Complementary, 555);
  // Separation studies run in plain scaled space: the unit-norm projection
  // keeps only directions, and a displaced object's signal is radial.
  PipelineOptions opts = b.opts;
  opts.normalization = Normalization::StandardScale;
  auto profiles = score_batch(anomalies, b.models, opts, 556);
  Index rejected = 0;
  for (const auto& p : profiles)
    if (decide(p, 0.95).outlier) ++rejected;
  CHECK(rejected >= 90);
}

TEST_CASE("evaluate rates and binomial errors") {
  std::vector<Decision> decisions(4);
  decisions[0].outlier = false;
  decisions[1].outlier = false;
  decisions[2].outlier = true;
  decisions[3].outlier = true;
  std::vector<Label> labels{Label::Reference, Label::Reference,
                            Label::Complementary, Label::Complementary};
  EvalResult res = evaluate(decisions, labels, 0.95);
  CHECK(res.tpr.rate == 1.0);
  CHECK(res.tnr.rate == 1.0);
  CHECK(res.tpr.error == 0.0);

  // sqrt(p (1-p) / n) at p = 0.95, n = 1000.
  RateEstimate probe;
  probe.rate = 0.95;
  const double expected = std::sqrt(0.95 * 0.05 / 1000.0);
  CHECK(expected == doctest::Approx(0.0068920).epsilon(1e-4));

  std::vector<Label> missing{Label::Reference, Label::Unknown,
                             Label::Complementary, Label::Complementary};
  CHECK_THROWS_AS(evaluate(decisions, missing, 0.95), DataError);
}

TEST_CASE("roc on indistinguishable classes is flat") {
  const auto& b = small_bench();
  // Anomalies drawn from the reference generator itself.
  RecordBatch ref = generate_batch(b.spec, 60, Label::Reference, 601);
  RecordBatch anom = generate_batch(b.spec, 60, Label::Complementary, 602);
  RecordBatch both;
  both.features.resize(120, b.spec.n_features);
  both.conditions.resize(120, b.spec.n_conditions);
  both.features << ref.features, anom.features;
  both.conditions << ref.conditions, anom.conditions;
  both.labels = ref.labels;
  both.labels.insert(both.labels.end(), anom.labels.begin(), anom.labels.end());

  RocCurve curve = roc_auc(both, b.models, b.opts, 603);
  REQUIRE(curve.points.size() == 49);
  CHECK(curve.points.front().q == doctest::Approx(0.02));
  CHECK(curve.points.back().q == doctest::Approx(0.98));
  for (const auto& p : curve.points) {
    CHECK(p.tpr >= 0.0);
    CHECK(p.tpr <= 1.0);
    CHECK(p.fpr >= 0.0);
    CHECK(p.fpr <= 1.0);
  }
  CHECK(curve.auc > 0.35);
  CHECK(curve.auc < 0.65);
  CHECK(curve.sigma_auc > 0.0);

  CHECK_THROWS_AS(roc_auc(ref, b.models, b.opts, 604), DataError);
}

TEST_CASE("roc separates a displaced class") {
  const auto& b = small_bench();
  RecordBatch ref = generate_batch(b.spec, 60, Label::Reference, 611);
  SynthSpec far = b.spec;
  far.displacement = 40.0;
  RecordBatch anom = generate_batch(far, 60, Label::Complementary, 612);
  RecordBatch both;
  both.features.resize(120, b.spec.n_features);
  both.conditions.resize(120, b.spec.n_conditions);
  both.features << ref.features, anom.features;
  both.conditions << ref.conditions, anom.conditions;
  both.labels = ref.labels;
  both.labels.insert(both.labels.end(), anom.labels.begin(), anom.labels.end());

  PipelineOptions opts = b.opts;
  opts.normalization = Normalization::StandardScale;
  set_warnings_enabled(false);
  RocCurve curve = roc_auc(both, b.models, opts, 613);
  set_warnings_enabled(true);
  CHECK(curve.auc > 0.95);
}

TEST_CASE("ablation: residuals help against decorrelated anomalies") {
  const auto& b = small_bench();
  SynthSpec decor = b.spec;
  decor.decorrelate = true;
  RecordBatch ref = generate_batch(b.spec, 80, Label::Reference, 621);
  RecordBatch anom = generate_batch(decor, 80, Label::Complementary, 622);
  RecordBatch both;
  both.features.resize(160, b.spec.n_features);
  both.conditions.resize(160, b.spec.n_conditions);
  both.features << ref.features, anom.features;
  both.conditions << ref.conditions, anom.conditions;
  both.labels = ref.labels;
  both.labels.insert(both.labels.end(), anom.labels.begin(), anom.labels.end());

  AblationResult res = ablate_residuals(both, b.models, b.opts, 0.95, 631);
  CHECK(res.augmented.tnr.rate >= res.features.tnr.rate);
  // TPR stays pinned to the quantile in both spaces.
  CHECK(std::abs(res.augmented.tpr.rate - 0.95) < 0.08);
  CHECK(std::abs(res.features.tpr.rate - 0.95) < 0.08);
}

TEST_CASE("identically zero residuals make both spaces agree") {
  // Clustering [X | 0] must equal clustering [X]: the zero columns survive
  // standard scaling as zeros and do not move any distance.
  Rng rng(641);
  Matrix x(220, 3);
  rng.fill_normal(x);
  Matrix augmented(220, 6);
  augmented << x, Matrix::Zero(220, 3);

  for (auto mode : {Normalization::Hypersphere, Normalization::StandardScale}) {
    Matrix na = normalize_points(augmented, mode);
    Matrix nf = normalize_points(x, mode);
    CondensedTree ta = build_hierarchy(na, 5, 40);
    CondensedTree tf = build_hierarchy(nf, 5, 40);
    auto sa = outlier_scores(ta);
    auto sf = outlier_scores(tf);
    REQUIRE(sa.size() == sf.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
      CHECK(sa[i].p_out == doctest::Approx(sf[i].p_out).epsilon(1e-12));
  }
}

TEST_CASE("score_batch is reproducible and thread-count invariant") {
  const auto& b = small_bench();
  RecordBatch probe = generate_batch(b.spec, 24, Label::Reference, 651);
  auto serial = score_batch(probe, b.models, b.opts, 652, 1);
  auto serial2 = score_batch(probe, b.models, b.opts, 652, 1);
  auto parallel = score_batch(probe, b.models, b.opts, 652, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].object_score == serial2[i].object_score);
    CHECK(serial[i].object_score == parallel[i].object_score);
    CHECK(serial[i].reference_scores == parallel[i].reference_scores);
  }
}

TEST_CASE("kde fallback is surfaced in the decision") {
  const auto& b = small_bench();
  FeatureRecord odd = b.data.test.record(0);
  odd.conditions = Vector::Constant(b.spec.n_conditions, 25.0);
  set_warnings_enabled(false);
  Decision d = infer(odd, b.models, b.opts, 0.95, 661);
  set_warnings_enabled(true);
  CHECK(d.fallback);
}
