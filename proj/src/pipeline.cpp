#include "fluxmut/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "fluxmut/errors.hpp"
#include "fluxmut/log.hpp"

namespace fluxmut {

ScoreProfile score_object(const FeatureRecord& object, const Models& models,
                          const PipelineOptions& opts, std::uint64_t seed) {
  if (object.features.size() != models.cae.n_features ||
      object.conditions.size() != models.cae.n_conditions)
    throw DimensionError("infer: record dimensions do not match the models");
  if (models.flow.dim != 2 * models.cae.n_features)
    throw DimensionError("infer: flow and cae dimensions disagree");
  if (models.kde.dim != models.flow.dim)
    throw DimensionError("infer: kde and flow dimensions disagree");
  if (opts.ref_cluster_size < 2 * opts.min_samples)
    warn("reference cluster size " + std::to_string(opts.ref_cluster_size) +
         " is small for min_samples " + std::to_string(opts.min_samples));

  AugmentedVector aug = augment(models.cae, object);
  Vector k_scaled =
      models.cae.condition_scaler.transform(object.conditions, nullptr);

  DrawInfo draw_info;
  Matrix latents =
      draw(models.kde, object.conditions, opts.ref_cluster_size, seed,
           &draw_info);
  Matrix cond_rep = k_scaled.transpose().replicate(opts.ref_cluster_size, 1);
  Matrix generated = sample(models.flow, latents, cond_rep);

  Matrix pool(opts.ref_cluster_size + 1, models.flow.dim);
  pool.topRows(opts.ref_cluster_size) = generated;
  pool.row(opts.ref_cluster_size) = aug.augmented().transpose();
  if (opts.features_only) {
    pool = pool.leftCols(models.cae.n_features).eval();
  }

  Matrix normalized = normalize_points(pool, opts.normalization);
  CondensedTree tree =
      build_hierarchy(normalized, opts.min_samples, opts.min_cluster_size);
  std::vector<OutlierScore> scores = outlier_scores(tree);

  ScoreProfile profile;
  profile.kde_fallback = draw_info.fallback;
  profile.extraction_fallback = tree.single_cluster_fallback;
  profile.object_cluster = scores.back().cluster;
  profile.object_score = scores.back().p_out;
  profile.reference_scores.reserve(
      static_cast<std::size_t>(opts.ref_cluster_size));
  for (Index i = 0; i < opts.ref_cluster_size; ++i)
    profile.reference_scores.push_back(
        scores[static_cast<std::size_t>(i)].p_out);
  if (tree.single_cluster_fallback)
    warn("cluster extraction found no cluster; treating the generated set as "
         "one cluster");
  return profile;
}

Decision decide(const ScoreProfile& profile, double q, Index object_id) {
  Decision d;
  d.object_id = object_id;
  d.q = q;
  d.p_out = profile.object_score;
  d.threshold = quantile_threshold(profile.reference_scores, q);
  d.outlier = profile.object_score > d.threshold;
  d.fallback = profile.kde_fallback;
  return d;
}

Decision infer(const FeatureRecord& object, const Models& models,
               const PipelineOptions& opts, double q, std::uint64_t seed,
               Index object_id) {
  return decide(score_object(object, models, opts, seed), q, object_id);
}

std::vector<ScoreProfile> score_batch(const RecordBatch& records,
                                      const Models& models,
                                      const PipelineOptions& opts,
                                      std::uint64_t master_seed, int threads) {
  const Index n = records.size();
  std::vector<ScoreProfile> profiles(static_cast<std::size_t>(n));
  Rng master(master_seed);

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    seeds[static_cast<std::size_t>(i)] =
        master.split(static_cast<std::uint64_t>(i)).next_u64();

  auto run_range = [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i)
      profiles[static_cast<std::size_t>(i)] =
          score_object(records.record(i), models, opts,
                       seeds[static_cast<std::size_t>(i)]);
  };

  if (threads <= 1 || n < 2) {
    run_range(0, n);
  } else {
    const int t = std::min<int>(threads, static_cast<int>(n));
    std::vector<std::thread> pool;
    const Index chunk = (n + t - 1) / t;
    for (int w = 0; w < t; ++w) {
      const Index lo = static_cast<Index>(w) * chunk;
      const Index hi = std::min<Index>(n, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return profiles;
}

std::vector<Decision> decide_batch(const std::vector<ScoreProfile>& profiles,
                                   double q) {
  std::vector<Decision> out;
  out.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i)
    out.push_back(decide(profiles[i], q, static_cast<Index>(i)));
  return out;
}

EvalResult evaluate(const std::vector<Decision>& decisions,
                    const std::vector<Label>& labels, double q) {
  if (decisions.size() != labels.size())
    throw DataError("evaluate: decisions and labels differ in length");
  Index n_ref = 0, n_anom = 0, accepted_ref = 0, rejected_anom = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    switch (labels[i]) {
      case Label::Reference:
        ++n_ref;
        if (!decisions[i].outlier) ++accepted_ref;
        break;
      case Label::Complementary:
        ++n_anom;
        if (decisions[i].outlier) ++rejected_anom;
        break;
      case Label::Unknown:
        throw DataError("evaluate: record " + std::to_string(i) +
                        " carries no label");
    }
  }
  if (n_ref == 0 && n_anom == 0) throw DataError("evaluate: no labeled rows");

  auto rate = [](Index hits, Index total) {
    RateEstimate r;
    r.count = total;
    if (total > 0) {
      r.rate = static_cast<double>(hits) / static_cast<double>(total);
      r.error = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(total));
    }
    return r;
  };
  EvalResult res;
  res.q = q;
  res.tpr = rate(accepted_ref, n_ref);
  res.tnr = rate(rejected_anom, n_anom);
  return res;
}

RocCurve roc_from_profiles(const std::vector<ScoreProfile>& profiles,
                           const std::vector<Label>& labels) {
  bool has_ref = false, has_anom = false;
  for (Label l : labels) {
    has_ref |= l == Label::Reference;
    has_anom |= l == Label::Complementary;
  }
  if (!has_ref || !has_anom)
    throw DataError("roc: both classes must be present");

  RocCurve curve;
  for (int step = 1; step <= 49; ++step) {
    const double q = 0.02 * step;
    auto decisions = decide_batch(profiles, q);
    EvalResult ev = evaluate(decisions, labels, q);
    RocPoint p;
    p.q = q;
    p.tpr = ev.tpr.rate;
    p.sigma_tpr = ev.tpr.error;
    p.fpr = 1.0 - ev.tnr.rate;  // anomaly acceptance
    // Same binomial count as the rejection rate.
    p.sigma_fpr = ev.tnr.error;
    curve.points.push_back(p);
  }

  // Trapezoid over FPR-sorted points with fixed endpoints, plus first-order
  // error propagation through the trapezoid sum.
  struct XY {
    double x, y, sx, sy;
  };
  std::vector<XY> pts;
  pts.push_back({0.0, 0.0, 0.0, 0.0});
  for (const auto& p : curve.points) pts.push_back({p.fpr, p.tpr, p.sigma_fpr, p.sigma_tpr});
  pts.push_back({1.0, 1.0, 0.0, 0.0});
  std::sort(pts.begin(), pts.end(), [](const XY& a, const XY& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });

  double auc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    auc += 0.5 * (pts[i + 1].x - pts[i].x) * (pts[i + 1].y + pts[i].y);
  double var = 0.0;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double dy = 0.5 * (pts[i + 1].x - pts[i - 1].x);  // dAUC/dy_i
    const double dx = 0.5 * (pts[i - 1].y - pts[i + 1].y);  // dAUC/dx_i
    var += dy * dy * pts[i].sy * pts[i].sy + dx * dx * pts[i].sx * pts[i].sx;
  }
  curve.auc = auc;
  curve.sigma_auc = std::sqrt(var);
  return curve;
}

RocCurve roc_auc(const RecordBatch& records, const Models& models,
                 const PipelineOptions& opts, std::uint64_t master_seed,
                 int threads) {
  auto profiles = score_batch(records, models, opts, master_seed, threads);
  return roc_from_profiles(profiles, records.labels);
}

AblationResult ablate_residuals(const RecordBatch& records,
                                const Models& models,
                                const PipelineOptions& opts, double q,
                                std::uint64_t master_seed, int threads) {
  PipelineOptions aug_opts = opts;
  aug_opts.features_only = false;
  PipelineOptions feat_opts = opts;
  feat_opts.features_only = true;

  AblationResult res;
  auto aug_profiles = score_batch(records, models, aug_opts, master_seed, threads);
  res.augmented = evaluate(decide_batch(aug_profiles, q), records.labels, q);
  auto feat_profiles =
      score_batch(records, models, feat_opts, master_seed, threads);
  res.features = evaluate(decide_batch(feat_profiles, q), records.labels, q);
  return res;
}

}  // namespace fluxmut
