#pragma once

#include <cstdint>
#include <vector>

#include "fluxmut/cae.hpp"
#include "fluxmut/cluster.hpp"
#include "fluxmut/flow.hpp"
#include "fluxmut/kde.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

struct Models {
  CaeModel cae;
  FlowModel flow;
  BinnedKde kde;
};

struct PipelineOptions {
  Index ref_cluster_size = 1500;
  Index min_cluster_size = 1000;
  Index min_samples = 100;
  Normalization normalization = Normalization::Hypersphere;
  /// Cluster on the reconstruction dimensions only (residual ablation).
  bool features_only = false;
};

/// Outcome of clustering one object against its generated reference cluster:
/// the object's score plus the reference points' score distribution, from
/// which any quantile cut can be applied.
struct ScoreProfile {
  double object_score = 0.0;
  std::vector<double> reference_scores;
  bool kde_fallback = false;
  bool extraction_fallback = false;
  Index object_cluster = -1;
};

struct Decision {
  Index object_id = 0;
  double p_out = 0.0;
  double threshold = 0.0;
  double q = 0.0;
  bool outlier = false;
  bool fallback = false;
};

/// Full single-object pass: augment, draw latents at the object's
/// conditions, generate the reference cluster, cluster jointly with the
/// object included, score.
ScoreProfile score_object(const FeatureRecord& object, const Models& models,
                          const PipelineOptions& opts, std::uint64_t seed);

Decision decide(const ScoreProfile& profile, double q, Index object_id = 0);

Decision infer(const FeatureRecord& object, const Models& models,
               const PipelineOptions& opts, double q, std::uint64_t seed,
               Index object_id = 0);

/// Profiles for a record batch; per-object seeds split from the master seed
/// by record index, so parallel and serial runs agree.
std::vector<ScoreProfile> score_batch(const RecordBatch& records,
                                      const Models& models,
                                      const PipelineOptions& opts,
                                      std::uint64_t master_seed,
                                      int threads = 1);

struct RateEstimate {
  double rate = 0.0;
  double error = 0.0;  // sqrt(p(1-p)/n)
  Index count = 0;
};

struct EvalResult {
  double q = 0.0;
  RateEstimate tpr;  // reference acceptance
  RateEstimate tnr;  // complementary rejection
};

/// TPR/TNR with binomial errors for one quantile over labeled decisions.
EvalResult evaluate(const std::vector<Decision>& decisions,
                    const std::vector<Label>& labels, double q);

/// Applies a quantile to precomputed profiles.
std::vector<Decision> decide_batch(const std::vector<ScoreProfile>& profiles,
                                   double q);

struct RocPoint {
  double q = 0.0;
  double tpr = 0.0, sigma_tpr = 0.0;
  double fpr = 0.0, sigma_fpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // ascending q
  double auc = 0.0;
  double sigma_auc = 0.0;
};

/// Quantile sweep 0.02..0.98 in steps of 0.02 over labeled profiles; AUC by
/// trapezoid over FPR-sorted points with (0,0) and (1,1) appended, and its
/// error propagated from the per-point binomial uncertainties.
RocCurve roc_from_profiles(const std::vector<ScoreProfile>& profiles,
                           const std::vector<Label>& labels);

RocCurve roc_auc(const RecordBatch& records, const Models& models,
                 const PipelineOptions& opts, std::uint64_t master_seed,
                 int threads = 1);

struct AblationResult {
  EvalResult augmented;
  EvalResult features;
};

/// Runs the pipeline twice, clustering on all 2N dimensions and on the N
/// reconstruction dimensions only.
AblationResult ablate_residuals(const RecordBatch& records,
                                const Models& models,
                                const PipelineOptions& opts, double q,
                                std::uint64_t master_seed, int threads = 1);

}  // namespace fluxmut
