#pragma once

#include <string>
#include <vector>

#include "fluxmut/types.hpp"

namespace fluxmut {

enum class Normalization { Hypersphere, StandardScale };

Normalization normalization_from_name(const std::string& name);
const char* normalization_name(Normalization n);

/// Standard-scales columns; in hypersphere mode additionally projects each
/// row onto the unit sphere.
Matrix normalize_points(const Matrix& points, Normalization mode);

/// Distance to the min_samples-th nearest neighbor, self excluded.
Vector core_distances(const Matrix& points, Index min_samples);

/// max(core(a), core(b), d(a, b)) accessor over a point set.
class MutualReachability {
 public:
  MutualReachability(const Matrix& points, const Vector& cores);
  double operator()(Index a, Index b) const;

 private:
  const Matrix& points_;
  const Vector& cores_;
};

struct MstEdge {
  Index a = 0;
  Index b = 0;
  double weight = 0.0;
};

/// Prim's algorithm over mutual-reachability weights, O(M^2).
std::vector<MstEdge> minimum_spanning_tree(const Matrix& points,
                                           const Vector& cores);

/// Cluster hierarchy after pruning splits whose smaller side is below
/// min_cluster_size. Cluster ids start at 0 (root); lambda = 1/distance with
/// distances floored at 1e-12.
struct CondensedTree {
  Index n_points = 0;
  Index min_samples = 0;
  Index min_cluster_size = 0;

  Index n_clusters = 0;
  std::vector<Index> cluster_parent;   // -1 for root
  std::vector<double> lambda_birth;    // per cluster
  std::vector<double> cluster_size;    // points in subtree

  std::vector<double> point_lambda;    // departure density per point
  std::vector<Index> point_parent;     // cluster each point fell out of

  std::vector<Index> selected;         // extracted cluster ids
  std::vector<Index> point_cluster;    // assignment, -1 = noise
  bool single_cluster_fallback = false;

  double mst_total_weight = 0.0;
};

CondensedTree build_hierarchy(const Matrix& points, Index min_samples,
                              Index min_cluster_size);

struct OutlierScore {
  double p_out = 0.0;
  Index cluster = -1;  // assignment, -1 = noise
};

/// GLOSH-style scores: for a point departing at lambda_p from a cluster whose
/// subtree peaks at lambda_max, p_out = 1 - lambda_p / lambda_max in [0, 1].
std::vector<OutlierScore> outlier_scores(const CondensedTree& tree);

/// Nearest-rank empirical quantile: smallest score s with
/// count(<= s) / M >= q.
double quantile_threshold(const std::vector<double>& scores, double q);

}  // namespace fluxmut
