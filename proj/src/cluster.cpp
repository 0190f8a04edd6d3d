#include "fluxmut/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fluxmut/errors.hpp"
#include "fluxmut/log.hpp"

namespace fluxmut {

namespace {
constexpr double kDistanceFloor = 1e-12;
}

Normalization normalization_from_name(const std::string& name) {
  if (name == "hypersphere") return Normalization::Hypersphere;
  if (name == "standard" || name == "standard-scale")
    return Normalization::StandardScale;
  throw ConfigError("unknown normalization mode '" + name + "'");
}

const char* normalization_name(Normalization n) {
  return n == Normalization::Hypersphere ? "hypersphere" : "standard";
}

Matrix normalize_points(const Matrix& points, Normalization mode) {
  if (points.rows() < 2) throw DataError("normalize_points: need >= 2 points");
  Matrix out(points.rows(), points.cols());
  for (Index j = 0; j < points.cols(); ++j) {
    const double mean = points.col(j).mean();
    double sd = std::sqrt((points.col(j).array() - mean).square().sum() /
                          static_cast<double>(points.rows() - 1));
    if (!(sd > kDistanceFloor)) sd = 1.0;
    out.col(j) = (points.col(j).array() - mean) / sd;
  }
  if (mode == Normalization::Hypersphere) {
    for (Index i = 0; i < out.rows(); ++i) {
      const double norm = out.row(i).norm();
      if (norm > 1e-15) out.row(i) /= norm;
    }
  }
  return out;
}

namespace {

/// Full pairwise distances for hierarchy construction; 3000 points cost
/// 72 MB, beyond that the O(M^2) passes recompute rows instead.
constexpr Index kDistanceCacheLimit = 3000;

Matrix pairwise_distances(const Matrix& points) {
  const Index m = points.rows();
  Matrix d(m, m);
  for (Index i = 0; i < m; ++i)
    d.col(i) = (points.rowwise() - points.row(i)).rowwise().norm();
  return d;
}

Vector core_distances_impl(const Matrix& points, Index min_samples,
                           const Matrix* cache) {
  const Index m = points.rows();
  if (min_samples < 1) throw ConfigError("core_distances: min_samples >= 1");
  if (m <= min_samples)
    throw DataError("core_distances: need more than min_samples points");
  Vector cores(m);
  std::vector<double> dists(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    Eigen::Map<Vector> d(dists.data(), m);
    if (cache)
      d = cache->col(i);
    else
      d = (points.rowwise() - points.row(i)).rowwise().norm();
    // Self-distance 0 occupies one slot, so the k-th neighbor is at rank k.
    std::nth_element(dists.begin(),
                     dists.begin() + static_cast<std::ptrdiff_t>(min_samples),
                     dists.end());
    cores[i] = dists[static_cast<std::size_t>(min_samples)];
  }
  return cores;
}

std::vector<MstEdge> mst_impl(const Matrix& points, const Vector& cores,
                              const Matrix* cache) {
  const Index m = points.rows();
  if (m < 2) throw DataError("minimum_spanning_tree: need >= 2 points");
  std::vector<MstEdge> edges;
  edges.reserve(static_cast<std::size_t>(m - 1));

  std::vector<bool> in_tree(static_cast<std::size_t>(m), false);
  std::vector<double> best(static_cast<std::size_t>(m),
                           std::numeric_limits<double>::infinity());
  std::vector<Index> best_from(static_cast<std::size_t>(m), 0);

  Index current = 0;
  in_tree[0] = true;
  Vector row_dist(m);
  for (Index added = 1; added < m; ++added) {
    if (cache)
      row_dist = cache->col(current);
    else
      row_dist = (points.rowwise() - points.row(current)).rowwise().norm();
    const double core_cur = cores[current];
    for (Index v = 0; v < m; ++v) {
      if (in_tree[static_cast<std::size_t>(v)]) continue;
      const double w = std::max({core_cur, cores[v], row_dist[v]});
      if (w < best[static_cast<std::size_t>(v)]) {
        best[static_cast<std::size_t>(v)] = w;
        best_from[static_cast<std::size_t>(v)] = current;
      }
    }
    Index next = -1;
    double next_w = std::numeric_limits<double>::infinity();
    for (Index v = 0; v < m; ++v) {
      if (in_tree[static_cast<std::size_t>(v)]) continue;
      if (best[static_cast<std::size_t>(v)] < next_w) {
        next_w = best[static_cast<std::size_t>(v)];
        next = v;
      }
    }
    edges.push_back({best_from[static_cast<std::size_t>(next)], next, next_w});
    in_tree[static_cast<std::size_t>(next)] = true;
    current = next;
  }
  return edges;
}

}  // namespace

Vector core_distances(const Matrix& points, Index min_samples) {
  return core_distances_impl(points, min_samples, nullptr);
}

MutualReachability::MutualReachability(const Matrix& points,
                                       const Vector& cores)
    : points_(points), cores_(cores) {
  if (points.rows() != cores.size())
    throw DimensionError("mutual_reachability: cores/points mismatch");
}

double MutualReachability::operator()(Index a, Index b) const {
  const double d = (points_.row(a) - points_.row(b)).norm();
  return std::max({cores_[a], cores_[b], d});
}

std::vector<MstEdge> minimum_spanning_tree(const Matrix& points,
                                           const Vector& cores) {
  return mst_impl(points, cores, nullptr);
}

namespace {

struct DendroNode {
  Index left = -1;
  Index right = -1;
  double dist = 0.0;
  Index size = 1;
};

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(Index a, Index b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

/// Collect point ids under a dendrogram node.
void collect_points(const std::vector<DendroNode>& nodes, Index m, Index node,
                    std::vector<Index>& out) {
  if (node < m) {
    out.push_back(node);
    return;
  }
  std::vector<Index> stack{node};
  while (!stack.empty()) {
    Index n = stack.back();
    stack.pop_back();
    if (n < m) {
      out.push_back(n);
      continue;
    }
    const auto& dn = nodes[static_cast<std::size_t>(n - m)];
    stack.push_back(dn.left);
    stack.push_back(dn.right);
  }
}

}  // namespace

CondensedTree build_hierarchy(const Matrix& points, Index min_samples,
                              Index min_cluster_size) {
  const Index m = points.rows();
  if (min_cluster_size < 2)
    throw ConfigError("build_hierarchy: min_cluster_size must be >= 2");
  if (m < min_cluster_size)
    warn("clustering " + std::to_string(m) +
         " points with min_cluster_size " + std::to_string(min_cluster_size));

  Matrix cache;
  const Matrix* cache_ptr = nullptr;
  if (m <= kDistanceCacheLimit) {
    cache = pairwise_distances(points);
    cache_ptr = &cache;
  }
  Vector cores = core_distances_impl(points, min_samples, cache_ptr);
  std::vector<MstEdge> mst = mst_impl(points, cores, cache_ptr);
  std::sort(mst.begin(), mst.end(), [](const MstEdge& x, const MstEdge& y) {
    const Index xa = std::min(x.a, x.b), xb = std::max(x.a, x.b);
    const Index ya = std::min(y.a, y.b), yb = std::max(y.a, y.b);
    if (x.weight != y.weight) return x.weight < y.weight;
    if (xa != ya) return xa < ya;
    return xb < yb;
  });

  CondensedTree tree;
  tree.n_points = m;
  tree.min_samples = min_samples;
  tree.min_cluster_size = min_cluster_size;
  for (const auto& e : mst) tree.mst_total_weight += e.weight;

  // Single-linkage dendrogram: nodes m .. 2m-2, children may be points.
  std::vector<DendroNode> nodes(static_cast<std::size_t>(m - 1));
  {
    UnionFind uf(m);
    std::vector<Index> comp_node(static_cast<std::size_t>(m));
    std::iota(comp_node.begin(), comp_node.end(), Index{0});
    std::vector<Index> comp_size(static_cast<std::size_t>(m), 1);
    Index next = m;
    for (const auto& e : mst) {
      const Index ra = uf.find(e.a);
      const Index rb = uf.find(e.b);
      DendroNode dn;
      dn.left = comp_node[static_cast<std::size_t>(ra)];
      dn.right = comp_node[static_cast<std::size_t>(rb)];
      dn.dist = e.weight;
      dn.size = comp_size[static_cast<std::size_t>(ra)] +
                comp_size[static_cast<std::size_t>(rb)];
      nodes[static_cast<std::size_t>(next - m)] = dn;
      uf.unite(ra, rb);
      const Index r = uf.find(ra);
      comp_node[static_cast<std::size_t>(r)] = next;
      comp_size[static_cast<std::size_t>(r)] = dn.size;
      ++next;
    }
  }

  // Condense: walk top-down; true splits spawn clusters, small sides shed
  // their points at the split's lambda.
  tree.point_lambda.assign(static_cast<std::size_t>(m), 0.0);
  tree.point_parent.assign(static_cast<std::size_t>(m), 0);
  tree.cluster_parent.assign(1, -1);
  tree.lambda_birth.assign(1, 0.0);
  tree.cluster_size.assign(1, static_cast<double>(m));
  tree.n_clusters = 1;

  struct Pending {
    Index node;
    Index cluster;
  };
  std::vector<Pending> stack;
  const Index root = m + (m - 2);
  if (m == 1) {
    tree.point_lambda[0] = 1.0 / kDistanceFloor;
    tree.point_parent[0] = 0;
  } else {
    stack.push_back({root, 0});
  }
  std::vector<Index> shed;
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const auto& dn = nodes[static_cast<std::size_t>(cur.node - m)];
    const double lambda = 1.0 / std::max(dn.dist, kDistanceFloor);
    const Index sl = dn.left < m ? 1 : nodes[static_cast<std::size_t>(dn.left - m)].size;
    const Index sr = dn.right < m ? 1 : nodes[static_cast<std::size_t>(dn.right - m)].size;

    auto shed_points = [&](Index child) {
      shed.clear();
      collect_points(nodes, m, child, shed);
      for (Index p : shed) {
        tree.point_lambda[static_cast<std::size_t>(p)] = lambda;
        tree.point_parent[static_cast<std::size_t>(p)] = cur.cluster;
      }
    };
    auto descend = [&](Index child, Index cluster) {
      if (child < m) {
        // A lone point continuing a cluster: it departs when its partner
        // chain ends, i.e. at this split.
        tree.point_lambda[static_cast<std::size_t>(child)] = lambda;
        tree.point_parent[static_cast<std::size_t>(child)] = cluster;
      } else {
        stack.push_back({child, cluster});
      }
    };

    if (sl >= min_cluster_size && sr >= min_cluster_size) {
      const Index cl = tree.n_clusters++;
      tree.cluster_parent.push_back(cur.cluster);
      tree.lambda_birth.push_back(lambda);
      tree.cluster_size.push_back(static_cast<double>(sl));
      const Index cr = tree.n_clusters++;
      tree.cluster_parent.push_back(cur.cluster);
      tree.lambda_birth.push_back(lambda);
      tree.cluster_size.push_back(static_cast<double>(sr));
      descend(dn.left, cl);
      descend(dn.right, cr);
    } else if (sl < min_cluster_size && sr < min_cluster_size) {
      shed_points(dn.left);
      shed_points(dn.right);
    } else if (sl < min_cluster_size) {
      shed_points(dn.left);
      descend(dn.right, cur.cluster);
    } else {
      shed_points(dn.right);
      descend(dn.left, cur.cluster);
    }
  }

  // Excess-of-mass selection over non-root clusters.
  const Index nc = tree.n_clusters;
  std::vector<double> stability(static_cast<std::size_t>(nc), 0.0);
  for (Index p = 0; p < m; ++p) {
    const Index c = tree.point_parent[static_cast<std::size_t>(p)];
    stability[static_cast<std::size_t>(c)] +=
        tree.point_lambda[static_cast<std::size_t>(p)] -
        tree.lambda_birth[static_cast<std::size_t>(c)];
  }
  std::vector<std::vector<Index>> children(static_cast<std::size_t>(nc));
  for (Index c = 1; c < nc; ++c) {
    const Index parent = tree.cluster_parent[static_cast<std::size_t>(c)];
    children[static_cast<std::size_t>(parent)].push_back(c);
    stability[static_cast<std::size_t>(parent)] +=
        (tree.lambda_birth[static_cast<std::size_t>(c)] -
         tree.lambda_birth[static_cast<std::size_t>(parent)]) *
        tree.cluster_size[static_cast<std::size_t>(c)];
  }

  std::vector<bool> selected(static_cast<std::size_t>(nc), false);
  std::vector<double> subtree_stab(static_cast<std::size_t>(nc), 0.0);
  for (Index c = nc - 1; c >= 1; --c) {
    const auto& kids = children[static_cast<std::size_t>(c)];
    double child_sum = 0.0;
    for (Index k : kids) child_sum += subtree_stab[static_cast<std::size_t>(k)];
    if (kids.empty() || stability[static_cast<std::size_t>(c)] >= child_sum) {
      selected[static_cast<std::size_t>(c)] = true;
      subtree_stab[static_cast<std::size_t>(c)] =
          stability[static_cast<std::size_t>(c)];
    } else {
      subtree_stab[static_cast<std::size_t>(c)] = child_sum;
    }
  }
  // Keep only the topmost selected cluster on each path.
  std::vector<Index> frontier = children[0];
  while (!frontier.empty()) {
    const Index c = frontier.back();
    frontier.pop_back();
    if (selected[static_cast<std::size_t>(c)]) {
      tree.selected.push_back(c);
    } else {
      for (Index k : children[static_cast<std::size_t>(c)])
        frontier.push_back(k);
    }
  }
  std::sort(tree.selected.begin(), tree.selected.end());

  if (tree.selected.empty()) {
    tree.single_cluster_fallback = true;
    tree.selected.push_back(0);
  }

  // Point assignment: nearest selected ancestor of the departure cluster.
  std::vector<Index> selected_ancestor(static_cast<std::size_t>(nc), -1);
  {
    std::vector<bool> is_selected(static_cast<std::size_t>(nc), false);
    for (Index c : tree.selected) is_selected[static_cast<std::size_t>(c)] = true;
    for (Index c = 0; c < nc; ++c) {
      Index cur2 = c;
      while (cur2 != -1 && !is_selected[static_cast<std::size_t>(cur2)])
        cur2 = tree.cluster_parent[static_cast<std::size_t>(cur2)];
      selected_ancestor[static_cast<std::size_t>(c)] = cur2;
    }
  }
  tree.point_cluster.assign(static_cast<std::size_t>(m), -1);
  for (Index p = 0; p < m; ++p)
    tree.point_cluster[static_cast<std::size_t>(p)] =
        selected_ancestor[static_cast<std::size_t>(
            tree.point_parent[static_cast<std::size_t>(p)])];

  return tree;
}

std::vector<OutlierScore> outlier_scores(const CondensedTree& tree) {
  const Index nc = tree.n_clusters;
  std::vector<double> lambda_max(static_cast<std::size_t>(nc), 0.0);
  for (Index p = 0; p < tree.n_points; ++p) {
    auto& lm = lambda_max[static_cast<std::size_t>(
        tree.point_parent[static_cast<std::size_t>(p)])];
    lm = std::max(lm, tree.point_lambda[static_cast<std::size_t>(p)]);
  }
  for (Index c = nc - 1; c >= 1; --c) {
    const Index parent = tree.cluster_parent[static_cast<std::size_t>(c)];
    auto& lm = lambda_max[static_cast<std::size_t>(parent)];
    lm = std::max(lm, lambda_max[static_cast<std::size_t>(c)]);
  }

  std::vector<OutlierScore> out(static_cast<std::size_t>(tree.n_points));
  for (Index p = 0; p < tree.n_points; ++p) {
    const Index c = tree.point_parent[static_cast<std::size_t>(p)];
    const double lmax = lambda_max[static_cast<std::size_t>(c)];
    const double lp = tree.point_lambda[static_cast<std::size_t>(p)];
    double score = lmax > 0.0 ? 1.0 - lp / lmax : 1.0;
    score = std::clamp(score, 0.0, 1.0);
    out[static_cast<std::size_t>(p)].p_out = score;
    out[static_cast<std::size_t>(p)].cluster =
        tree.point_cluster[static_cast<std::size_t>(p)];
  }
  return out;
}

double quantile_threshold(const std::vector<double>& scores, double q) {
  if (scores.empty()) throw DataError("quantile_threshold: empty scores");
  if (!(q > 0.0 && q < 1.0))
    throw ConfigError("quantile_threshold: q must lie in (0, 1)");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const auto m = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * m));
  if (rank < 1) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return sorted[rank - 1];
}

}  // namespace fluxmut
