#include "fluxmut/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fluxmut/errors.hpp"
#include "fluxmut/log.hpp"
#include "fluxmut/rng.hpp"

namespace fluxmut {

Index BinGrid::bin_count() const {
  Index n = 1;
  for (const auto& e : edges) n *= static_cast<Index>(e.size()) - 1;
  return n;
}

Index BinGrid::bin_index(const Vector& conditions) const {
  if (conditions.size() != axes())
    throw DimensionError("bin_index: condition dimension mismatch");
  Index flat = 0;
  for (Index a = 0; a < axes(); ++a) {
    const auto& e = edges[static_cast<std::size_t>(a)];
    const Index nb = static_cast<Index>(e.size()) - 1;
    const double v = conditions[a];
    if (v < e.front() || v > e.back()) return -1;
    // Left-closed, right-open; the final bin also takes its upper edge.
    auto it = std::upper_bound(e.begin(), e.end(), v);
    Index idx = static_cast<Index>(it - e.begin()) - 1;
    if (idx >= nb) idx = nb - 1;
    flat = flat * nb + idx;
  }
  return flat;
}

Vector BinGrid::bin_center(Index flat) const {
  Vector center(axes());
  for (Index a = axes() - 1; a >= 0; --a) {
    const auto& e = edges[static_cast<std::size_t>(a)];
    const Index nb = static_cast<Index>(e.size()) - 1;
    const Index idx = flat % nb;
    flat /= nb;
    center[a] = 0.5 * (e[static_cast<std::size_t>(idx)] +
                       e[static_cast<std::size_t>(idx) + 1]);
  }
  return center;
}

BinGrid make_uniform_grid(const Vector& lo, const Vector& hi,
                          const std::vector<Index>& bins_per_axis) {
  if (lo.size() != hi.size() ||
      static_cast<std::size_t>(lo.size()) != bins_per_axis.size())
    throw DimensionError("make_uniform_grid: axis count mismatch");
  BinGrid grid;
  for (Index a = 0; a < lo.size(); ++a) {
    const Index nb = bins_per_axis[static_cast<std::size_t>(a)];
    if (nb < 1 || !(hi[a] > lo[a]))
      throw ConfigError("make_uniform_grid: invalid axis " + std::to_string(a));
    std::vector<double> e(static_cast<std::size_t>(nb) + 1);
    for (Index i = 0; i <= nb; ++i)
      e[static_cast<std::size_t>(i)] =
          lo[a] + (hi[a] - lo[a]) * static_cast<double>(i) /
                      static_cast<double>(nb);
    grid.edges.push_back(std::move(e));
  }
  return grid;
}

BinGrid make_width_grid(const Vector& lo, const Vector& hi,
                        const std::vector<double>& width_per_axis) {
  if (lo.size() != hi.size() ||
      static_cast<std::size_t>(lo.size()) != width_per_axis.size())
    throw DimensionError("make_width_grid: axis count mismatch");
  std::vector<Index> bins;
  for (Index a = 0; a < lo.size(); ++a) {
    const double w = width_per_axis[static_cast<std::size_t>(a)];
    if (!(w > 0.0))
      throw ConfigError("make_width_grid: width must be positive");
    bins.push_back(std::max<Index>(
        1, static_cast<Index>(std::ceil((hi[a] - lo[a]) / w))));
  }
  return make_uniform_grid(lo, hi, bins);
}

Index BinnedKde::non_sparse_count() const {
  Index n = 0;
  for (const auto& b : bins)
    if (!b.sparse) ++n;
  return n;
}

BinnedKde build_kde(const CaeModel& cae, const FlowModel& flow,
                    const RecordBatch& records, const BinGrid& grid,
                    const KdeOptions& options) {
  if (records.size() == 0) throw DataError("build_kde: empty record set");
  if (flow.dim != 2 * cae.n_features)
    throw DimensionError("build_kde: flow dimension does not match the cae");

  Matrix aug = augment_batch(cae, records.features, records.conditions);
  Matrix ks = scale_conditions(cae, records.conditions);
  Matrix latents = inverse(flow, aug, ks);

  BinnedKde kde;
  kde.grid = grid;
  kde.dim = flow.dim;
  kde.options = options;

  const Index nb = grid.bin_count();
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(nb));
  for (Index i = 0; i < records.size(); ++i) {
    const Index b = grid.bin_index(records.conditions.row(i).transpose());
    if (b < 0)
      throw DataError("build_kde: training condition in row " +
                      std::to_string(i) + " falls outside the bin grid");
    members[static_cast<std::size_t>(b)].push_back(i);
  }

  kde.bins.resize(static_cast<std::size_t>(nb));
  Index non_sparse = 0;
  for (Index b = 0; b < nb; ++b) {
    auto& bin = kde.bins[static_cast<std::size_t>(b)];
    const auto& idx = members[static_cast<std::size_t>(b)];
    const Index n = static_cast<Index>(idx.size());
    bin.points.resize(n, kde.dim);
    for (Index r = 0; r < n; ++r)
      bin.points.row(r) = latents.row(idx[static_cast<std::size_t>(r)]);
    bin.sparse = n < options.min_occupancy;
    if (!bin.sparse) ++non_sparse;
    bin.bandwidth = Vector::Constant(kde.dim, options.bandwidth_floor);
    if (n >= 2) {
      const double factor = std::pow(static_cast<double>(n),
                                     -1.0 / (static_cast<double>(kde.dim) + 4.0));
      for (Index d = 0; d < kde.dim; ++d) {
        const double mean = bin.points.col(d).mean();
        const double sd =
            std::sqrt((bin.points.col(d).array() - mean).square().sum() /
                      static_cast<double>(n - 1));
        bin.bandwidth[d] = std::max(factor * sd, options.bandwidth_floor);
      }
    }
  }
  if (non_sparse == 0)
    throw ConfigError(
        "build_kde: every bin is below min_occupancy; the grid is too fine "
        "for this dataset");
  return kde;
}

namespace {

Index nearest_non_sparse_bin(const BinnedKde& kde, const Vector& conditions) {
  Index best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index b = 0; b < static_cast<Index>(kde.bins.size()); ++b) {
    if (kde.bins[static_cast<std::size_t>(b)].sparse) continue;
    const double d = (kde.grid.bin_center(b) - conditions).norm();
    if (d < best_d) {
      best_d = d;
      best = b;
    }
  }
  return best;
}

}  // namespace

Matrix draw(const BinnedKde& kde, const Vector& conditions, Index m,
            std::uint64_t seed, DrawInfo* info) {
  if (m < 1) throw ConfigError("draw: m must be >= 1");
  if (kde.bins.empty()) throw DataError("draw: empty KDE");

  Index b = kde.grid.bin_index(conditions);
  bool fallback = false;
  if (b < 0 || kde.bins[static_cast<std::size_t>(b)].sparse) {
    const Index nb = nearest_non_sparse_bin(kde, conditions);
    if (nb < 0) throw DataError("draw: no non-sparse bin available");
    if (b < 0)
      warn("conditions outside the bin grid; borrowing nearest bin");
    else
      warn("sparse bin for the requested conditions; borrowing nearest bin");
    b = nb;
    fallback = true;
  }
  if (info) {
    info->fallback = fallback;
    info->bin = b;
  }

  const KdeBin& bin = kde.bins[static_cast<std::size_t>(b)];
  const Index n = bin.points.rows();
  if (n == 0) throw DataError("draw: selected bin holds no points");

  Rng rng(seed);
  Matrix out(m, kde.dim);
  for (Index i = 0; i < m; ++i) {
    const Index pick = rng.uniform_index(n);
    for (Index d = 0; d < kde.dim; ++d)
      out(i, d) = bin.points(pick, d) + bin.bandwidth[d] * rng.normal();
  }
  return out;
}

}  // namespace fluxmut
