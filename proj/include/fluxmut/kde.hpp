#pragma once

#include <cstdint>
#include <vector>

#include "fluxmut/cae.hpp"
#include "fluxmut/flow.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

/// Per-condition-axis bin edges. Bins are left-closed, right-open; the last
/// bin is closed. Values in raw condition units.
struct BinGrid {
  std::vector<std::vector<double>> edges;  // one ascending list per axis

  Index axes() const { return static_cast<Index>(edges.size()); }
  Index bin_count() const;
  /// Flattened bin index, or -1 when the value lies outside the grid.
  Index bin_index(const Vector& conditions) const;
  /// Center of a flattened bin in condition space.
  Vector bin_center(Index flat) const;
};

BinGrid make_uniform_grid(const Vector& lo, const Vector& hi,
                          const std::vector<Index>& bins_per_axis);
BinGrid make_width_grid(const Vector& lo, const Vector& hi,
                        const std::vector<double>& width_per_axis);

struct KdeBin {
  Matrix points;     // flow-latent vectors of training records in this bin
  Vector bandwidth;  // per-dimension Scott-rule bandwidths
  bool sparse = true;
};

struct KdeOptions {
  Index min_occupancy = 50;
  double bandwidth_floor = 1e-3;
};

/// Per-bin kernel density estimators over flow-latent vectors of the
/// training data.
struct BinnedKde {
  BinGrid grid;
  std::vector<KdeBin> bins;
  Index dim = 0;
  KdeOptions options;

  Index non_sparse_count() const;
};

/// Inverse-transforms every training record through the flow and buckets the
/// latents by raw condition value. Scott's rule per dimension:
/// h_d = n^(-1/(d+4)) * sd_d, floored.
BinnedKde build_kde(const CaeModel& cae, const FlowModel& flow,
                    const RecordBatch& records, const BinGrid& grid,
                    const KdeOptions& options = {});

struct DrawInfo {
  bool fallback = false;  // sparse or out-of-grid bin borrowed a neighbor
  Index bin = -1;         // bin actually sampled
};

/// m latent vectors: a stored point chosen uniformly plus N(0, h^2 I) jitter.
Matrix draw(const BinnedKde& kde, const Vector& conditions, Index m,
            std::uint64_t seed, DrawInfo* info = nullptr);

}  // namespace fluxmut
