#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fluxmut/types.hpp"

namespace fluxmut {

/// Baseline bijection count for the jet-shaped setup; the general default is
/// RunConfig::cmaf.bijections (12).
inline constexpr Index kLhcBijections = 10;

struct CaeSection {
  double huber_delta = 1.0;
  Index latent_dim = 6;
  double lr_cae = 5e-4;
  std::vector<Index> encoder_hidden{64, 32};
  std::vector<Index> decoder_hidden{32, 64};
  Index batch_size = 512;
  Index max_epochs = 200;
  Index patience = 20;
  std::string activation = "leaky_relu";
};

struct CmafSection {
  double lr_cmaf = 1e-4;
  Index bijections = 12;
  std::vector<Index> hidden{128, 128};
  Index batch_size = 512;
  Index max_epochs = 200;
  Index patience = 20;
  double scale_clamp = 7.0;
};

struct KdeSection {
  /// Explicit edges per axis win over widths, widths over counts.
  std::vector<std::vector<double>> edges;  // edges_kJ
  std::vector<double> width;               // width_kJ (0 = unset)
  std::vector<Index> bins;                 // bins_kJ (0 = unset)
  Index min_occupancy = 50;
  double bandwidth_floor = 1e-3;
};

struct ClusterSection {
  Index min_cluster_size = 1000;
  Index min_samples = 100;
};

struct PipelineSection {
  Index ref_cluster_size = 1500;
  double q = 0.95;
  std::uint64_t seed = 17;
  std::string normalization = "hypersphere";
  Index roc_samples = 1000;
  int threads = 1;
};

struct RunConfig {
  CaeSection cae;
  CmafSection cmaf;
  KdeSection kde;
  ClusterSection cluster;
  PipelineSection pipeline;
};

/// INI-style parser. Unknown sections or keys are rejected.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// One `section.key=value` line per entry, for reproducibility logs.
std::string describe_config(const RunConfig& cfg);

}  // namespace fluxmut
