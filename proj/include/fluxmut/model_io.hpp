#pragma once

#include <string>

#include "fluxmut/cae.hpp"
#include "fluxmut/flow.hpp"
#include "fluxmut/kde.hpp"

namespace fluxmut {

inline constexpr int kSchemaVersion = 1;

/// JSON model files: dims, scaler constants, row-major weight arrays, masks
/// and permutations, all under a schema_version field. Round-trips are
/// bit-exact at float64; version mismatches are rejected outright.
void save_cae(const CaeModel& model, const std::string& path);
CaeModel load_cae(const std::string& path);

void save_flow(const FlowModel& model, const std::string& path);
FlowModel load_flow(const std::string& path);

void save_kde(const BinnedKde& kde, const std::string& path);
BinnedKde load_kde(const std::string& path);

}  // namespace fluxmut
