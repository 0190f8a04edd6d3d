#pragma once

#include <string>
#include <vector>

#include "fluxmut/pipeline.hpp"
#include "fluxmut/records.hpp"
#include "fluxmut/types.hpp"

namespace fluxmut {

/// Dataset CSV: header f1..fN,k1..kL with an optional trailing label column
/// taking values {ref, anom}. Every cell must parse to a finite real;
/// violations report 1-based row/column coordinates.
RecordBatch read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const RecordBatch& batch,
                       bool with_labels);

void write_decisions_csv(const std::string& path,
                         const std::vector<Decision>& decisions);
void write_roc_csv(const std::string& path, const RocCurve& curve);

/// Shortest round-trip-exact representation of a double.
std::string format_double(double v);

}  // namespace fluxmut
