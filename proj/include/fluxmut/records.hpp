#pragma once

#include <optional>
#include <vector>

#include "fluxmut/types.hpp"

namespace fluxmut {

enum class Label { Reference, Complementary, Unknown };

const char* label_name(Label l);

/// One object: N features, L condition values (raw units), optional label.
struct FeatureRecord {
  Vector features;
  Vector conditions;
  Label label = Label::Unknown;
};

/// Column-batched view of a record set; rows are records.
struct RecordBatch {
  Matrix features;    // (n, N)
  Matrix conditions;  // (n, L)
  std::vector<Label> labels;

  Index size() const { return features.rows(); }
  FeatureRecord record(Index i) const;
};

RecordBatch to_batch(const std::vector<FeatureRecord>& records);
std::vector<FeatureRecord> to_records(const RecordBatch& batch);

}  // namespace fluxmut
