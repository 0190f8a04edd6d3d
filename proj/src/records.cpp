#include "fluxmut/records.hpp"

#include "fluxmut/errors.hpp"

namespace fluxmut {

const char* label_name(Label l) {
  switch (l) {
    case Label::Reference: return "ref";
    case Label::Complementary: return "anom";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

FeatureRecord RecordBatch::record(Index i) const {
  FeatureRecord r;
  r.features = features.row(i).transpose();
  r.conditions = conditions.row(i).transpose();
  r.label = labels.empty() ? Label::Unknown : labels[static_cast<std::size_t>(i)];
  return r;
}

RecordBatch to_batch(const std::vector<FeatureRecord>& records) {
  if (records.empty()) throw DataError("to_batch: empty record set");
  const Index n = static_cast<Index>(records.size());
  const Index nf = records.front().features.size();
  const Index nc = records.front().conditions.size();
  RecordBatch batch;
  batch.features.resize(n, nf);
  batch.conditions.resize(n, nc);
  batch.labels.reserve(records.size());
  for (Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.features.size() != nf || r.conditions.size() != nc)
      throw DimensionError("to_batch: inconsistent record dimensions");
    batch.features.row(i) = r.features.transpose();
    batch.conditions.row(i) = r.conditions.transpose();
    batch.labels.push_back(r.label);
  }
  return batch;
}

std::vector<FeatureRecord> to_records(const RecordBatch& batch) {
  std::vector<FeatureRecord> out;
  out.reserve(static_cast<std::size_t>(batch.size()));
  for (Index i = 0; i < batch.size(); ++i) out.push_back(batch.record(i));
  return out;
}

}  // namespace fluxmut
