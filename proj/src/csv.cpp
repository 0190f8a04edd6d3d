#include "fluxmut/csv.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fluxmut/errors.hpp"

namespace fluxmut {

std::string format_double(double v) {
  // Shortest representation that round-trips at float64.
  for (int precision = 1; precision <= 17; ++precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

RecordBatch read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw IoError("dataset file '" + path + "' is empty");

  auto header = split_line(line);
  Index n_features = 0, n_conditions = 0;
  bool has_label = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string h = trim(header[i]);
    if (h == "f" + std::to_string(n_features + 1) && n_conditions == 0 &&
        !has_label) {
      ++n_features;
    } else if (h == "k" + std::to_string(n_conditions + 1) && !has_label) {
      ++n_conditions;
    } else if (h == "label" && i + 1 == header.size()) {
      has_label = true;
    } else {
      throw IoError("dataset '" + path + "': unexpected header column '" + h +
                    "' (expect f1..fN,k1..kL[,label])");
    }
  }
  if (n_features == 0 || n_conditions == 0)
    throw IoError("dataset '" + path +
                  "': header must contain f1.. and k1.. columns");
  const std::size_t n_cols = static_cast<std::size_t>(n_features + n_conditions) +
                             (has_label ? 1u : 0u);

  std::vector<double> values;
  std::vector<Label> labels;
  Index n_rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++n_rows;
    auto cells = split_line(line);
    if (cells.size() != n_cols)
      throw IoError("dataset '" + path + "': row " + std::to_string(n_rows) +
                    " has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(n_cols));
    for (Index c = 0; c < n_features + n_conditions; ++c) {
      const std::string cell = trim(cells[static_cast<std::size_t>(c)]);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() ||
          !std::isfinite(v))
        throw IoError("dataset '" + path + "': non-finite or unparsable cell "
                      "at row " + std::to_string(n_rows) + ", column " +
                      std::to_string(c + 1));
      values.push_back(v);
    }
    if (has_label) {
      const std::string cell = trim(cells.back());
      if (cell == "ref")
        labels.push_back(Label::Reference);
      else if (cell == "anom")
        labels.push_back(Label::Complementary);
      else
        throw IoError("dataset '" + path + "': unknown label '" + cell +
                      "' at row " + std::to_string(n_rows));
    }
  }
  if (n_rows == 0) throw IoError("dataset '" + path + "' has no data rows");

  RecordBatch batch;
  batch.features.resize(n_rows, n_features);
  batch.conditions.resize(n_rows, n_conditions);
  const Index stride = n_features + n_conditions;
  for (Index r = 0; r < n_rows; ++r) {
    for (Index c = 0; c < n_features; ++c)
      batch.features(r, c) = values[static_cast<std::size_t>(r * stride + c)];
    for (Index c = 0; c < n_conditions; ++c)
      batch.conditions(r, c) =
          values[static_cast<std::size_t>(r * stride + n_features + c)];
  }
  if (has_label)
    batch.labels = std::move(labels);
  else
    batch.labels.assign(static_cast<std::size_t>(n_rows), Label::Unknown);
  return batch;
}

void write_dataset_csv(const std::string& path, const RecordBatch& batch,
                       bool with_labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  for (Index c = 0; c < batch.features.cols(); ++c)
    out << (c ? "," : "") << "f" << c + 1;
  for (Index c = 0; c < batch.conditions.cols(); ++c)
    out << ",k" << c + 1;
  if (with_labels) out << ",label";
  out << "\n";
  for (Index r = 0; r < batch.size(); ++r) {
    for (Index c = 0; c < batch.features.cols(); ++c)
      out << (c ? "," : "") << format_double(batch.features(r, c));
    for (Index c = 0; c < batch.conditions.cols(); ++c)
      out << "," << format_double(batch.conditions(r, c));
    if (with_labels)
      out << "," << label_name(batch.labels[static_cast<std::size_t>(r)]);
    out << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_decisions_csv(const std::string& path,
                         const std::vector<Decision>& decisions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write decisions file '" + path + "'");
  out << "id,P_out,threshold,q,verdict,fallback_flag\n";
  for (const auto& d : decisions) {
    out << d.object_id << "," << format_double(d.p_out) << ","
        << format_double(d.threshold) << "," << format_double(d.q) << ","
        << (d.outlier ? "outlier" : "inlier") << "," << (d.fallback ? 1 : 0)
        << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write roc file '" + path + "'");
  out << "q,TPR,sigma_TPR,FPR,sigma_FPR\n";
  for (const auto& p : curve.points) {
    out << format_double(p.q) << "," << format_double(p.tpr) << ","
        << format_double(p.sigma_tpr) << "," << format_double(p.fpr) << ","
        << format_double(p.sigma_fpr) << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace fluxmut
