#include "fluxmut/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "fluxmut/errors.hpp"

namespace fluxmut {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw IoError("model file: expected a non-empty matrix");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != cols)
      throw IoError("model file: ragged matrix rows");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json layer_to_json(const DenseLayer& l) {
  return json{{"weights", matrix_to_json(l.weights)},
              {"bias", vector_to_json(l.bias)},
              {"activation", activation_name(l.activation)}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer l;
  l.weights = matrix_from_json(j.at("weights"));
  l.bias = vector_from_json(j.at("bias"));
  l.activation = activation_from_name(j.at("activation").get<std::string>());
  if (l.bias.size() != l.weights.cols())
    throw IoError("model file: bias/weight shape mismatch");
  return l;
}

json stack_to_json(const LayerStack& s) {
  json layers = json::array();
  for (const auto& l : s.layers) layers.push_back(layer_to_json(l));
  return layers;
}

LayerStack stack_from_json(const json& j) {
  LayerStack s;
  for (const auto& l : j) s.layers.push_back(layer_from_json(l));
  return s;
}

json write_header(const char* kind) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}};
}

json load_checked(const std::string& path, const char* kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("model file '" + path + "': " + e.what());
  }
  if (!j.contains("schema_version"))
    throw IoError("model file '" + path + "' lacks a schema_version field");
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion)
    throw IoError("model file '" + path + "': schema_version " +
                  std::to_string(version) + " is unsupported (expected " +
                  std::to_string(kSchemaVersion) + ")");
  if (j.at("kind").get<std::string>() != kind)
    throw IoError("model file '" + path + "' holds a '" +
                  j.at("kind").get<std::string>() + "' model, expected '" +
                  kind + "'");
  return j;
}

void dump(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out << j.dump(1, '\t') << "\n";
  if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace

void save_cae(const CaeModel& model, const std::string& path) {
  json j = write_header("cae");
  j["n_features"] = model.n_features;
  j["n_conditions"] = model.n_conditions;
  j["latent_dim"] = model.latent_dim;
  j["feature_shift"] = vector_to_json(model.feature_scaler.shift);
  j["feature_scale"] = vector_to_json(model.feature_scaler.scale);
  j["condition_lo"] = vector_to_json(model.condition_scaler.lo);
  j["condition_hi"] = vector_to_json(model.condition_scaler.hi);
  j["encoder"] = stack_to_json(model.encoder);
  j["decoder"] = stack_to_json(model.decoder);
  dump(j, path);
}

CaeModel load_cae(const std::string& path) {
  const json j = load_checked(path, "cae");
  CaeModel m;
  m.n_features = j.at("n_features").get<Index>();
  m.n_conditions = j.at("n_conditions").get<Index>();
  m.latent_dim = j.at("latent_dim").get<Index>();
  m.feature_scaler.shift = vector_from_json(j.at("feature_shift"));
  m.feature_scaler.scale = vector_from_json(j.at("feature_scale"));
  m.condition_scaler.lo = vector_from_json(j.at("condition_lo"));
  m.condition_scaler.hi = vector_from_json(j.at("condition_hi"));
  m.encoder = stack_from_json(j.at("encoder"));
  m.decoder = stack_from_json(j.at("decoder"));
  if (m.encoder.input_dim() != m.n_features + m.n_conditions ||
      m.decoder.output_dim() != m.n_features)
    throw IoError("model file '" + path + "': inconsistent dimensions");
  return m;
}

namespace {

json block_to_json(const MadeBlock& b) {
  json j;
  j["dim"] = b.dim;
  j["cond_dim"] = b.cond_dim;
  j["scale_clamp"] = b.scale_clamp;
  j["permutation"] = b.permutation;
  json hidden = json::array();
  for (std::size_t l = 0; l < b.hidden.size(); ++l) {
    json h = layer_to_json(b.hidden[l]);
    h["mask"] = matrix_to_json(b.hidden_mask[l]);
    hidden.push_back(std::move(h));
  }
  j["hidden"] = std::move(hidden);
  j["shift_head"] = layer_to_json(b.shift_head);
  j["scale_head"] = layer_to_json(b.scale_head);
  j["head_mask"] = matrix_to_json(b.head_mask);
  return j;
}

MadeBlock block_from_json(const json& j) {
  MadeBlock b;
  b.dim = j.at("dim").get<Index>();
  b.cond_dim = j.at("cond_dim").get<Index>();
  b.scale_clamp = j.at("scale_clamp").get<double>();
  b.permutation = j.at("permutation").get<std::vector<Index>>();
  b.inverse_permutation = invert_permutation(b.permutation);
  for (const auto& h : j.at("hidden")) {
    b.hidden.push_back(layer_from_json(h));
    b.hidden_mask.push_back(matrix_from_json(h.at("mask")));
  }
  b.shift_head = layer_from_json(j.at("shift_head"));
  b.scale_head = layer_from_json(j.at("scale_head"));
  b.head_mask = matrix_from_json(j.at("head_mask"));
  return b;
}

}  // namespace

void save_flow(const FlowModel& model, const std::string& path) {
  json j = write_header("cmaf");
  j["dim"] = model.dim;
  j["cond_dim"] = model.cond_dim;
  json blocks = json::array();
  for (const auto& b : model.blocks) blocks.push_back(block_to_json(b));
  j["blocks"] = std::move(blocks);
  dump(j, path);
}

FlowModel load_flow(const std::string& path) {
  const json j = load_checked(path, "cmaf");
  FlowModel m;
  m.dim = j.at("dim").get<Index>();
  m.cond_dim = j.at("cond_dim").get<Index>();
  for (const auto& b : j.at("blocks")) m.blocks.push_back(block_from_json(b));
  if (m.blocks.empty()) throw IoError("model file '" + path + "': no blocks");
  for (const auto& b : m.blocks)
    if (b.dim != m.dim || b.cond_dim != m.cond_dim)
      throw IoError("model file '" + path + "': inconsistent block dims");
  return m;
}

void save_kde(const BinnedKde& kde, const std::string& path) {
  json j = write_header("kde");
  j["dim"] = kde.dim;
  j["min_occupancy"] = kde.options.min_occupancy;
  j["bandwidth_floor"] = kde.options.bandwidth_floor;
  json edges = json::array();
  for (const auto& e : kde.grid.edges) edges.push_back(e);
  j["grid_edges"] = std::move(edges);
  json bins = json::array();
  for (const auto& b : kde.bins) {
    json bj;
    bj["sparse"] = b.sparse;
    bj["bandwidth"] = vector_to_json(b.bandwidth);
    bj["points"] = b.points.rows() > 0 ? matrix_to_json(b.points) : json::array();
    bins.push_back(std::move(bj));
  }
  j["bins"] = std::move(bins);
  dump(j, path);
}

BinnedKde load_kde(const std::string& path) {
  const json j = load_checked(path, "kde");
  BinnedKde kde;
  kde.dim = j.at("dim").get<Index>();
  kde.options.min_occupancy = j.at("min_occupancy").get<Index>();
  kde.options.bandwidth_floor = j.at("bandwidth_floor").get<double>();
  for (const auto& e : j.at("grid_edges"))
    kde.grid.edges.push_back(e.get<std::vector<double>>());
  for (const auto& bj : j.at("bins")) {
    KdeBin b;
    b.sparse = bj.at("sparse").get<bool>();
    b.bandwidth = vector_from_json(bj.at("bandwidth"));
    const auto& pts = bj.at("points");
    if (pts.empty())
      b.points.resize(0, kde.dim);
    else
      b.points = matrix_from_json(pts);
    kde.bins.push_back(std::move(b));
  }
  if (static_cast<Index>(kde.bins.size()) != kde.grid.bin_count())
    throw IoError("model file '" + path + "': bin count mismatch");
  return kde;
}

}  // namespace fluxmut
