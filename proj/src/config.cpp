#include "fluxmut/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fluxmut/errors.hpp"

namespace fluxmut {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_real(const std::string& value, const std::string& key) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size())
    throw ConfigError("config: bad number for '" + key + "': " + value);
  return v;
}

Index parse_index(const std::string& value, const std::string& key) {
  const double v = parse_real(value, key);
  const auto i = static_cast<Index>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError("config: '" + key + "' must be an integer");
  return i;
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size())
    throw ConfigError("config: bad seed for '" + key + "': " + value);
  return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_real_list(const std::string& value,
                                    const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_real(trim(item), key));
  if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
  return out;
}

std::vector<Index> parse_index_list(const std::string& value,
                                    const std::string& key) {
  std::vector<Index> out;
  for (double v : parse_real_list(value, key))
    out.push_back(static_cast<Index>(v));
  return out;
}

/// kde keys carry a 1-based axis suffix: edges_k1, width_k2, bins_k1 ...
bool parse_axis_key(const std::string& key, const std::string& prefix,
                    Index* axis) {
  if (key.size() <= prefix.size() + 1 || key.compare(0, prefix.size(), prefix) != 0)
    return false;
  if (key[prefix.size()] != 'k') return false;
  const std::string num = key.substr(prefix.size() + 1);
  for (char c : num)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  *axis = static_cast<Index>(std::strtol(num.c_str(), nullptr, 10));
  return *axis >= 1;
}

template <typename T>
void grow_to(std::vector<T>& v, Index axis, const T& fill) {
  if (static_cast<Index>(v.size()) < axis)
    v.resize(static_cast<std::size_t>(axis), fill);
}

void apply_kde_key(KdeSection& kde, const std::string& key,
                   const std::string& value) {
  Index axis = 0;
  if (parse_axis_key(key, "edges_", &axis)) {
    grow_to(kde.edges, axis, {});
    kde.edges[static_cast<std::size_t>(axis - 1)] = parse_real_list(value, key);
  } else if (parse_axis_key(key, "width_", &axis)) {
    grow_to(kde.width, axis, 0.0);
    kde.width[static_cast<std::size_t>(axis - 1)] = parse_real(value, key);
  } else if (parse_axis_key(key, "bins_", &axis)) {
    grow_to(kde.bins, axis, Index{0});
    kde.bins[static_cast<std::size_t>(axis - 1)] = parse_index(value, key);
  } else if (key == "min_occupancy") {
    kde.min_occupancy = parse_index(value, key);
  } else if (key == "bandwidth_floor") {
    kde.bandwidth_floor = parse_real(value, key);
  } else {
    throw ConfigError("config: unknown key 'kde." + key + "'");
  }
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    const auto comment = s.find_first_of("#;");
    if (comment != std::string::npos) s = trim(s.substr(0, comment));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("config: malformed section at line " +
                          std::to_string(line_no));
      section = trim(s.substr(1, s.size() - 2));
      if (section != "cae" && section != "cmaf" && section != "kde" &&
          section != "cluster" && section != "pipeline")
        throw ConfigError("config: unknown section '[" + section + "]'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " +
                        std::to_string(line_no));
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config: key '" + key + "' outside any section");

    if (section == "cae") {
      if (key == "huber_delta") cfg.cae.huber_delta = parse_real(value, key);
      else if (key == "latent_dim") cfg.cae.latent_dim = parse_index(value, key);
      else if (key == "lr_cae") cfg.cae.lr_cae = parse_real(value, key);
      else if (key == "encoder_hidden") cfg.cae.encoder_hidden = parse_index_list(value, key);
      else if (key == "decoder_hidden") cfg.cae.decoder_hidden = parse_index_list(value, key);
      else if (key == "batch_size") cfg.cae.batch_size = parse_index(value, key);
      else if (key == "max_epochs") cfg.cae.max_epochs = parse_index(value, key);
      else if (key == "patience") cfg.cae.patience = parse_index(value, key);
      else if (key == "activation") cfg.cae.activation = value;
      else throw ConfigError("config: unknown key 'cae." + key + "'");
    } else if (section == "cmaf") {
      if (key == "lr_cmaf") cfg.cmaf.lr_cmaf = parse_real(value, key);
      else if (key == "bijections") cfg.cmaf.bijections = parse_index(value, key);
      else if (key == "hidden") cfg.cmaf.hidden = parse_index_list(value, key);
      else if (key == "batch_size") cfg.cmaf.batch_size = parse_index(value, key);
      else if (key == "max_epochs") cfg.cmaf.max_epochs = parse_index(value, key);
      else if (key == "patience") cfg.cmaf.patience = parse_index(value, key);
      else if (key == "scale_clamp") cfg.cmaf.scale_clamp = parse_real(value, key);
      else throw ConfigError("config: unknown key 'cmaf." + key + "'");
    } else if (section == "kde") {
      apply_kde_key(cfg.kde, key, value);
    } else if (section == "cluster") {
      if (key == "min_cluster_size") cfg.cluster.min_cluster_size = parse_index(value, key);
      else if (key == "min_samples") cfg.cluster.min_samples = parse_index(value, key);
      else throw ConfigError("config: unknown key 'cluster." + key + "'");
    } else if (section == "pipeline") {
      if (key == "ref_cluster_size") cfg.pipeline.ref_cluster_size = parse_index(value, key);
      else if (key == "q") cfg.pipeline.q = parse_real(value, key);
      else if (key == "seed") cfg.pipeline.seed = parse_u64(value, key);
      else if (key == "normalization") cfg.pipeline.normalization = value;
      else if (key == "roc_samples") cfg.pipeline.roc_samples = parse_index(value, key);
      else if (key == "threads") cfg.pipeline.threads = static_cast<int>(parse_index(value, key));
      else throw ConfigError("config: unknown key 'pipeline." + key + "'");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_config(in);
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

std::string describe_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "cae.huber_delta=" << cfg.cae.huber_delta
     << " cae.latent_dim=" << cfg.cae.latent_dim
     << " cae.lr_cae=" << cfg.cae.lr_cae
     << " cae.encoder_hidden=" << join(cfg.cae.encoder_hidden)
     << " cae.decoder_hidden=" << join(cfg.cae.decoder_hidden)
     << " cae.batch_size=" << cfg.cae.batch_size
     << " cae.max_epochs=" << cfg.cae.max_epochs
     << " cae.patience=" << cfg.cae.patience
     << " cae.activation=" << cfg.cae.activation << "\n";
  os << "cmaf.lr_cmaf=" << cfg.cmaf.lr_cmaf
     << " cmaf.bijections=" << cfg.cmaf.bijections
     << " cmaf.hidden=" << join(cfg.cmaf.hidden)
     << " cmaf.batch_size=" << cfg.cmaf.batch_size
     << " cmaf.max_epochs=" << cfg.cmaf.max_epochs
     << " cmaf.patience=" << cfg.cmaf.patience
     << " cmaf.scale_clamp=" << cfg.cmaf.scale_clamp << "\n";
  os << "kde.min_occupancy=" << cfg.kde.min_occupancy
     << " kde.bandwidth_floor=" << cfg.kde.bandwidth_floor;
  for (std::size_t a = 0; a < cfg.kde.edges.size(); ++a)
    if (!cfg.kde.edges[a].empty())
      os << " kde.edges_k" << a + 1 << "=" << join(cfg.kde.edges[a]);
  for (std::size_t a = 0; a < cfg.kde.width.size(); ++a)
    if (cfg.kde.width[a] > 0) os << " kde.width_k" << a + 1 << "=" << cfg.kde.width[a];
  for (std::size_t a = 0; a < cfg.kde.bins.size(); ++a)
    if (cfg.kde.bins[a] > 0) os << " kde.bins_k" << a + 1 << "=" << cfg.kde.bins[a];
  os << "\n";
  os << "cluster.min_cluster_size=" << cfg.cluster.min_cluster_size
     << " cluster.min_samples=" << cfg.cluster.min_samples << "\n";
  os << "pipeline.ref_cluster_size=" << cfg.pipeline.ref_cluster_size
     << " pipeline.q=" << cfg.pipeline.q << " pipeline.seed=" << cfg.pipeline.seed
     << " pipeline.normalization=" << cfg.pipeline.normalization
     << " pipeline.roc_samples=" << cfg.pipeline.roc_samples
     << " pipeline.threads=" << cfg.pipeline.threads;
  return os.str();
}

}  // namespace fluxmut
