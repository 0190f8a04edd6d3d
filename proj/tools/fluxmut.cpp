// Command-line surface: synthetic data, training, KDE construction,
// inference, evaluation, ROC, residual ablation, and the empirical
// feature-perturbation map.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fluxmut/cae.hpp"
#include "fluxmut/config.hpp"
#include "fluxmut/csv.hpp"
#include "fluxmut/errors.hpp"
#include "fluxmut/flow.hpp"
#include "fluxmut/kde.hpp"
#include "fluxmut/model_io.hpp"
#include "fluxmut/pipeline.hpp"
#include "fluxmut/synth.hpp"

namespace fluxmut {
namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
  std::optional<std::uint64_t> seed;
  std::optional<double> q;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "run configuration file");
  cmd->add_option("--set", args->overrides,
                  "override a config entry as section.key=value (repeatable)");
}

/// Precedence: built-in defaults < config file < FLUXMUT_SEED < flags.
RunConfig assemble_config(const CommonArgs& args) {
  std::ostringstream text;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw IoError("cannot open config file '" + args.config_path + "'");
    text << in.rdbuf() << "\n";
  }
  if (const char* env = std::getenv("FLUXMUT_SEED")) {
    text << "[pipeline]\nseed = " << env << "\n";
  }
  for (const auto& ov : args.overrides) {
    const auto dot = ov.find('.');
    const auto eq = ov.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq)
      throw ConfigError("--set expects section.key=value, got '" + ov + "'");
    text << "[" << ov.substr(0, dot) << "]\n"
         << ov.substr(dot + 1, eq - dot - 1) << " = " << ov.substr(eq + 1)
         << "\n";
  }
  if (args.seed) text << "[pipeline]\nseed = " << *args.seed << "\n";
  if (args.q) text << "[pipeline]\nq = " << *args.q << "\n";
  if (args.threads) text << "[pipeline]\nthreads = " << *args.threads << "\n";

  std::istringstream stream(text.str());
  RunConfig cfg = parse_config(stream);

  // Reproducibility log: the effective configuration and master seed.
  std::istringstream lines(describe_config(cfg));
  std::string line;
  while (std::getline(lines, line))
    std::cerr << "fluxmut: config: " << line << "\n";
  std::cerr << "fluxmut: seed: " << cfg.pipeline.seed << "\n";
  return cfg;
}

CaeConfig cae_config(const RunConfig& cfg) {
  CaeConfig c;
  c.latent_dim = cfg.cae.latent_dim;
  c.encoder_hidden = cfg.cae.encoder_hidden;
  c.decoder_hidden = cfg.cae.decoder_hidden;
  c.huber_delta = cfg.cae.huber_delta;
  c.learning_rate = cfg.cae.lr_cae;
  c.batch_size = cfg.cae.batch_size;
  c.max_epochs = cfg.cae.max_epochs;
  c.patience = cfg.cae.patience;
  c.hidden_activation = activation_from_name(cfg.cae.activation);
  c.seed = cfg.pipeline.seed;
  return c;
}

FlowConfig flow_config(const RunConfig& cfg) {
  FlowConfig f;
  f.n_blocks = cfg.cmaf.bijections;
  f.hidden = cfg.cmaf.hidden;
  f.learning_rate = cfg.cmaf.lr_cmaf;
  f.batch_size = cfg.cmaf.batch_size;
  f.max_epochs = cfg.cmaf.max_epochs;
  f.patience = cfg.cmaf.patience;
  f.scale_clamp = cfg.cmaf.scale_clamp;
  f.seed = cfg.pipeline.seed;
  return f;
}

PipelineOptions pipeline_options(const RunConfig& cfg) {
  PipelineOptions p;
  p.ref_cluster_size = cfg.pipeline.ref_cluster_size;
  p.min_cluster_size = cfg.cluster.min_cluster_size;
  p.min_samples = cfg.cluster.min_samples;
  p.normalization = normalization_from_name(cfg.pipeline.normalization);
  return p;
}

BinGrid kde_grid(const RunConfig& cfg, const RecordBatch& train) {
  const Index axes = train.conditions.cols();
  BinGrid grid;
  for (Index a = 0; a < axes; ++a) {
    const auto ax = static_cast<std::size_t>(a);
    if (ax < cfg.kde.edges.size() && !cfg.kde.edges[ax].empty()) {
      grid.edges.push_back(cfg.kde.edges[ax]);
      continue;
    }
    const double lo = train.conditions.col(a).minCoeff();
    const double hi = train.conditions.col(a).maxCoeff();
    if (ax < cfg.kde.width.size() && cfg.kde.width[ax] > 0.0) {
      BinGrid w = make_width_grid(Vector::Constant(1, lo),
                                  Vector::Constant(1, hi),
                                  {cfg.kde.width[ax]});
      grid.edges.push_back(w.edges[0]);
      continue;
    }
    Index bins = 10;
    if (ax < cfg.kde.bins.size() && cfg.kde.bins[ax] > 0)
      bins = cfg.kde.bins[ax];
    BinGrid u = make_uniform_grid(Vector::Constant(1, lo),
                                  Vector::Constant(1, hi), {bins});
    grid.edges.push_back(u.edges[0]);
  }
  return grid;
}

KdeOptions kde_options(const RunConfig& cfg) {
  KdeOptions k;
  k.min_occupancy = cfg.kde.min_occupancy;
  k.bandwidth_floor = cfg.kde.bandwidth_floor;
  return k;
}

Models load_models(const std::string& cae_path, const std::string& flow_path,
                   const std::string& kde_path) {
  Models m;
  m.cae = load_cae(cae_path);
  m.flow = load_flow(flow_path);
  m.kde = load_kde(kde_path);
  return m;
}

void print_eval_row(const EvalResult& r) {
  std::cout << format_double(r.q) << "," << format_double(r.tpr.rate) << ","
            << format_double(r.tpr.error) << "," << format_double(r.tnr.rate)
            << "," << format_double(r.tnr.error) << "\n";
}

/// Deterministic ~50/50 subsample of labeled records for the ROC sweep.
RecordBatch roc_subsample(const RecordBatch& all, Index target,
                          std::uint64_t seed) {
  std::vector<Index> ref_idx, anom_idx;
  for (Index i = 0; i < all.size(); ++i) {
    if (all.labels[static_cast<std::size_t>(i)] == Label::Reference)
      ref_idx.push_back(i);
    else if (all.labels[static_cast<std::size_t>(i)] == Label::Complementary)
      anom_idx.push_back(i);
  }
  if (ref_idx.empty() || anom_idx.empty())
    throw DataError("roc: need labeled rows from both classes");
  Rng rng(seed ^ 0x726F63ULL);
  auto shuffle = [&](std::vector<Index>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(
                              rng.uniform_index(static_cast<Index>(i)))]);
  };
  shuffle(ref_idx);
  shuffle(anom_idx);
  const Index per_class = std::min<Index>(
      {target / 2, static_cast<Index>(ref_idx.size()),
       static_cast<Index>(anom_idx.size())});
  RecordBatch out;
  out.features.resize(2 * per_class, all.features.cols());
  out.conditions.resize(2 * per_class, all.conditions.cols());
  for (Index i = 0; i < per_class; ++i) {
    out.features.row(2 * i) = all.features.row(ref_idx[static_cast<std::size_t>(i)]);
    out.conditions.row(2 * i) =
        all.conditions.row(ref_idx[static_cast<std::size_t>(i)]);
    out.labels.push_back(Label::Reference);
    out.features.row(2 * i + 1) =
        all.features.row(anom_idx[static_cast<std::size_t>(i)]);
    out.conditions.row(2 * i + 1) =
        all.conditions.row(anom_idx[static_cast<std::size_t>(i)]);
    out.labels.push_back(Label::Complementary);
  }
  return out;
}

int cmd_synth(const CommonArgs& common, const std::string& out_dir,
              Index n_features, Index n_conditions, Index n_train, Index n_val,
              Index n_test, double noise, double displacement,
              bool decorrelate) {
  RunConfig cfg = assemble_config(common);
  SynthSpec spec;
  spec.n_features = n_features;
  spec.n_conditions = n_conditions;
  spec.n_train = n_train;
  spec.n_val = n_val;
  spec.n_test = n_test;
  spec.noise_sigma = noise;
  spec.displacement = displacement;
  spec.decorrelate = decorrelate;
  spec.seed = cfg.pipeline.seed;
  SynthData data = generate(spec);
  write_dataset_csv(out_dir + "/train.csv", data.train, false);
  write_dataset_csv(out_dir + "/val.csv", data.val, false);
  write_dataset_csv(out_dir + "/test.csv", data.test, true);
  std::cout << "wrote " << out_dir << "/train.csv (" << data.train.size()
            << "), val.csv (" << data.val.size() << "), test.csv ("
            << data.test.size() << ")\n";
  return 0;
}

int cmd_train_cae(const CommonArgs& common, const std::string& data_path,
                  const std::string& val_path, const std::string& out_path) {
  RunConfig cfg = assemble_config(common);
  RecordBatch train = read_dataset_csv(data_path);
  CaeModel model;
  if (!val_path.empty()) {
    RecordBatch val = read_dataset_csv(val_path);
    model = train_cae(train, cae_config(cfg), &val);
  } else {
    model = train_cae(train, cae_config(cfg));
  }
  save_cae(model, out_path);
  std::cout << "trained cae: " << model.encoder.parameter_count() +
                                      model.decoder.parameter_count()
            << " parameters, best validation loss "
            << format_double(*std::min_element(model.val_loss_history.begin(),
                                               model.val_loss_history.end()))
            << "\n";
  return 0;
}

int cmd_train_flow(const CommonArgs& common, const std::string& data_path,
                   const std::string& cae_path, const std::string& out_path) {
  RunConfig cfg = assemble_config(common);
  RecordBatch train = read_dataset_csv(data_path);
  CaeModel cae = load_cae(cae_path);
  Matrix aug = augment_batch(cae, train.features, train.conditions);
  Matrix ks = scale_conditions(cae, train.conditions);
  FlowModel flow = train_flow(aug, ks, flow_config(cfg));
  save_flow(flow, out_path);
  std::cout << "trained cmaf: " << flow.parameter_count()
            << " parameters over " << flow.blocks.size()
            << " bijections, best validation nll "
            << format_double(*std::min_element(flow.val_loss_history.begin(),
                                               flow.val_loss_history.end()))
            << "\n";
  return 0;
}

int cmd_build_kde(const CommonArgs& common, const std::string& data_path,
                  const std::string& cae_path, const std::string& flow_path,
                  const std::string& out_path) {
  RunConfig cfg = assemble_config(common);
  RecordBatch train = read_dataset_csv(data_path);
  CaeModel cae = load_cae(cae_path);
  FlowModel flow = load_flow(flow_path);
  BinnedKde kde =
      build_kde(cae, flow, train, kde_grid(cfg, train), kde_options(cfg));
  save_kde(kde, out_path);
  std::cout << "built kde: " << kde.bins.size() << " bins, "
            << kde.non_sparse_count() << " non-sparse\n";
  return 0;
}

int cmd_infer(const CommonArgs& common, const std::string& data_path,
              const std::string& cae_path, const std::string& flow_path,
              const std::string& kde_path, const std::string& out_path) {
  RunConfig cfg = assemble_config(common);
  RecordBatch records = read_dataset_csv(data_path);
  Models models = load_models(cae_path, flow_path, kde_path);
  auto profiles = score_batch(records, models, pipeline_options(cfg),
                              cfg.pipeline.seed, cfg.pipeline.threads);
  auto decisions = decide_batch(profiles, cfg.pipeline.q);
  write_decisions_csv(out_path, decisions);
  Index outliers = 0;
  for (const auto& d : decisions) outliers += d.outlier;
  std::cout << "scored " << decisions.size() << " objects at q = "
            << format_double(cfg.pipeline.q) << ": " << outliers
            << " outliers -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& common, const std::string& data_path,
                 const std::string& cae_path, const std::string& flow_path,
                 const std::string& kde_path, std::vector<double> quantiles) {
  RunConfig cfg = assemble_config(common);
  RecordBatch records = read_dataset_csv(data_path);
  Models models = load_models(cae_path, flow_path, kde_path);
  if (quantiles.empty()) quantiles = {0.68, 0.95, 0.99};
  auto profiles = score_batch(records, models, pipeline_options(cfg),
                              cfg.pipeline.seed, cfg.pipeline.threads);
  std::cout << "quantile,TPR,TPR_err,TNR,TNR_err\n";
  for (double q : quantiles) {
    EvalResult r = evaluate(decide_batch(profiles, q), records.labels, q);
    print_eval_row(r);
  }
  return 0;
}

int cmd_roc(const CommonArgs& common, const std::string& data_path,
            const std::string& cae_path, const std::string& flow_path,
            const std::string& kde_path, const std::string& out_path) {
  RunConfig cfg = assemble_config(common);
  RecordBatch records = read_dataset_csv(data_path);
  Models models = load_models(cae_path, flow_path, kde_path);
  RecordBatch sampled =
      roc_subsample(records, cfg.pipeline.roc_samples, cfg.pipeline.seed);
  RocCurve curve = roc_auc(sampled, models, pipeline_options(cfg),
                           cfg.pipeline.seed, cfg.pipeline.threads);
  if (!out_path.empty()) write_roc_csv(out_path, curve);
  std::cout << "AUC = " << format_double(curve.auc) << " +- "
            << format_double(curve.sigma_auc) << " over " << sampled.size()
            << " objects\n";
  return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& data_path,
               const std::string& cae_path, const std::string& flow_path,
               const std::string& kde_path) {
  RunConfig cfg = assemble_config(common);
  RecordBatch records = read_dataset_csv(data_path);
  Models models = load_models(cae_path, flow_path, kde_path);
  AblationResult res =
      ablate_residuals(records, models, pipeline_options(cfg), cfg.pipeline.q,
                       cfg.pipeline.seed, cfg.pipeline.threads);
  std::cout << "space,quantile,TPR,TPR_err,TNR,TNR_err\n";
  std::cout << "features,";
  print_eval_row(res.features);
  std::cout << "augmented,";
  print_eval_row(res.augmented);
  return 0;
}

int cmd_perturb(const std::string& in_path, const std::string& out_path,
                int sign, double effect) {
  RecordBatch records = read_dataset_csv(in_path);
  records.features = perturb_features(records.features, sign, effect);
  bool with_labels = false;
  for (Label l : records.labels) with_labels |= l != Label::Unknown;
  write_dataset_csv(out_path, records, with_labels);
  std::cout << "perturbed " << records.size() << " rows (sign "
            << (sign >= 0 ? "+1" : "-1") << ", effect "
            << format_double(effect) << ") -> " << out_path << "\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"flux+mutability one-class classification and anomaly detection"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_dir = ".", data_path, val_path, cae_path, flow_path,
              kde_path, out_path, in_path;
  Index n_features = 6, n_conditions = 2, n_train = 20000, n_val = 2000,
        n_test = 2000;
  double noise = 0.1, displacement = 0.0, effect = 0.1;
  bool decorrelate = false;
  int sign = +1;
  std::vector<double> quantiles;

  auto* synth = app.add_subcommand("synth", "generate synthetic benchmark CSVs");
  add_common(synth, &common);
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->add_option("--features", n_features);
  synth->add_option("--conditions", n_conditions);
  synth->add_option("--n-train", n_train);
  synth->add_option("--n-val", n_val);
  synth->add_option("--n-test", n_test, "test rows per class");
  synth->add_option("--noise", noise, "conditional noise sigma");
  synth->add_option("--displacement", displacement,
                    "anomaly mean shift in units of noise sigma");
  synth->add_flag("--decorrelate", decorrelate,
                  "break the anomaly feature-condition correlation");
  synth->add_option("--seed", common.seed);

  auto* tc = app.add_subcommand("train-cae", "train the conditional autoencoder");
  add_common(tc, &common);
  tc->add_option("--data", data_path)->required();
  tc->add_option("--val", val_path, "explicit validation CSV");
  tc->add_option("--out", out_path)->required();
  tc->add_option("--seed", common.seed);

  auto* tf = app.add_subcommand("train-flow", "train the conditional flow");
  add_common(tf, &common);
  tf->add_option("--data", data_path)->required();
  tf->add_option("--cae", cae_path)->required();
  tf->add_option("--out", out_path)->required();
  tf->add_option("--seed", common.seed);

  auto* bk = app.add_subcommand("build-kde", "bin the flow latents and fit bandwidths");
  add_common(bk, &common);
  bk->add_option("--data", data_path)->required();
  bk->add_option("--cae", cae_path)->required();
  bk->add_option("--flow", flow_path)->required();
  bk->add_option("--out", out_path)->required();

  auto* inf = app.add_subcommand("infer", "score objects against generated reference clusters");
  add_common(inf, &common);
  inf->add_option("--data", data_path)->required();
  inf->add_option("--cae", cae_path)->required();
  inf->add_option("--flow", flow_path)->required();
  inf->add_option("--kde", kde_path)->required();
  inf->add_option("--out", out_path)->required();
  inf->add_option("--q", common.q, "quantile cut");
  inf->add_option("--seed", common.seed);
  inf->add_option("--threads", common.threads);

  auto* ev = app.add_subcommand("evaluate", "TPR/TNR table on a labeled set");
  add_common(ev, &common);
  ev->add_option("--data", data_path)->required();
  ev->add_option("--cae", cae_path)->required();
  ev->add_option("--flow", flow_path)->required();
  ev->add_option("--kde", kde_path)->required();
  ev->add_option("--quantiles", quantiles, "quantile cuts (default 0.68 0.95 0.99)");
  ev->add_option("--seed", common.seed);
  ev->add_option("--threads", common.threads);

  auto* roc = app.add_subcommand("roc", "quantile-sweep ROC curve and AUC");
  add_common(roc, &common);
  roc->add_option("--data", data_path)->required();
  roc->add_option("--cae", cae_path)->required();
  roc->add_option("--flow", flow_path)->required();
  roc->add_option("--kde", kde_path)->required();
  roc->add_option("--out", out_path, "curve CSV path");
  roc->add_option("--seed", common.seed);
  roc->add_option("--threads", common.threads);

  auto* ab = app.add_subcommand("ablate", "features-only vs augmented comparison");
  add_common(ab, &common);
  ab->add_option("--data", data_path)->required();
  ab->add_option("--cae", cae_path)->required();
  ab->add_option("--flow", flow_path)->required();
  ab->add_option("--kde", kde_path)->required();
  ab->add_option("--q", common.q);
  ab->add_option("--seed", common.seed);
  ab->add_option("--threads", common.threads);

  auto* pt = app.add_subcommand("perturb", "apply the bounded feature rescaling to a CSV");
  pt->add_option("--in", in_path)->required();
  pt->add_option("--out", out_path)->required();
  pt->add_option("--sign", sign, "+1 or -1")->check(CLI::IsMember({-1, 1}));
  pt->add_option("--effect", effect, "effect fraction in [0,1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed())
      return cmd_synth(common, out_dir, n_features, n_conditions, n_train,
                       n_val, n_test, noise, displacement, decorrelate);
    if (tc->parsed()) return cmd_train_cae(common, data_path, val_path, out_path);
    if (tf->parsed()) return cmd_train_flow(common, data_path, cae_path, out_path);
    if (bk->parsed())
      return cmd_build_kde(common, data_path, cae_path, flow_path, out_path);
    if (inf->parsed())
      return cmd_infer(common, data_path, cae_path, flow_path, kde_path, out_path);
    if (ev->parsed())
      return cmd_evaluate(common, data_path, cae_path, flow_path, kde_path,
                          quantiles);
    if (roc->parsed())
      return cmd_roc(common, data_path, cae_path, flow_path, kde_path, out_path);
    if (ab->parsed())
      return cmd_ablate(common, data_path, cae_path, flow_path, kde_path);
    if (pt->parsed()) return cmd_perturb(in_path, out_path, sign, effect);
  } catch (const UsageError& e) {
    std::cerr << "fluxmut: error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "fluxmut: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fluxmut: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace
}  // namespace fluxmut

int main(int argc, char** argv) { return fluxmut::run(argc, argv); }
