#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ctxrr/attention.hpp"
#include "ctxrr/checkpoint.hpp"
#include "ctxrr/dataset.hpp"
#include "ctxrr/errors.hpp"
#include "ctxrr/eval.hpp"
#include "ctxrr/gradcheck.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/log.hpp"
#include "ctxrr/scoring.hpp"
#include "ctxrr/siamese.hpp"

namespace ctxrr::cli {

namespace {

template <typename... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  log_message(LogLevel::info, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void warn(fmt::format_string<Args...> f, Args&&... args) {
  log_message(LogLevel::warn, fmt::format(f, std::forward<Args>(args)...));
}

struct Common {
  std::string log_level = "info";
};

struct GenOptions {
  SynthConfig synth;
  std::string out = "synthetic.jsonl";
  bool blob = false;
};

struct ScheduleFlags {
  double lr = 0.1;
  int epochs = 20;
  int lr_step = 10;
  double lr_factor = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;

  SgdConfig to_config() const {
    SgdConfig cfg;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.schedule.clear();
    if (lr_step > 0) cfg.schedule.push_back({lr_step, lr_factor});
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

struct TrainAttnOptions {
  std::string data;
  std::string out = "attention.ckpt";
  std::string split = "train";
  double margin = 0.3;
  std::size_t hidden = 256;
  double negative_ratio = 3.0;
  ScheduleFlags sched{0.1, 10};
  std::string loss_csv;
};

struct GraphFlags {
  std::size_t k = 3;
  std::size_t layers = 3;
  std::string norm = "sym";
  std::string node_feat = "whole";
  std::size_t readout = 1024;

  GcnConfig to_config() const {
    GcnConfig cfg;
    cfg.k = k;
    cfg.layers = layers;
    cfg.norm = parse_adjacency_norm(norm);
    cfg.features = parse_node_features(node_feat);
    cfg.readout_width = readout;
    cfg.validate();
    return cfg;
  }
};

struct TrainGcnOptions {
  std::string data;
  std::string attn;
  std::string out = "graph.ckpt";
  std::string split = "train";
  GraphFlags graph;
  double negative_ratio = 3.0;
  ScheduleFlags sched;
  std::size_t views = 4;
  bool no_augment = false;
  bool siamese = false;
  std::string loss_csv;
};

struct ScoreFlags {
  std::string data;
  std::string scorer = "graph";
  std::string attn;
  std::string gcn;
  std::string split = "test";
  std::uint64_t seed = 42;
};

struct RerankOptions {
  ScoreFlags score;
  std::string probe;
  std::size_t top = 20;
};

struct EvalOptions {
  ScoreFlags score;
  std::size_t gallery_size = 50;
  std::string out;
  std::string per_query;
};

struct SweepOptions {
  ScoreFlags score;
  std::vector<std::size_t> sizes = {10, 25, 50, 100};
  std::string out;
};

struct GradcheckFlags {
  GradcheckOptions options;
  std::vector<std::string> components;
  double tolerance = 1e-4;
};

struct ValidateOptions {
  std::string data;
};

LogLevel parse_log_level(const std::string& s) {
  if (s == "quiet") return LogLevel::quiet;
  if (s == "warn") return LogLevel::warn;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  throw UsageError("unknown log level '" + s + "'");
}

Dataset open_dataset(const std::string& arg) {
  const auto path = resolve_data_path(arg);
  if (!std::filesystem::exists(path)) throw DataError("dataset file not found: " + path.string());
  return load_dataset(path);
}

Checkpoint open_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

AttentionParams open_attention(const std::string& path, const Dataset& ds) {
  AttentionParams p = AttentionParams::from_checkpoint(open_checkpoint(path));
  if (p.dim() != ds.dim) {
    throw DimensionError("attention checkpoint " + path + " was trained for d=" + std::to_string(p.dim()) +
                         " but the dataset has d=" + std::to_string(ds.dim));
  }
  return p;
}

// Writes to `path`, or to stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
  if (path.empty()) return;
  std::ostringstream s;
  s << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) s << (e + 1) << ',' << fmt_double(losses[e]) << '\n';
  emit(path, s.str());
}

std::unique_ptr<Scorer> make_scorer(const ScoreFlags& f, const Dataset& ds) {
  std::optional<AttentionParams> attn;
  if (!f.attn.empty()) attn = open_attention(f.attn, ds);
  if (f.scorer == "uniform") return std::make_unique<UniformScorer>();
  if (f.scorer == "oracle") return std::make_unique<IdentityOracleScorer>();
  if (f.scorer == "random") return std::make_unique<RandomScorer>(f.seed);
  if (f.scorer == "attention") {
    if (!attn) throw UsageError("--scorer attention needs --attn");
    return std::make_unique<AttentionScorer>(*attn, ds);
  }
  if (f.gcn.empty()) throw UsageError("--scorer " + f.scorer + " needs --gcn");
  if (!attn) warn("no --attn given: contexts are matched with uniform part weights");
  const Checkpoint ckpt = open_checkpoint(f.gcn);
  if (f.scorer == "graph") return std::make_unique<GraphScorer>(ds, attn, GcnParams::from_checkpoint(ckpt));
  return std::make_unique<SiameseScorer>(ds, attn, SiameseParams::from_checkpoint(ckpt));
}

std::vector<const Scene*> pool_of(const Dataset& ds, const std::string& split) {
  auto pool = ds.scenes_in_split(split);
  if (pool.empty()) throw DataError("no scenes in split '" + split + "'");
  return pool;
}

int run_gen(const GenOptions& o) {
  o.synth.validate();
  const Dataset ds = generate_synthetic(o.synth);
  save_dataset(ds, o.out, o.blob ? EmbeddingStorage::blob : EmbeddingStorage::inline_hex);
  const ValidationReport rep = validate(ds);
  info("wrote {} ({} scenes, {} instances, {} identities, {} graph-trainable pairs)", o.out,
                rep.num_scenes, rep.num_instances, rep.num_identities, rep.graph_trainable_pairs);
  for (const auto& w : rep.warnings) warn("{}", w);
  return 0;
}

int run_train_attn(const TrainAttnOptions& o) {
  VerificationConfig vcfg{o.margin};
  vcfg.validate();
  AttentionTrainConfig cfg;
  cfg.hidden = o.hidden;
  cfg.negative_ratio = o.negative_ratio;
  cfg.sgd = o.sched.to_config();
  const Dataset ds = open_dataset(o.data);
  const auto result = train_attention(ds, o.split, cfg, vcfg);
  save_checkpoint(result.params.to_checkpoint(), o.out);
  write_loss_csv(o.loss_csv, result.epoch_loss);
  info("saved attention head to {} (final loss {:.6f})", o.out, result.epoch_loss.back());
  return 0;
}

int run_train_gcn(const TrainGcnOptions& o) {
  GraphTrainOptions opts;
  opts.gcn = o.graph.to_config();
  opts.sgd = o.sched.to_config();
  opts.negative_ratio = o.negative_ratio;
  opts.split = o.split;
  opts.augment = {o.views, !o.no_augment};
  if (!(o.negative_ratio >= 0.0)) throw ConfigError("--neg-ratio must be >= 0");
  const Dataset ds = open_dataset(o.data);
  std::optional<AttentionParams> attn;
  if (!o.attn.empty()) {
    attn = open_attention(o.attn, ds);
  } else {
    warn("no --attn given: contexts are matched with uniform part weights");
  }
  if (o.siamese) {
    const auto result = train_siamese_model(ds, attn, opts);
    save_checkpoint(result.params.to_checkpoint(), o.out);
    write_loss_csv(o.loss_csv, result.epoch_loss);
    info("saved siamese model to {} (train accuracy {:.4f})", o.out, result.train_accuracy);
  } else {
    const auto result = train_graph_model(ds, attn, opts);
    save_checkpoint(result.params.to_checkpoint(), o.out);
    write_loss_csv(o.loss_csv, result.epoch_loss);
    info("saved graph model to {} (train accuracy {:.4f})", o.out, result.train_accuracy);
  }
  return 0;
}

int run_rerank(const RerankOptions& o) {
  const Dataset ds = open_dataset(o.score.data);
  const Instance* probe = ds.find_instance(o.probe);
  if (probe == nullptr) throw DataError("probe '" + o.probe + "' is not in the dataset");
  const auto scorer = make_scorer(o.score, ds);
  std::vector<const Scene*> gallery;
  for (const Scene* s : ds.scenes_in_split(o.score.split)) {
    if (s != &ds.scene_of(*probe)) gallery.push_back(s);
  }
  const auto ranked = rank_gallery(*probe, gallery, scorer->score(*probe, ds.scene_of(*probe), gallery));
  std::ostringstream s;
  s << "rank,instance_id,scene_id,score,same_identity\n";
  for (std::size_t i = 0; i < ranked.ranked.size() && i < o.top; ++i) {
    const auto& e = ranked.ranked[i];
    s << (i + 1) << ',' << e.gallery->instance_id << ',' << e.gallery->scene_id << ',' << fmt_double(e.score) << ','
      << (e.relevant ? 1 : 0) << '\n';
  }
  emit("", s.str());
  return 0;
}

int run_eval(const EvalOptions& o) {
  const Dataset ds = open_dataset(o.score.data);
  const auto scorer = make_scorer(o.score, ds);
  const auto pool = pool_of(ds, o.score.split);
  const auto queries = make_queries(ds, o.score.split);
  const EvalReport report = evaluate(ds, queries, pool, *scorer, o.gallery_size, o.score.seed);
  std::ostringstream s;
  write_report_csv(s, std::span<const EvalReport>(&report, 1));
  emit(o.out, s.str());
  if (!o.per_query.empty()) {
    std::ostringstream q;
    write_per_query_csv(q, report);
    emit(o.per_query, q.str());
  }
  info("{}: mAP {:.4f}, top-1 {:.4f} over {} queries ({} excluded); iou criterion: {}", report.scorer,
                report.map, report.top1, report.num_queries, report.excluded_queries, report.iou_criterion);
  return 0;
}

int run_sweep(const SweepOptions& o) {
  const Dataset ds = open_dataset(o.score.data);
  const auto scorer = make_scorer(o.score, ds);
  const auto pool = pool_of(ds, o.score.split);
  const auto queries = make_queries(ds, o.score.split);
  const auto reports = gallery_sweep(ds, queries, pool, *scorer, o.sizes, o.score.seed);
  std::ostringstream s;
  write_report_csv(s, reports);
  emit(o.out, s.str());
  return 0;
}

int run_gradcheck_cmd(const GradcheckFlags& f) {
  auto names = f.components.empty() ? gradcheck_component_names() : f.components;
  std::ostringstream s;
  s << "component,configs,coordinates,skipped_kinks,max_rel_error,status\n";
  bool ok = true;
  for (const auto& name : names) {
    const GradcheckComponent c = run_gradcheck_component(name, f.options);
    const bool pass = c.max_rel_error < f.tolerance;
    ok = ok && pass;
    s << c.name << ',' << c.configs << ',' << c.coordinates << ',' << c.skipped_kinks << ','
      << fmt_sci(c.max_rel_error) << ',' << (pass ? "ok" : "FAIL") << '\n';
    info("{}: max rel err {:.3e} over {} coordinates in {:.2f}s", c.name, c.max_rel_error, c.coordinates,
                  c.seconds);
  }
  emit("", s.str());
  if (!ok) throw NumericError("gradient check exceeded the tolerance");
  return 0;
}

int run_validate(const ValidateOptions& o) {
  const Dataset ds = open_dataset(o.data);
  const ValidationReport r = validate(ds);
  std::ostringstream s;
  s << "scenes," << r.num_scenes << "\ninstances," << r.num_instances << "\nidentities," << r.num_identities
    << "\nsingleton_scenes," << r.singleton_scenes << "\nunlabeled_instances," << r.unlabeled_instances
    << "\npositive_pairs," << r.positive_pairs << "\ncross_camera_positive_pairs," << r.cross_camera_positive_pairs
    << "\ngraph_trainable_pairs," << r.graph_trainable_pairs << "\nwarnings," << r.warnings.size() << '\n';
  emit("", s.str());
  for (const auto& w : r.warnings) warn("{}", w);
  return 0;
}

void add_schedule(CLI::App* cmd, ScheduleFlags& s, const char* epochs_note) {
  cmd->add_option("--lr", s.lr, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", s.epochs, epochs_note)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--lr-step", s.lr_step, "Epoch after which the rate is multiplied by --lr-factor (0 disables)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr-factor", s.lr_factor, "Rate multiplier applied after --lr-step epochs (0.5 halves it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", s.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--seed", s.seed, "Seed for initialization, sampling and shuffling")->capture_default_str();
}

void add_score_flags(CLI::App* cmd, ScoreFlags& f) {
  cmd->add_option("--data", f.data, "Dataset file (relative paths fall back to $CONTEXT_RERANK_DATA_DIR)")
      ->required();
  cmd->add_option("--scorer", f.scorer, "uniform | attention | graph | siamese | oracle | random")
      ->capture_default_str()
      ->check(CLI::IsMember({"uniform", "attention", "graph", "siamese", "oracle", "random"}));
  cmd->add_option("--attn", f.attn, "Attention checkpoint (attention scorer; context matching for graph scorers)");
  cmd->add_option("--gcn", f.gcn, "Graph checkpoint from train-gcn (graph) or train-gcn --siamese (siamese)");
  cmd->add_option("--split", f.split, "Scene split used as queries and gallery pool (empty: all scenes)")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for gallery sampling")->capture_default_str();
}

}  // namespace

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

int run(int argc, char** argv) {
  CLI::App app{"Context-aware person re-ranking: part-attention similarity, context expansion and graph scoring"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "ctxrr 0.1.0");
  Common common;
  app.add_option("--log-level", common.log_level, "quiet | warn | info | debug (logs go to stderr)")
      ->capture_default_str()
      ->check(CLI::IsMember({"quiet", "warn", "info", "debug"}));

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scene dataset");
  auto& sc = gen.synth;
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->capture_default_str();
  gen_cmd->add_flag("--blob", gen.blob, "Store embeddings in a companion <out>.emb binary blob");
  gen_cmd->add_option("--seed", sc.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--identities", sc.num_identities, "Number of identities")->capture_default_str();
  gen_cmd->add_option("--cameras", sc.num_cameras, "Number of cameras (arranged in a ring)")->capture_default_str();
  gen_cmd->add_option("--scenes-per-camera", sc.scenes_per_camera, "Scenes per camera")->capture_default_str();
  gen_cmd->add_option("--min-instances", sc.min_instances_per_scene, "Minimum persons per scene")
      ->capture_default_str();
  gen_cmd->add_option("--max-instances", sc.max_instances_per_scene, "Maximum persons per scene")
      ->capture_default_str();
  gen_cmd->add_option("--group-size", sc.group_size_mean, "Mean travel-group size")->capture_default_str();
  gen_cmd->add_option("--co-travel", sc.co_travel_prob,
                      "Probability that a group seen by one camera reappears together at a neighboring camera")
      ->capture_default_str();
  gen_cmd->add_option("--sigma", sc.view_noise_sigma, "Per-view gaussian noise on part vectors")
      ->capture_default_str();
  gen_cmd->add_option("--dropout", sc.part_dropout_prob, "Probability that one non-whole part is occluded")
      ->capture_default_str();
  gen_cmd->add_option("--dim", sc.dim, "Embedding dimension d per part")->capture_default_str();
  gen_cmd->add_option("--clusters", sc.appearance_clusters, "Appearance clusters per part (look-alike identities)")
      ->capture_default_str();
  gen_cmd->add_option("--spread", sc.appearance_spread, "Identity offset from its cluster center")
      ->capture_default_str();
  gen_cmd->add_option("--part-noise", sc.part_noise_scale, "View noise multiplier for the three body-part crops")
      ->capture_default_str();
  gen_cmd->add_option("--occluders", sc.num_occluders, "Number of occluder appearances")->capture_default_str();
  gen_cmd->add_option("--train-fraction", sc.train_fraction, "Fraction of identities in the train split")
      ->capture_default_str();

  TrainAttnOptions ta;
  auto* ta_cmd = app.add_subcommand("train-attn", "Train the pairwise part-attention head");
  ta_cmd->add_option("--data", ta.data, "Dataset file")->required();
  ta_cmd->add_option("--out", ta.out, "Checkpoint to write")->capture_default_str();
  ta_cmd->add_option("--split", ta.split, "Split to train on")->capture_default_str();
  ta_cmd->add_option("--margin", ta.margin, "Verification loss margin alpha, in [0, 1)")->capture_default_str();
  ta_cmd->add_option("--hidden", ta.hidden, "Hidden width of the first layer")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ta_cmd->add_option("--neg-ratio", ta.negative_ratio, "Negatives drawn per positive pair each epoch")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  ta_cmd->add_option("--loss-csv", ta.loss_csv, "Write per-epoch mean loss here");
  add_schedule(ta_cmd, ta.sched, "Training epochs");

  TrainGcnOptions tg;
  auto* tg_cmd = app.add_subcommand("train-gcn", "Train the context graph model");
  tg_cmd->add_option("--data", tg.data, "Dataset file")->required();
  tg_cmd->add_option("--attn", tg.attn, "Attention checkpoint used to match context pairs (uniform weights if absent)");
  tg_cmd->add_option("--out", tg.out, "Checkpoint to write")->capture_default_str();
  tg_cmd->add_option("--split", tg.split, "Split to train on")->capture_default_str();
  tg_cmd->add_option("--context-k", tg.graph.k, "Context pairs per target")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tg_cmd->add_option("--gcn-layers", tg.graph.layers, "Number of graph convolution layers")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tg_cmd->add_option("--norm", tg.graph.norm, "Adjacency normalization: sym (D^-1/2 A D^-1/2) or row (D^-1 A)")
      ->capture_default_str()
      ->check(CLI::IsMember({"sym", "row"}));
  tg_cmd->add_option("--node-feat", tg.graph.node_feat, "Node features: whole-body part or all four parts")
      ->capture_default_str()
      ->check(CLI::IsMember({"whole", "allparts"}));
  tg_cmd->add_option("--readout", tg.graph.readout, "Readout width")->capture_default_str()->check(CLI::PositiveNumber);
  tg_cmd->add_option("--neg-ratio", tg.negative_ratio, "Different-identity pairs per same-identity pair")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  tg_cmd->add_option("--views", tg.views, "Augmented copies of every training pair per epoch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tg_cmd->add_flag("--no-augment", tg.no_augment, "Train on the raw features (no signed coordinate permutation)");
  tg_cmd->add_flag("--siamese", tg.siamese, "Train the two-graph comparison model instead");
  tg_cmd->add_option("--loss-csv", tg.loss_csv, "Write per-epoch mean loss here");
  add_schedule(tg_cmd, tg.sched, "Training epochs (lr 0.1 halved after epoch 10, 20 epochs in total)");

  RerankOptions rr;
  auto* rr_cmd = app.add_subcommand("rerank", "Rank every gallery person of a split against one probe");
  add_score_flags(rr_cmd, rr.score);
  rr_cmd->add_option("--probe", rr.probe, "Probe instance id")->required();
  rr_cmd->add_option("--top", rr.top, "Rows to print")->capture_default_str()->check(CLI::PositiveNumber);

  EvalOptions ev;
  auto* ev_cmd = app.add_subcommand("eval", "mAP and top-1 for one scorer and gallery size");
  add_score_flags(ev_cmd, ev.score);
  ev_cmd->add_option("--gallery-size", ev.gallery_size, "Gallery scenes per query")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--out", ev.out, "CSV report file (stdout if absent)");
  ev_cmd->add_option("--per-query", ev.per_query, "Per-query AP file");

  SweepOptions sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Evaluate over several gallery sizes");
  add_score_flags(sw_cmd, sw.score);
  sw_cmd->add_option("--sizes", sw.sizes, "Gallery sizes")->delimiter(',')->capture_default_str();
  sw_cmd->add_option("--out", sw.out, "CSV report file (stdout if absent)");

  GradcheckFlags gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
  gc_cmd->add_option("--configs", gc.options.configs, "Random configurations per component")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gc_cmd->add_option("--seed", gc.options.seed, "Seed")->capture_default_str();
  gc_cmd->add_option("--step", gc.options.step, "Finite-difference step h")->capture_default_str()
      ->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tolerance", gc.tolerance, "Maximum accepted relative error")->capture_default_str();
  gc_cmd->add_option("--component", gc.components, "Restrict to these components (repeatable)")
      ->check(CLI::IsMember(gradcheck_component_names()));

  ValidateOptions va;
  auto* va_cmd = app.add_subcommand("validate", "Load a dataset and print its integrity report");
  va_cmd->add_option("--data", va.data, "Dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    set_log_level(parse_log_level(common.log_level));
    if (gen_cmd->parsed()) return run_gen(gen);
    if (ta_cmd->parsed()) return run_train_attn(ta);
    if (tg_cmd->parsed()) return run_train_gcn(tg);
    if (rr_cmd->parsed()) return run_rerank(rr);
    if (ev_cmd->parsed()) return run_eval(ev);
    if (sw_cmd->parsed()) return run_sweep(sw);
    if (gc_cmd->parsed()) return run_gradcheck_cmd(gc);
    if (va_cmd->parsed()) return run_validate(va);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace ctxrr::cli
