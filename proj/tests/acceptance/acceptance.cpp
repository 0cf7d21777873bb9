// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria (capped at 100).

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctxrr/dataset.hpp"
#include "ctxrr/eval.hpp"
#include "ctxrr/gradcheck.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/scoring.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ctxrr;
using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr std::size_t kGradConfigs = 100;
constexpr double kOracleTolerance = 1e-12;
constexpr double kAblationMargin = 0.02;
constexpr double kPipelineSeconds = 600.0;
constexpr double kSweepSlack = 0.005;
constexpr std::size_t kAblationGallery = 50;
constexpr std::size_t kDefaultK = 3;
const std::vector<std::size_t> kContextSizes = {1, 2, 3, 5, 8};

int failures = 0;

void report(bool pass, std::string_view name, const std::string& detail) {
  if (!pass) ++failures;
  fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Command {
  int code = -1;
  std::string out;
  double seconds = 0.0;
};

// Runs the CLI; stdout is captured, stderr is appended to `log`.
Command cli(const std::string& args, const fs::path& log) {
  const std::string cmd = fmt::format("\"{}\" --log-level warn {} 2>>\"{}\"", CTXRR_CLI_PATH, args, log.string());
  Command c;
  const auto start = Clock::now();
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return c;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) c.out.append(buf.data(), n);
  const int status = pclose(pipe);
  c.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  c.seconds = seconds_since(start);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CsvRow {
  std::string scorer;
  std::size_t gallery = 0;
  double map = 0.0;
  double top1 = 0.0;
};

std::vector<CsvRow> parse_report(const std::string& csv) {
  std::vector<CsvRow> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string field;
    CsvRow r;
    std::getline(f, r.scorer, ',');
    std::getline(f, field, ',');
    r.gallery = std::stoul(field);
    std::getline(f, field, ',');
    r.map = std::stod(field);
    std::getline(f, field, ',');
    r.top1 = std::stod(field);
    rows.push_back(r);
  }
  return rows;
}

class Cli {
 public:
  explicit Cli(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }
  fs::path file(const std::string& name) const { return dir_ / name; }

  // Runs and records a failure message when the exit code is not 0.
  Command run(const std::string& args) {
    Command c = cli(args, dir_ / "stderr.log");
    if (c.code != 0) errors_.push_back(fmt::format("`{}` exited with {}", args, c.code));
    return c;
  }

  std::optional<CsvRow> eval(const std::string& data, const std::string& scorer, const std::string& models,
                             std::size_t gallery) {
    const Command c = run(fmt::format("eval --data {} --scorer {} {} --gallery-size {}", data, scorer, models, gallery));
    if (c.code != 0) return std::nullopt;
    const auto rows = parse_report(c.out);
    if (rows.size() != 1) return std::nullopt;
    return rows[0];
  }

  std::string errors() const {
    std::string s;
    for (const auto& e : errors_) s += (s.empty() ? "" : "; ") + e;
    return s;
  }
  bool ok() const { return errors_.empty(); }

 private:
  fs::path dir_;
  std::vector<std::string> errors_;
};

void check_gradients() {
  GradcheckOptions options;
  options.configs = kGradConfigs;
  const auto start = Clock::now();
  const auto results = run_gradcheck(options);
  const double elapsed = seconds_since(start);
  bool pass = elapsed < kGradSeconds;
  std::string detail;
  for (const auto& c : results) {
    pass = pass && c.max_rel_error < kGradTolerance && c.configs >= kGradConfigs;
    detail += fmt::format("{} {:.2e}, ", c.name, c.max_rel_error);
  }
  report(pass, "gradient-correctness",
         fmt::format("{}{} configs each in {:.1f} s (tolerance {:.0e}, limit {:.0f} s)", detail, kGradConfigs,
                     elapsed, kGradTolerance, kGradSeconds));
}

void check_adjacency() {
  const Dataset ds = generate_synthetic(SynthConfig{});
  double worst = 0.0;
  bool exact = true;
  std::size_t graphs = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    const std::size_t k = n - 1;
    // Any two scenes with context give k pairs after replication.
    const Scene& p = ds.scenes[0];
    const Scene& g = ds.scenes[1];
    const PairScorer scorer = [](const Instance& a, const Instance& b) {
      return fused_similarity(a.embedding, b.embedding, uniform_weights());
    };
    const ExpandedPair ep = expand(p, p.instances[0], g, g.instances[0], scorer, k, 42);
    GcnConfig cfg;
    cfg.k = k;
    const ContextGraph graph = build_graph(ep, cfg);
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double want = (i == 0 || j == 0 || i == j) ? 1.0 : 0.0;
        exact = exact && graph.adjacency.at(i, j) == want;
        degree[i] += want;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = (i == 0 || j == 0 || i == j) ? 1.0 : 0.0;
        const double want = (1.0 / std::sqrt(degree[i])) * a * (1.0 / std::sqrt(degree[j]));
        worst = std::max(worst, std::abs(graph.a_hat.at(i, j) - want));
      }
    }
    ++graphs;
  }
  report(exact && worst <= kOracleTolerance, "adjacency-oracle",
         fmt::format("N = 2..8 ({} graphs), A exact: {}, max |A_hat - D^-1/2 A D^-1/2| = {:.2e} (tolerance {:.0e})",
                     graphs, exact ? "yes" : "no", worst, kOracleTolerance));
}

void check_linear_gcn() {
  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  std::size_t graphs = 0;
  for (std::size_t k = 1; k <= 8; ++k) {
    for (std::size_t f : {2, 8, 32}) {
      for (int trial = 0; trial < 20; ++trial) {
        GcnConfig cfg;
        cfg.k = k;
        cfg.layers = 1;
        cfg.relu = false;
        cfg.readout_width = 4;
        GcnParams params = GcnParams::glorot(cfg, f, rng);
        auto w = params.layers[0].mutable_data();
        for (std::size_t i = 0; i < f; ++i) {
          for (std::size_t j = 0; j < f; ++j) w[i * f + j] = i == j ? 1.0 : 0.0;
        }
        const std::size_t n = k + 1;
        std::vector<double> x(n * f);
        for (double& v : x) v = normal(rng);
        const Tensor adjacency = star_adjacency(n);
        const ContextGraph g{n, f, Tensor::matrix(n, f, x), adjacency,
                             normalize_adjacency(adjacency, AdjacencyNorm::symmetric)};
        const Tensor z = gcn_propagate(params, g);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < f; ++c) {
            double want = 0.0;
            for (std::size_t j = 0; j < n; ++j) want += g.a_hat.at(i, j) * x[j * f + c];
            worst = std::max(worst, std::abs(z.at(i, c) - want));
          }
        }
        ++graphs;
      }
    }
  }
  report(worst <= kOracleTolerance, "linear-gcn-oracle",
         fmt::format("{} random graphs, max |GCN(X) - A_hat X| = {:.2e} (tolerance {:.0e})", graphs, worst,
                     kOracleTolerance));
}

void check_metric() {
  std::size_t lists = 0;
  double worst = 0.0;
  bool presence = true;
  for (std::size_t n = 0; n <= 10; ++n) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<bool> rel(n);
      for (std::size_t i = 0; i < n; ++i) rel[i] = (mask >> i) & 1u;
      double sum = 0.0;
      std::size_t relevant = 0;
      for (std::size_t k = 1; k <= n; ++k) {
        if (!rel[k - 1]) continue;
        ++relevant;
        std::size_t hits = 0;
        for (std::size_t j = 0; j < k; ++j) hits += rel[j] ? 1 : 0;
        sum += double(hits) / double(k);
      }
      const auto got = average_precision(rel);
      if (relevant == 0) {
        presence = presence && !got.has_value();
      } else {
        presence = presence && got.has_value();
        if (got) worst = std::max(worst, std::abs(*got - sum / double(relevant)));
      }
      ++lists;
    }
  }
  const Dataset ds = generate_synthetic(SynthConfig{});
  const auto pool = ds.scenes_in_split("test");
  const auto queries = make_queries(ds, "test");
  const EvalReport oracle = evaluate(ds, queries, pool, IdentityOracleScorer{}, kAblationGallery, 42);
  const bool perfect = oracle.map == 1.0 && oracle.top1 == 1.0;
  report(presence && worst <= kOracleTolerance && perfect, "metric-oracle",
         fmt::format("{} lists of length <= 10, max |AP - oracle| = {:.2e}; identity oracle mAP {} top-1 {} over {} "
                     "queries",
                     lists, worst, oracle.map, oracle.top1, oracle.num_queries));
}

struct BenchmarkModels {
  std::string data;
  std::string attn;
  std::map<std::size_t, std::string> gcn;  // by K
  std::map<std::size_t, double> graph_map;  // by K, gallery 50
};

void check_ablation(Cli& cli, BenchmarkModels& m) {
  m.data = cli.file("synthetic.jsonl").string();
  m.attn = cli.file("attention.ckpt").string();
  m.gcn[kDefaultK] = cli.file("graph_k3.ckpt").string();
  double pipeline = 0.0;
  pipeline += cli.run("gen --out " + m.data).seconds;
  pipeline += cli.run(fmt::format("train-attn --data {} --out {}", m.data, m.attn)).seconds;
  pipeline += cli.run(fmt::format("train-gcn --data {} --attn {} --out {}", m.data, m.attn, m.gcn[kDefaultK])).seconds;
  const auto start = Clock::now();
  const auto graph = cli.eval(m.data, "graph", fmt::format("--attn {} --gcn {}", m.attn, m.gcn[kDefaultK]),
                              kAblationGallery);
  pipeline += seconds_since(start);
  const auto uniform = cli.eval(m.data, "uniform", "", kAblationGallery);
  const auto attention = cli.eval(m.data, "attention", "--attn " + m.attn, kAblationGallery);
  if (!cli.ok() || !graph || !uniform || !attention) {
    report(false, "ablation-ordering", cli.errors());
    return;
  }
  m.graph_map[kDefaultK] = graph->map;
  const bool pass = graph->map >= attention->map + kAblationMargin &&
                    attention->map >= uniform->map + kAblationMargin && pipeline < kPipelineSeconds;
  report(pass, "ablation-ordering",
         fmt::format("mAP uniform {:.4f} < attention {:.4f} < graph {:.4f} (margins {:+.4f}, {:+.4f}; required "
                     "{:.2f}); gen+train-attn+train-gcn+eval took {:.0f} s (limit {:.0f} s)",
                     uniform->map, attention->map, graph->map, attention->map - uniform->map,
                     graph->map - attention->map, kAblationMargin, pipeline, kPipelineSeconds));
}

void check_context_curve(Cli& cli, BenchmarkModels& m) {
  for (std::size_t k : kContextSizes) {
    if (m.graph_map.count(k)) continue;
    m.gcn[k] = cli.file(fmt::format("graph_k{}.ckpt", k)).string();
    cli.run(fmt::format("train-gcn --data {} --attn {} --context-k {} --out {}", m.data, m.attn, k, m.gcn[k]));
    const auto r = cli.eval(m.data, "graph", fmt::format("--attn {} --gcn {}", m.attn, m.gcn[k]), kAblationGallery);
    if (r) m.graph_map[k] = r->map;
  }
  if (!cli.ok() || m.graph_map.size() != kContextSizes.size()) {
    report(false, "context-size-curve", cli.errors());
    return;
  }
  std::size_t best = kContextSizes.front();
  std::string curve;
  for (std::size_t k : kContextSizes) {
    if (m.graph_map[k] > m.graph_map[best]) best = k;
    curve += fmt::format("K={} {:.4f}, ", k, m.graph_map[k]);
  }
  const bool interior = best != kContextSizes.front() && best != kContextSizes.back();
  report(interior, "context-size-curve", fmt::format("{}maximum at K={}", curve, best));
}

void check_gallery_sweep(Cli& cli, const BenchmarkModels& m) {
  const Command c = cli.run(fmt::format("sweep --data {} --scorer graph --attn {} --gcn {} --sizes 10,25,50,100",
                                        m.data, m.attn, m.gcn.at(kDefaultK)));
  const auto rows = c.code == 0 ? parse_report(c.out) : std::vector<CsvRow>{};
  if (rows.size() != 4) {
    report(false, "gallery-size-degradation", cli.errors());
    return;
  }
  bool pass = true;
  std::string curve;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) pass = pass && rows[i].map <= rows[i - 1].map + kSweepSlack;
    curve += fmt::format("{}{} {:.4f}", i ? ", " : "", rows[i].gallery, rows[i].map);
  }
  report(pass, "gallery-size-degradation", fmt::format("graph mAP by gallery size: {} (slack {})", curve, kSweepSlack));
}

void check_siamese(Cli& cli, const BenchmarkModels& m) {
  const std::string ckpt = cli.file("siamese_k3.ckpt").string();
  cli.run(fmt::format("train-gcn --siamese --data {} --attn {} --out {}", m.data, m.attn, ckpt));
  const auto siamese = cli.eval(m.data, "siamese", fmt::format("--attn {} --gcn {}", m.attn, ckpt), kAblationGallery);
  if (!cli.ok() || !siamese || !m.graph_map.count(kDefaultK)) {
    report(false, "siamese-comparison", cli.errors());
    return;
  }
  const double graph = m.graph_map.at(kDefaultK);
  report(graph >= siamese->map, "siamese-comparison",
         fmt::format("paired graph mAP {:.4f} vs siamese {:.4f} (K=3, seed 42, gallery {})", graph, siamese->map,
                     kAblationGallery));
}

// Runs every command on a small dataset in `dir` and returns the produced
// files and stdout, keyed by name.
std::map<std::string, std::string> determinism_run(const fs::path& dir, std::string& errors) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  Cli cli(dir);
  const auto f = [&](const char* name) { return cli.file(name).string(); };
  std::map<std::string, std::string> out;
  const auto keep = [&](const std::string& key, const Command& c) { out[key + ".stdout"] = c.out; };
  keep("gen", cli.run("gen --identities 40 --cameras 4 --scenes-per-camera 12 --max-instances 4 --out " +
                      f("d.jsonl")));
  keep("gen-blob", cli.run("gen --identities 40 --cameras 4 --scenes-per-camera 12 --blob --out " + f("b.jsonl")));
  keep("train-attn", cli.run(fmt::format("train-attn --data {} --epochs 3 --out {} --loss-csv {}", f("d.jsonl"),
                                         f("a.ckpt"), f("a.csv"))));
  keep("train-gcn", cli.run(fmt::format("train-gcn --data {} --attn {} --epochs 2 --readout 64 --out {} --loss-csv {}",
                                        f("d.jsonl"), f("a.ckpt"), f("g.ckpt"), f("g.csv"))));
  keep("train-siamese",
       cli.run(fmt::format("train-gcn --siamese --data {} --attn {} --epochs 2 --readout 64 --out {} --loss-csv {}",
                           f("d.jsonl"), f("a.ckpt"), f("s.ckpt"), f("s.csv"))));
  const std::string models = fmt::format("--attn {} --gcn {}", f("a.ckpt"), f("g.ckpt"));
  for (const char* scorer : {"uniform", "attention", "graph", "random"}) {
    keep(std::string("eval-") + scorer,
         cli.run(fmt::format("eval --data {} --scorer {} {} --gallery-size 10", f("d.jsonl"), scorer, models)));
  }
  keep("eval-siamese", cli.run(fmt::format("eval --data {} --scorer siamese --attn {} --gcn {} --gallery-size 10",
                                           f("d.jsonl"), f("a.ckpt"), f("s.ckpt"))));
  keep("sweep", cli.run(fmt::format("sweep --data {} --scorer graph {} --sizes 5,10", f("d.jsonl"), models)));
  const Dataset ds = load_dataset(f("d.jsonl"));
  const std::string probe = make_queries(ds, "test").front()->instance_id;
  keep("rerank", cli.run(fmt::format("rerank --data {} --scorer graph {} --probe {}", f("d.jsonl"), models, probe)));
  keep("gradcheck", cli.run("gradcheck --configs 2"));
  keep("validate", cli.run("validate --data " + f("d.jsonl")));
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename() != "stderr.log") out[entry.path().filename().string()] = slurp(entry.path());
  }
  errors = cli.errors();
  return out;
}

void check_determinism(const fs::path& work) {
  std::string errors_a, errors_b;
  const auto a = determinism_run(work / "determinism_a", errors_a);
  const auto b = determinism_run(work / "determinism_b", errors_b);
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) differing.push_back(name);
  }
  const bool pass = errors_a.empty() && errors_b.empty() && differing.empty() && a.size() == b.size();
  std::string detail = fmt::format("{} outputs of gen, train-attn, train-gcn (paired and siamese), eval, sweep, "
                                   "rerank, gradcheck and validate compared byte for byte across two runs",
                                   a.size());
  if (!differing.empty()) detail += "; differing: " + fmt::format("{}", fmt::join(differing, ", "));
  if (!errors_a.empty()) detail += "; " + errors_a;
  report(pass, "determinism", detail);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "ctxrr_acceptance";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--work") work = argv[i + 1];
  }
  fs::create_directories(work);
  try {
    check_gradients();
    check_adjacency();
    check_linear_gcn();
    check_metric();
    const fs::path bench = work / "benchmark";
    fs::remove_all(bench);
    fs::create_directories(bench);
    Cli cli(bench);
    BenchmarkModels models;
    check_ablation(cli, models);
    check_context_curve(cli, models);
    check_gallery_sweep(cli, models);
    check_siamese(cli, models);
    check_determinism(work);
  } catch (const std::exception& e) {
    report(false, "acceptance-run", e.what());
  }
  return std::min(failures, 100);
}
