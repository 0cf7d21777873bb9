#include "ctxrr/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ctxrr/attention.hpp"
#include "ctxrr/errors.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/ops.hpp"
#include "ctxrr/siamese.hpp"

namespace ctxrr {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

struct Probe {
  double value;
  std::uint64_t pattern;
};

Probe evaluate(const std::function<Tensor()>& loss) {
  NoGradGuard no_grad;
  KinkRecorder kinks;
  const double v = loss().item();
  return {v, kinks.pattern()};
}

}  // namespace

FiniteDifferenceResult finite_difference_check(const std::function<Tensor()>& loss, std::span<Tensor> inputs,
                                               Rng& rng, std::size_t max_coords, double step) {
  for (Tensor& t : inputs) {
    if (!t.requires_grad()) throw UsageError("finite_difference_check: every input must require grad");
    t.zero_grad();
  }
  std::uint64_t base_pattern = 0;
  {
    KinkRecorder kinks;
    Tensor l = loss();
    base_pattern = kinks.pattern();
    l.backward();
  }
  FiniteDifferenceResult result;
  for (Tensor& t : inputs) {
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i : coords) {
      double& x = t.mutable_data()[i];
      const double original = x;
      x = original + step;
      const Probe plus = evaluate(loss);
      x = original - step;
      const Probe minus = evaluate(loss);
      x = original;
      if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * step);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i], numeric));
      ++result.coordinates;
    }
  }
  for (Tensor& t : inputs) t.zero_grad();
  return result;
}

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor uniform_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Instance random_instance(const std::string& id, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  PartEmbedding::Parts parts;
  for (auto& p : parts) {
    p.resize(dim);
    double norm = 0.0;
    for (double& x : p) {
      x = n(rng);
      norm += x * x;
    }
    for (double& x : p) x /= std::sqrt(norm);
  }
  return {id, "scene", {}, std::nullopt, PartEmbedding::from_parts(std::move(parts), id)};
}

ContextGraph random_graph(std::size_t nodes, std::size_t width, AdjacencyNorm norm, Rng& rng) {
  Tensor a = star_adjacency(nodes);
  return {nodes, width, uniform_tensor({nodes, width}, rng, false), a, normalize_adjacency(a, norm)};
}

GcnConfig random_gcn_config(Rng& rng) {
  GcnConfig cfg;
  cfg.k = pick(rng, 1, 4);
  cfg.layers = pick(rng, 1, 3);
  cfg.norm = pick(rng, 0, 1) == 0 ? AdjacencyNorm::symmetric : AdjacencyNorm::row;
  cfg.readout_width = pick(rng, 2, 6);
  cfg.relu = pick(rng, 0, 3) != 0;
  return cfg;
}

using Suite = FiniteDifferenceResult (*)(Rng&, const GradcheckOptions&);

FiniteDifferenceResult check_matmul(Rng& rng, const GradcheckOptions& o) {
  const std::size_t m = pick(rng, 1, 5), k = pick(rng, 1, 5), n = pick(rng, 1, 5);
  std::vector<Tensor> in = {uniform_tensor({m, k}, rng), uniform_tensor({k, n}, rng)};
  const Tensor r = uniform_tensor({m, n}, rng, false);
  auto loss = [&] { return sum(mul(matmul(in[0], in[1]), r)); };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

FiniteDifferenceResult check_elementwise(Rng& rng, const GradcheckOptions& o) {
  const std::size_t m = pick(rng, 1, 4), n = pick(rng, 1, 6);
  std::vector<Tensor> in = {uniform_tensor({m, n}, rng), uniform_tensor({m, n}, rng), uniform_tensor({n, n}, rng),
                            uniform_tensor({n}, rng)};
  const Tensor r = uniform_tensor({m, n}, rng, false);
  const double factor = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
  auto loss = [&] {
    Tensor t = add(mul(in[0], in[1]), scale(sub(in[1], in[0]), factor));
    return sum(mul(relu(linear(t, in[2], in[3])), r));
  };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

FiniteDifferenceResult check_softmax(Rng& rng, const GradcheckOptions& o) {
  const std::size_t b = pick(rng, 1, 4), n = pick(rng, 1, 6);
  std::vector<Tensor> in = {uniform_tensor({n}, rng), uniform_tensor({b, n}, rng)};
  const Tensor r1 = uniform_tensor({n}, rng, false), r2 = uniform_tensor({b, n}, rng, false);
  auto loss = [&] { return add(sum(mul(softmax(in[0]), r1)), sum(mul(softmax_rows(in[1]), r2))); };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

FiniteDifferenceResult check_cross_entropy(Rng& rng, const GradcheckOptions& o) {
  const std::size_t b = pick(rng, 1, 5);
  std::vector<Tensor> in = {uniform_tensor({2}, rng), uniform_tensor({b, 2}, rng), uniform_tensor({b}, rng)};
  const int label = static_cast<int>(pick(rng, 0, 1));
  std::vector<int> labels(b), signs(b);
  for (std::size_t i = 0; i < b; ++i) {
    labels[i] = static_cast<int>(pick(rng, 0, 1));
    signs[i] = pick(rng, 0, 1) == 0 ? -1 : 1;
  }
  const double margin = std::uniform_real_distribution<double>(0.0, 0.9)(rng);
  auto loss = [&] {
    Tensor t = add(cross_entropy_binary(in[0], label), cross_entropy_rows(in[1], labels));
    return add(t, cosine_embedding_loss(in[2], signs, margin));
  };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

FiniteDifferenceResult check_attention(Rng& rng, const GradcheckOptions& o) {
  const std::size_t dim = pick(rng, 2, 4), hidden = pick(rng, 2, 6), npairs = pick(rng, 2, 4);
  AttentionParams params = AttentionParams::glorot(dim, hidden, rng);
  // Random biases so the ReLU pattern is not anchored at zero.
  for (Tensor* t : {&params.fc1_b, &params.fc2_b}) {
    for (double& x : t->mutable_data()) x = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  }
  std::vector<Instance> people;
  for (std::size_t i = 0; i < 2 * npairs; ++i) people.push_back(random_instance("p" + std::to_string(i), dim, rng));
  std::vector<LabeledPair> pairs;
  for (std::size_t i = 0; i < npairs; ++i) {
    pairs.push_back({&people[2 * i], &people[2 * i + 1], pick(rng, 0, 1) == 0 ? -1 : 1});
  }
  VerificationConfig vcfg{std::uniform_real_distribution<double>(0.0, 0.9)(rng)};
  std::vector<Tensor> in = params.tensors();
  auto loss = [&] { return attention_loss(params, pairs, vcfg); };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

FiniteDifferenceResult check_gcn(Rng& rng, const GradcheckOptions& o) {
  const GcnConfig cfg = random_gcn_config(rng);
  const std::size_t dim = pick(rng, 1, 3);
  GcnParams params = GcnParams::glorot(cfg, 2 * dim, rng);
  std::vector<Tensor> in = params.tensors();
  // Alternate between a two-sample batch (parameters only) and a single
  // graph whose node features are on the tape too.
  const bool with_x = pick(rng, 0, 1) == 1;
  std::vector<ContextGraph> graphs;
  for (std::size_t i = 0; i < (with_x ? 1u : 2u); ++i) graphs.push_back(random_graph(cfg.nodes(), 2 * dim, cfg.norm, rng));
  if (with_x) {
    graphs[0].x = Tensor(graphs[0].x.shape(), {graphs[0].x.data().begin(), graphs[0].x.data().end()}, true);
    in.push_back(graphs[0].x);
  }
  std::vector<int> labels;
  for (std::size_t i = 0; i < graphs.size(); ++i) labels.push_back(static_cast<int>(pick(rng, 0, 1)));
  std::vector<const ContextGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  auto loss = [&] { return cross_entropy_rows(gcn_logits(params, batch), labels); };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

FiniteDifferenceResult check_siamese(Rng& rng, const GradcheckOptions& o) {
  const GcnConfig cfg = random_gcn_config(rng);
  const std::size_t dim = pick(rng, 1, 4);
  SiameseParams params = SiameseParams::glorot(cfg, dim, rng);
  std::vector<Tensor> in = params.tensors();
  std::vector<SiameseGraphs> pairs;
  for (int i = 0; i < 2; ++i) {
    pairs.push_back({random_graph(cfg.nodes(), dim, cfg.norm, rng), random_graph(cfg.nodes(), dim, cfg.norm, rng)});
  }
  std::vector<int> labels = {static_cast<int>(pick(rng, 0, 1)), static_cast<int>(pick(rng, 0, 1))};
  std::vector<const SiameseGraphs*> batch = {&pairs[0], &pairs[1]};
  auto loss = [&] { return cross_entropy_rows(siamese_logits(params, batch), labels); };
  return finite_difference_check(loss, in, rng, o.max_coords, o.step);
}

struct SuiteEntry {
  const char* name;
  Suite run;
};

constexpr SuiteEntry kSuites[] = {
    {"matmul", check_matmul},   {"elementwise", check_elementwise}, {"softmax", check_softmax},
    {"cross_entropy", check_cross_entropy}, {"attention", check_attention}, {"gcn", check_gcn},
    {"siamese", check_siamese},
};

}  // namespace

std::vector<std::string> gradcheck_component_names() {
  std::vector<std::string> out;
  for (const auto& s : kSuites) out.emplace_back(s.name);
  return out;
}

GradcheckComponent run_gradcheck_component(const std::string& name, const GradcheckOptions& options) {
  if (options.configs == 0) throw ConfigError("gradcheck needs at least one configuration");
  if (!(options.step > 0.0)) throw ConfigError("finite-difference step must be positive");
  for (const auto& suite : kSuites) {
    if (name != suite.name) continue;
    const auto start = std::chrono::steady_clock::now();
    GradcheckComponent c;
    c.name = name;
    for (std::size_t i = 0; i < options.configs; ++i) {
      Rng rng(derive_seed(options.seed, "gradcheck/" + name + "/" + std::to_string(i)));
      const FiniteDifferenceResult r = suite.run(rng, options);
      c.coordinates += r.coordinates;
      c.skipped_kinks += r.skipped_kinks;
      c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
      ++c.configs;
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return c;
  }
  throw ConfigError("unknown gradcheck component '" + name + "'");
}

std::vector<GradcheckComponent> run_gradcheck(const GradcheckOptions& options) {
  std::vector<GradcheckComponent> out;
  for (const auto& name : gradcheck_component_names()) out.push_back(run_gradcheck_component(name, options));
  return out;
}

}  // namespace ctxrr
