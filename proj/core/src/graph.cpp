#include "ctxrr/graph.hpp"

#include <cmath>
#include <algorithm>
#include <map>
#include <numeric>

#include "ctxrr/errors.hpp"
#include "ctxrr/ops.hpp"
#include "gcn_common.hpp"
#include "training.hpp"

namespace ctxrr {

std::string to_string(AdjacencyNorm norm) { return norm == AdjacencyNorm::symmetric ? "sym" : "row"; }
std::string to_string(NodeFeatures features) { return features == NodeFeatures::whole ? "whole" : "allparts"; }

AdjacencyNorm parse_adjacency_norm(std::string_view s) {
  if (s == "sym") return AdjacencyNorm::symmetric;
  if (s == "row") return AdjacencyNorm::row;
  throw ConfigError("unknown adjacency normalization '" + std::string(s) + "' (expected sym or row)");
}

NodeFeatures parse_node_features(std::string_view s) {
  if (s == "whole") return NodeFeatures::whole;
  if (s == "allparts") return NodeFeatures::all_parts;
  throw ConfigError("unknown node feature mode '" + std::string(s) + "' (expected whole or allparts)");
}

void GcnConfig::validate() const {
  if (k == 0) throw ConfigError("context size K must be >= 1");
  if (layers == 0) throw ConfigError("GCN needs at least one layer");
  if (readout_width == 0) throw ConfigError("readout width must be positive");
}

Tensor star_adjacency(std::size_t nodes) {
  if (nodes == 0) throw ConfigError("graph needs at least one node");
  std::vector<double> a(nodes * nodes, 0.0);
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = 0; j < nodes; ++j) {
      if (i == 0 || j == 0 || i == j) a[i * nodes + j] = 1.0;
    }
  }
  return Tensor::matrix(nodes, nodes, std::move(a));
}

Tensor normalize_adjacency(const Tensor& adjacency, AdjacencyNorm norm) {
  const std::size_t n = adjacency.rows();
  if (adjacency.rank() != 2 || adjacency.cols() != n) throw DimensionError("adjacency must be square");
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += adjacency.at(i, j);
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency.at(i, j);
      out[i * n + j] = norm == AdjacencyNorm::symmetric ? a / std::sqrt(degree[i] * degree[j]) : a / degree[i];
    }
  }
  return Tensor::matrix(n, n, std::move(out));
}

std::vector<double> node_features(const Instance& inst, NodeFeatures features) {
  if (features == NodeFeatures::whole) {
    const auto w = inst.embedding.part(Part::whole);
    return {w.begin(), w.end()};
  }
  std::vector<double> out;
  out.reserve(kNumParts * inst.embedding.dim());
  for (std::size_t r = 0; r < kNumParts; ++r) {
    const auto p = inst.embedding.part(r);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

ContextGraph build_graph(const ExpandedPair& ep, const GcnConfig& cfg) {
  cfg.validate();
  if (ep.degenerate) throw DataError("cannot build a context graph for a pair without contexts");
  if (ep.contexts.size() != cfg.k) {
    throw DataError("expanded pair has " + std::to_string(ep.contexts.size()) + " contexts, graph expects K=" +
                    std::to_string(cfg.k));
  }
  const std::size_t nodes = cfg.nodes();
  const std::size_t width = node_features(*ep.probe, cfg.features).size();
  const std::size_t feature_dim = 2 * width;
  std::vector<double> x;
  x.reserve(nodes * feature_dim);
  auto append = [&](const Instance& a, const Instance& b) {
    auto fa = node_features(a, cfg.features);
    auto fb = node_features(b, cfg.features);
    if (fa.size() != width || fb.size() != width) throw DataError("context graph: node feature dimension mismatch");
    x.insert(x.end(), fa.begin(), fa.end());
    x.insert(x.end(), fb.begin(), fb.end());
  };
  append(*ep.probe, *ep.gallery);
  for (const ContextPair& c : ep.contexts) append(*c.probe_ctx, *c.gallery_ctx);
  Tensor adjacency = star_adjacency(nodes);
  Tensor a_hat = normalize_adjacency(adjacency, cfg.norm);
  return {nodes, feature_dim, Tensor::matrix(nodes, feature_dim, std::move(x)), adjacency, a_hat};
}

GcnParams GcnParams::glorot(const GcnConfig& cfg, std::size_t feature_dim, Rng& rng) {
  cfg.validate();
  if (feature_dim == 0) throw ConfigError("feature dimension must be positive");
  GcnParams p;
  p.config = cfg;
  p.feature_dim = feature_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor w = Tensor::zeros({feature_dim, feature_dim}, true);
    glorot_uniform(w, feature_dim, feature_dim, rng);
    p.layers.push_back(w);
  }
  const std::size_t flat = cfg.nodes() * feature_dim;
  p.readout_w = Tensor::zeros({cfg.readout_width, flat}, true);
  glorot_uniform(p.readout_w, flat, cfg.readout_width, rng);
  p.readout_b = Tensor::zeros({cfg.readout_width}, true);
  p.cls_w = Tensor::zeros({2, cfg.readout_width}, true);
  glorot_uniform(p.cls_w, cfg.readout_width, 2, rng);
  p.cls_b = Tensor::zeros({2}, true);
  return p;
}

std::vector<Tensor> GcnParams::tensors() const {
  std::vector<Tensor> out(layers.begin(), layers.end());
  out.insert(out.end(), {readout_w, readout_b, cls_w, cls_b});
  return out;
}

Checkpoint GcnParams::to_checkpoint() const { return detail::write_gcn_checkpoint(*this, "context-gcn"); }

GcnParams GcnParams::from_checkpoint(const Checkpoint& ckpt) {
  return detail::read_gcn_checkpoint(ckpt, "context-gcn", 1);
}

namespace detail {

Checkpoint write_gcn_checkpoint(const GcnParams& params, std::string_view model) {
  const GcnConfig& config = params.config;
  Checkpoint ckpt;
  ckpt.meta["model"] = std::string(model);
  ckpt.meta["k"] = std::to_string(config.k);
  ckpt.meta["layers"] = std::to_string(config.layers);
  ckpt.meta["norm"] = to_string(config.norm);
  ckpt.meta["node_features"] = to_string(config.features);
  ckpt.meta["readout_width"] = std::to_string(config.readout_width);
  ckpt.meta["activation"] = config.relu ? "relu" : "linear";
  ckpt.meta["feature_dim"] = std::to_string(params.feature_dim);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    ckpt.add("gcn." + std::to_string(l) + ".weight", params.layers[l]);
  }
  ckpt.add("readout.weight", params.readout_w);
  ckpt.add("readout.bias", params.readout_b);
  ckpt.add("classifier.weight", params.cls_w);
  ckpt.add("classifier.bias", params.cls_b);
  return ckpt;
}

namespace {

std::size_t parse_size(const Checkpoint& ckpt, const std::string& key) {
  const std::string& v = ckpt.meta_value(key);
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw DataError("checkpoint metadata '" + key + "' is not a number: " + v);
  }
}

}  // namespace

GcnParams read_gcn_checkpoint(const Checkpoint& ckpt, std::string_view model, std::size_t branches) {
  if (ckpt.meta_value("model") != model) {
    throw DataError("checkpoint holds a '" + ckpt.meta_value("model") + "' model, expected " + std::string(model));
  }
  GcnParams p;
  p.config.k = parse_size(ckpt, "k");
  p.config.layers = parse_size(ckpt, "layers");
  p.config.norm = parse_adjacency_norm(ckpt.meta_value("norm"));
  p.config.features = parse_node_features(ckpt.meta_value("node_features"));
  p.config.readout_width = parse_size(ckpt, "readout_width");
  p.config.relu = ckpt.meta_value("activation") == "relu";
  p.feature_dim = parse_size(ckpt, "feature_dim");
  p.config.validate();
  for (std::size_t l = 0; l < p.config.layers; ++l) p.layers.push_back(ckpt.get("gcn." + std::to_string(l) + ".weight"));
  p.readout_w = ckpt.get("readout.weight");
  p.readout_b = ckpt.get("readout.bias");
  p.cls_w = ckpt.get("classifier.weight");
  p.cls_b = ckpt.get("classifier.bias");
  const std::size_t f = p.feature_dim;
  bool ok = p.readout_w.rank() == 2 && p.readout_w.rows() == p.config.readout_width &&
            p.readout_w.cols() == p.config.nodes() * f && p.readout_b.size() == p.config.readout_width &&
            p.cls_w.rank() == 2 && p.cls_w.rows() == 2 && p.cls_w.cols() == branches * p.config.readout_width &&
            p.cls_b.size() == 2;
  for (const Tensor& w : p.layers) ok = ok && w.rank() == 2 && w.rows() == f && w.cols() == f;
  if (!ok) throw DataError("graph checkpoint tensors have inconsistent shapes");
  return p;
}

Tensor propagate_layers(const GcnConfig& cfg, const std::vector<Tensor>& layers, const Tensor& a_hat, Tensor z) {
  for (const Tensor& w : layers) {
    z = matmul(graph_propagate(a_hat, z, cfg.nodes()), w);
    if (cfg.relu) z = relu(z);
  }
  return z;
}

}  // namespace detail

namespace {

void check_graph(const GcnParams& params, const ContextGraph& g) {
  if (g.nodes != params.config.nodes()) {
    throw ConfigError("graph has " + std::to_string(g.nodes) + " nodes, readout expects " +
                      std::to_string(params.config.nodes()));
  }
  if (g.feature_dim != params.feature_dim) {
    throw DimensionError("graph node features have width " + std::to_string(g.feature_dim) + ", GCN expects " +
                         std::to_string(params.feature_dim));
  }
}

}  // namespace

Tensor gcn_propagate(const GcnParams& params, const ContextGraph& g) {
  check_graph(params, g);
  return detail::propagate_layers(params.config, params.layers, g.a_hat, g.x);
}

Tensor gcn_logits(const GcnParams& params, std::span<const ContextGraph* const> graphs) {
  if (graphs.empty()) throw UsageError("gcn_logits: empty batch");
  const std::size_t nodes = params.config.nodes(), f = params.feature_dim, b = graphs.size();
  for (const ContextGraph* g : graphs) check_graph(params, *g);
  Tensor x = graphs.front()->x;
  if (b > 1) {
    // Stacking copies values, so node-feature gradients are only tracked for
    // single-graph batches.
    std::vector<double> stacked;
    stacked.reserve(b * nodes * f);
    for (const ContextGraph* g : graphs) stacked.insert(stacked.end(), g->x.data().begin(), g->x.data().end());
    x = Tensor::matrix(b * nodes, f, std::move(stacked));
  }
  Tensor z = detail::propagate_layers(params.config, params.layers, graphs.front()->a_hat, x);
  Tensor flat = reshape(z, {b, nodes * f});
  Tensor hidden = relu(linear(flat, params.readout_w, params.readout_b));
  return linear(hidden, params.cls_w, params.cls_b);
}

GcnOutput gcn_forward(const GcnParams& params, const ContextGraph& g) {
  const ContextGraph* one[1] = {&g};
  Tensor logits = reshape(gcn_logits(params, one), {2});
  const double score = softmax(logits.detach()).at(1);
  return {logits, score};
}

std::vector<double> gcn_scores(const GcnParams& params, std::span<const ContextGraph* const> graphs) {
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(graphs.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < graphs.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, graphs.size() - start);
    Tensor probs = softmax_rows(gcn_logits(params, graphs.subspan(start, len)));
    for (std::size_t i = 0; i < len; ++i) out.push_back(probs.at(i, 1));
  }
  return out;
}

std::vector<LabeledExpansion> make_training_expansions(const Dataset& ds, std::string_view split,
                                                       const PairScorer& scorer, std::size_t k,
                                                       double negative_ratio, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "graph/pairs"));
  std::map<int, std::vector<const Instance*>> by_identity;
  std::vector<const Instance*> eligible;
  for (const Scene* scene : ds.scenes_in_split(split)) {
    if (scene->instances.size() < 2) continue;
    for (const Instance& inst : scene->instances) {
      if (!inst.identity) continue;
      by_identity[*inst.identity].push_back(&inst);
      eligible.push_back(&inst);
    }
  }
  std::vector<std::pair<const Instance*, const Instance*>> targets;
  std::vector<int> labels;
  std::bernoulli_distribution flip(0.5);
  for (const auto& [id, group] : by_identity) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        if (group[i]->scene_id == group[j]->scene_id) continue;
        if (flip(rng)) {
          targets.emplace_back(group[j], group[i]);
        } else {
          targets.emplace_back(group[i], group[j]);
        }
        labels.push_back(1);
      }
    }
  }
  const auto wanted = static_cast<std::size_t>(std::llround(negative_ratio * static_cast<double>(targets.size())));
  if (eligible.size() >= 2) {
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    std::size_t drawn = 0;
    for (std::size_t attempts = 0; drawn < wanted && attempts < wanted * 100; ++attempts) {
      const Instance* a = eligible[pick(rng)];
      const Instance* b = eligible[pick(rng)];
      if (*a->identity == *b->identity || a->scene_id == b->scene_id) continue;
      targets.emplace_back(a, b);
      labels.push_back(0);
      ++drawn;
    }
  }
  std::vector<LabeledExpansion> out;
  out.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Instance& p = *targets[i].first;
    const Instance& g = *targets[i].second;
    ExpandedPair ep = expand(ds.scene_of(p), p, ds.scene_of(g), g, scorer, k, seed);
    if (ep.degenerate) continue;
    out.push_back({std::move(ep), labels[i]});
  }
  return out;
}

std::vector<GraphSample> make_graph_samples(std::span<const LabeledExpansion> expansions, const GcnConfig& cfg) {
  std::vector<GraphSample> out;
  out.reserve(expansions.size());
  for (const auto& e : expansions) out.push_back({build_graph(e.pair, cfg), e.label});
  return out;
}

FeatureTransform random_feature_transform(std::size_t width, Rng& rng) {
  FeatureTransform t{std::vector<std::size_t>(width), std::vector<double>(width)};
  std::iota(t.perm.begin(), t.perm.end(), std::size_t{0});
  std::shuffle(t.perm.begin(), t.perm.end(), rng);
  std::bernoulli_distribution flip(0.5);
  for (double& s : t.sign) s = flip(rng) ? -1.0 : 1.0;
  return t;
}

Tensor transform_features(const Tensor& x, const FeatureTransform& t) {
  const std::size_t block = t.perm.size();
  if (x.rank() != 2 || block == 0 || x.cols() % block != 0 || t.sign.size() != block) {
    throw DimensionError("feature transform of width " + std::to_string(block) + " does not tile " +
                         shape_string(x.shape()));
  }
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t start = 0; start < in.size(); start += block) {
    for (std::size_t i = 0; i < block; ++i) out[start + i] = t.sign[i] * in[start + t.perm[i]];
  }
  return Tensor::matrix(x.rows(), x.cols(), std::move(out));
}

void GraphAugmentation::validate() const {
  if (views == 0) throw ConfigError("augmentation needs at least one view per sample");
}

GcnTrainResult train_gcn(std::span<const GraphSample> samples, const SgdConfig& sgd, const GcnConfig& cfg,
                         const GraphAugmentation& augment) {
  cfg.validate();
  augment.validate();
  if (samples.empty()) throw DataError("graph training set is empty");
  bool pos = false, neg = false;
  for (const auto& s : samples) {
    if (s.graph.nodes != samples.front().graph.nodes) throw DataError("graph samples do not share one context size K");
    if (s.graph.feature_dim != samples.front().graph.feature_dim) {
      throw DataError("graph samples do not share one feature width");
    }
    if (s.label != 0 && s.label != 1) throw DataError("graph labels must be 0 or 1");
    pos = pos || s.label == 1;
    neg = neg || s.label == 0;
  }
  if (!pos || !neg) throw DataError("graph training needs both same- and different-identity samples");
  if (samples.front().graph.nodes != cfg.nodes()) {
    throw DataError("samples were built for K=" + std::to_string(samples.front().graph.nodes - 1) +
                    " but the config says K=" + std::to_string(cfg.k));
  }

  Rng init_rng(derive_seed(sgd.seed, "graph/init"));
  GcnTrainResult result{GcnParams::glorot(cfg, samples.front().graph.feature_dim, init_rng), {}, 0.0};
  Rng augment_rng(derive_seed(sgd.seed, "graph/augment"));
  const std::size_t half = samples.front().graph.feature_dim / 2;
  std::vector<GraphSample> views;
  auto sample = [&](std::size_t i) -> const GraphSample& { return views.empty() ? samples[i] : views[i]; };
  auto prepare = [&](int) {
    if (augment.views == 1 && !augment.signed_permutation) return samples.size();
    views.clear();
    views.reserve(samples.size() * augment.views);
    for (std::size_t v = 0; v < augment.views; ++v) {
      for (const GraphSample& s : samples) {
        GraphSample copy = s;
        if (augment.signed_permutation) {
          copy.graph.x = transform_features(s.graph.x, random_feature_transform(half, augment_rng));
        }
        views.push_back(std::move(copy));
      }
    }
    return views.size();
  };
  result.epoch_loss = training::run(
      sgd, result.params.tensors(), "graph", prepare, [&](std::span<const std::size_t> idx) {
        std::vector<const ContextGraph*> batch;
        std::vector<int> labels;
        for (std::size_t i : idx) {
          batch.push_back(&sample(i).graph);
          labels.push_back(sample(i).label);
        }
        return cross_entropy_rows(gcn_logits(result.params, batch), labels);
      });
  result.train_accuracy = gcn_accuracy(result.params, samples);
  return result;
}

double gcn_accuracy(const GcnParams& params, std::span<const GraphSample> samples) {
  if (samples.empty()) return 0.0;
  std::vector<const ContextGraph*> graphs;
  for (const auto& s : samples) graphs.push_back(&s.graph);
  const auto scores = gcn_scores(params, graphs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if ((scores[i] > 0.5 ? 1 : 0) == samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace ctxrr
