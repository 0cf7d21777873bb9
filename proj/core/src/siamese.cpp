#include "ctxrr/siamese.hpp"

#include <string>

#include "ctxrr/errors.hpp"
#include "ctxrr/ops.hpp"
#include "gcn_common.hpp"
#include "training.hpp"

namespace ctxrr {

namespace {

ContextGraph side_graph(const Instance& target, const std::vector<const Instance*>& contexts, const GcnConfig& cfg) {
  const std::size_t nodes = cfg.nodes();
  const std::size_t width = node_features(target, cfg.features).size();
  std::vector<double> x;
  x.reserve(nodes * width);
  auto append = [&](const Instance& inst) {
    auto f = node_features(inst, cfg.features);
    if (f.size() != width) throw DataError("siamese graph: node feature dimension mismatch");
    x.insert(x.end(), f.begin(), f.end());
  };
  append(target);
  for (const Instance* c : contexts) append(*c);
  Tensor adjacency = star_adjacency(nodes);
  Tensor a_hat = normalize_adjacency(adjacency, cfg.norm);
  return {nodes, width, Tensor::matrix(nodes, width, std::move(x)), adjacency, a_hat};
}

}  // namespace

SiameseGraphs build_siamese_graphs(const ExpandedPair& ep, const GcnConfig& cfg) {
  cfg.validate();
  if (ep.degenerate) throw DataError("cannot build siamese graphs for a pair without contexts");
  if (ep.contexts.size() != cfg.k) {
    throw DataError("expanded pair has " + std::to_string(ep.contexts.size()) + " contexts, graph expects K=" +
                    std::to_string(cfg.k));
  }
  std::vector<const Instance*> probe_side, gallery_side;
  for (const ContextPair& c : ep.contexts) {
    probe_side.push_back(c.probe_ctx);
    gallery_side.push_back(c.gallery_ctx);
  }
  return {side_graph(*ep.probe, probe_side, cfg), side_graph(*ep.gallery, gallery_side, cfg)};
}

SiameseParams SiameseParams::glorot(const GcnConfig& cfg, std::size_t feature_dim, Rng& rng) {
  cfg.validate();
  if (feature_dim == 0) throw ConfigError("feature dimension must be positive");
  SiameseParams p;
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
  p.cls_w = Tensor::zeros({2, 2 * cfg.readout_width}, true);
  glorot_uniform(p.cls_w, 2 * cfg.readout_width, 2, rng);
  p.cls_b = Tensor::zeros({2}, true);
  return p;
}

std::vector<Tensor> SiameseParams::tensors() const {
  std::vector<Tensor> out(layers.begin(), layers.end());
  out.insert(out.end(), {readout_w, readout_b, cls_w, cls_b});
  return out;
}

namespace {

GcnParams as_shell(const SiameseParams& p) {
  GcnParams shell;
  shell.config = p.config;
  shell.feature_dim = p.feature_dim;
  shell.layers = p.layers;
  shell.readout_w = p.readout_w;
  shell.readout_b = p.readout_b;
  shell.cls_w = p.cls_w;
  shell.cls_b = p.cls_b;
  return shell;
}

}  // namespace

Checkpoint SiameseParams::to_checkpoint() const { return detail::write_gcn_checkpoint(as_shell(*this), "siamese-gcn"); }

SiameseParams SiameseParams::from_checkpoint(const Checkpoint& ckpt) {
  GcnParams shell = detail::read_gcn_checkpoint(ckpt, "siamese-gcn", 2);
  return {shell.config, shell.feature_dim, shell.layers, shell.readout_w, shell.readout_b, shell.cls_w, shell.cls_b};
}

Tensor siamese_branch(const SiameseParams& params, std::span<const ContextGraph* const> graphs) {
  if (graphs.empty()) throw UsageError("siamese_branch: empty batch");
  const std::size_t nodes = params.config.nodes(), f = params.feature_dim, b = graphs.size();
  std::vector<double> stacked;
  stacked.reserve(b * nodes * f);
  for (const ContextGraph* g : graphs) {
    if (g->nodes != nodes) throw ConfigError("siamese graph node count does not match the readout");
    if (g->feature_dim != f) throw DimensionError("siamese graph feature width does not match the GCN");
    stacked.insert(stacked.end(), g->x.data().begin(), g->x.data().end());
  }
  Tensor z = detail::propagate_layers(params.config, params.layers, graphs.front()->a_hat,
                                      Tensor::matrix(b * nodes, f, std::move(stacked)));
  return relu(linear(reshape(z, {b, nodes * f}), params.readout_w, params.readout_b));
}

Tensor siamese_logits(const SiameseParams& params, std::span<const SiameseGraphs* const> pairs) {
  std::vector<const ContextGraph*> left, right;
  for (const SiameseGraphs* p : pairs) {
    left.push_back(&p->probe_side);
    right.push_back(&p->gallery_side);
  }
  // A linear classifier over [h_p | h_g] would be additive in the two
  // branches and could not tell whether they match, so the branches meet
  // through their product and squared difference.
  const Tensor hp = siamese_branch(params, left);
  const Tensor hg = siamese_branch(params, right);
  const Tensor diff = sub(hp, hg);
  return linear(concat_cols(mul(hp, hg), mul(diff, diff)), params.cls_w, params.cls_b);
}

std::vector<double> siamese_scores(const SiameseParams& params, std::span<const SiameseGraphs* const> pairs) {
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(pairs.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, pairs.size() - start);
    Tensor probs = softmax_rows(siamese_logits(params, pairs.subspan(start, len)));
    for (std::size_t i = 0; i < len; ++i) out.push_back(probs.at(i, 1));
  }
  return out;
}

std::vector<SiameseSample> make_siamese_samples(std::span<const LabeledExpansion> expansions, const GcnConfig& cfg) {
  std::vector<SiameseSample> out;
  out.reserve(expansions.size());
  for (const auto& e : expansions) out.push_back({build_siamese_graphs(e.pair, cfg), e.label});
  return out;
}

SiameseTrainResult train_siamese(std::span<const SiameseSample> samples, const SgdConfig& sgd, const GcnConfig& cfg,
                                 const GraphAugmentation& augment) {
  cfg.validate();
  augment.validate();
  if (samples.empty()) throw DataError("siamese training set is empty");
  bool pos = false, neg = false;
  for (const auto& s : samples) {
    if (s.graphs.probe_side.nodes != cfg.nodes() || s.graphs.gallery_side.nodes != cfg.nodes()) {
      throw DataError("siamese samples do not share the configured context size K");
    }
    if (s.graphs.probe_side.feature_dim != samples.front().graphs.probe_side.feature_dim) {
      throw DataError("siamese samples do not share one feature width");
    }
    if (s.label != 0 && s.label != 1) throw DataError("graph labels must be 0 or 1");
    pos = pos || s.label == 1;
    neg = neg || s.label == 0;
  }
  if (!pos || !neg) throw DataError("siamese training needs both same- and different-identity samples");

  Rng init_rng(derive_seed(sgd.seed, "siamese/init"));
  SiameseTrainResult result{SiameseParams::glorot(cfg, samples.front().graphs.probe_side.feature_dim, init_rng), {},
                            0.0};
  Rng augment_rng(derive_seed(sgd.seed, "siamese/augment"));
  const std::size_t width = samples.front().graphs.probe_side.feature_dim;
  std::vector<SiameseSample> views;
  auto sample = [&](std::size_t i) -> const SiameseSample& { return views.empty() ? samples[i] : views[i]; };
  auto prepare = [&](int) {
    if (augment.views == 1 && !augment.signed_permutation) return samples.size();
    views.clear();
    views.reserve(samples.size() * augment.views);
    for (std::size_t v = 0; v < augment.views; ++v) {
      for (const SiameseSample& s : samples) {
        SiameseSample copy = s;
        if (augment.signed_permutation) {
          // One transform for both sides keeps the pair comparable.
          const FeatureTransform t = random_feature_transform(width, augment_rng);
          copy.graphs.probe_side.x = transform_features(s.graphs.probe_side.x, t);
          copy.graphs.gallery_side.x = transform_features(s.graphs.gallery_side.x, t);
        }
        views.push_back(std::move(copy));
      }
    }
    return views.size();
  };
  result.epoch_loss = training::run(
      sgd, result.params.tensors(), "siamese", prepare, [&](std::span<const std::size_t> idx) {
        std::vector<const SiameseGraphs*> batch;
        std::vector<int> labels;
        for (std::size_t i : idx) {
          batch.push_back(&sample(i).graphs);
          labels.push_back(sample(i).label);
        }
        return cross_entropy_rows(siamese_logits(result.params, batch), labels);
      });
  result.train_accuracy = siamese_accuracy(result.params, samples);
  return result;
}

double siamese_accuracy(const SiameseParams& params, std::span<const SiameseSample> samples) {
  if (samples.empty()) return 0.0;
  std::vector<const SiameseGraphs*> pairs;
  for (const auto& s : samples) pairs.push_back(&s.graphs);
  const auto scores = siamese_scores(params, pairs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if ((scores[i] > 0.5 ? 1 : 0) == samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace ctxrr
