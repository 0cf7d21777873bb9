#include "ctxrr/scoring.hpp"

#include "ctxrr/errors.hpp"
#include "ctxrr/random.hpp"

namespace ctxrr {

std::vector<std::vector<double>> PairwiseScorer::score(const Instance& query, const Scene&,
                                                       std::span<const Scene* const> gallery) const {
  std::vector<std::vector<double>> out;
  out.reserve(gallery.size());
  for (const Scene* scene : gallery) {
    std::vector<double> row;
    row.reserve(scene->instances.size());
    for (const Instance& inst : scene->instances) row.push_back(pair(query, inst));
    out.push_back(std::move(row));
  }
  return out;
}

double UniformScorer::pair(const Instance& query, const Instance& candidate) const {
  return fused_similarity(query.embedding, candidate.embedding, uniform_weights());
}

AttentionScorer::AttentionScorer(const AttentionParams& params, const Dataset& ds) : projector_(params) {
  projector_.cache(ds);
}

double AttentionScorer::pair(const Instance& query, const Instance& candidate) const {
  return projector_.similarity(query, candidate);
}

double IdentityOracleScorer::pair(const Instance& query, const Instance& candidate) const {
  return query.identity && candidate.identity && *query.identity == *candidate.identity ? 1.0 : 0.0;
}

double RandomScorer::pair(const Instance& query, const Instance& candidate) const {
  Rng rng(derive_seed(seed_, query.instance_id + "|" + candidate.instance_id));
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

ContextExpander::ContextExpander(const Dataset& ds, std::optional<AttentionParams> attention, std::size_t k,
                                 std::uint64_t seed)
    : k_(k), seed_(seed) {
  if (k == 0) throw ConfigError("context size K must be >= 1");
  if (attention) {
    if (attention->dim() != ds.dim) {
      throw DimensionError("attention head expects d=" + std::to_string(attention->dim()) + ", dataset has d=" +
                           std::to_string(ds.dim));
    }
    projector_.emplace(*attention);
    projector_->cache(ds);
  }
}

double ContextExpander::similarity(const Instance& a, const Instance& b) const {
  if (projector_) return projector_->similarity(a, b);
  return fused_similarity(a.embedding, b.embedding, uniform_weights());
}

PairScorer ContextExpander::pair_scorer() const {
  return [this](const Instance& a, const Instance& b) { return similarity(a, b); };
}

std::vector<ExpandedPair> ContextExpander::expand_scene(const Instance& query, const Scene& query_scene,
                                                        const Scene& gallery_scene) const {
  if (!query_scene.contains(query)) {
    throw UsageError("probe '" + query.instance_id + "' is not part of scene '" + query_scene.scene_id + "'");
  }
  // Similarity of every (probe-scene context, gallery-scene instance) pair,
  // computed once and reused for each gallery target.
  std::vector<const Instance*> probe_ctx;
  for (const Instance& p : query_scene.instances) {
    if (&p != &query) probe_ctx.push_back(&p);
  }
  const std::size_t ng = gallery_scene.instances.size();
  std::vector<double> sim(probe_ctx.size() * ng);
  for (std::size_t i = 0; i < probe_ctx.size(); ++i) {
    for (std::size_t j = 0; j < ng; ++j) sim[i * ng + j] = similarity(*probe_ctx[i], gallery_scene.instances[j]);
  }
  std::vector<ExpandedPair> out;
  out.reserve(ng);
  for (std::size_t t = 0; t < ng; ++t) {
    std::vector<CandidatePair> candidates;
    std::vector<double> scores;
    for (std::size_t i = 0; i < probe_ctx.size(); ++i) {
      for (std::size_t j = 0; j < ng; ++j) {
        if (j == t) continue;
        candidates.emplace_back(probe_ctx[i], &gallery_scene.instances[j]);
        scores.push_back(sim[i * ng + j]);
      }
    }
    out.push_back(finish_expansion(query, gallery_scene.instances[t], select_top_k(candidates, scores, k_), k_, seed_));
  }
  return out;
}

namespace {

template <typename BuildFn, typename ScoreFn>
std::vector<std::vector<double>> score_with_graphs(const ContextExpander& expander, const Instance& query,
                                                   const Scene& query_scene, std::span<const Scene* const> gallery,
                                                   BuildFn build, ScoreFn run) {
  std::vector<std::vector<double>> out(gallery.size());
  using Graph = decltype(build(std::declval<const ExpandedPair&>()));
  std::vector<Graph> graphs;
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t s = 0; s < gallery.size(); ++s) {
    const auto expansions = expander.expand_scene(query, query_scene, *gallery[s]);
    out[s].resize(expansions.size());
    for (std::size_t j = 0; j < expansions.size(); ++j) {
      const ExpandedPair& ep = expansions[j];
      if (ep.degenerate) {
        out[s][j] = (expander.similarity(query, *ep.gallery) + 1.0) / 2.0;
      } else {
        graphs.push_back(build(ep));
        slots.emplace_back(s, j);
      }
    }
  }
  if (!graphs.empty()) {
    std::vector<const Graph*> ptrs;
    ptrs.reserve(graphs.size());
    for (const Graph& g : graphs) ptrs.push_back(&g);
    const std::vector<double> scores = run(ptrs);
    for (std::size_t i = 0; i < slots.size(); ++i) out[slots[i].first][slots[i].second] = scores[i];
  }
  return out;
}

}  // namespace

GraphScorer::GraphScorer(const Dataset& ds, std::optional<AttentionParams> attention, GcnParams gcn,
                         std::uint64_t seed)
    : expander_(ds, std::move(attention), gcn.config.k, seed), gcn_(std::move(gcn)) {
  const std::size_t width = gcn_.config.features == NodeFeatures::whole ? ds.dim : kNumParts * ds.dim;
  if (gcn_.feature_dim != 2 * width) {
    throw DimensionError("GCN expects node features of width " + std::to_string(gcn_.feature_dim) +
                         ", dataset gives " + std::to_string(2 * width));
  }
}

std::vector<std::vector<double>> GraphScorer::score(const Instance& query, const Scene& query_scene,
                                                    std::span<const Scene* const> gallery) const {
  return score_with_graphs(
      expander_, query, query_scene, gallery, [&](const ExpandedPair& ep) { return build_graph(ep, gcn_.config); },
      [&](const std::vector<const ContextGraph*>& g) { return gcn_scores(gcn_, g); });
}

SiameseScorer::SiameseScorer(const Dataset& ds, std::optional<AttentionParams> attention, SiameseParams model,
                             std::uint64_t seed)
    : expander_(ds, std::move(attention), model.config.k, seed), model_(std::move(model)) {
  const std::size_t width = model_.config.features == NodeFeatures::whole ? ds.dim : kNumParts * ds.dim;
  if (model_.feature_dim != width) {
    throw DimensionError("siamese GCN expects node features of width " + std::to_string(model_.feature_dim) +
                         ", dataset gives " + std::to_string(width));
  }
}

std::vector<std::vector<double>> SiameseScorer::score(const Instance& query, const Scene& query_scene,
                                                      std::span<const Scene* const> gallery) const {
  return score_with_graphs(
      expander_, query, query_scene, gallery,
      [&](const ExpandedPair& ep) { return build_siamese_graphs(ep, model_.config); },
      [&](const std::vector<const SiameseGraphs*>& g) { return siamese_scores(model_, g); });
}

double graph_score(const AttentionParams& attention, const GcnParams& gcn, const Instance& probe,
                   const Instance& gallery, const Dataset& ds, std::uint64_t seed) {
  auto scorer = [&](const Instance& a, const Instance& b) { return attention_similarity(attention, a, b); };
  ExpandedPair ep = expand(ds.scene_of(probe), probe, ds.scene_of(gallery), gallery, scorer, gcn.config.k, seed);
  if (ep.degenerate) return (attention_similarity(attention, probe, gallery) + 1.0) / 2.0;
  ContextGraph g = build_graph(ep, gcn.config);
  const ContextGraph* one[1] = {&g};
  return gcn_scores(gcn, one).front();
}

double siamese_graph_score(const AttentionParams& attention, const SiameseParams& model, const Instance& probe,
                           const Instance& gallery, const Dataset& ds, std::uint64_t seed) {
  auto scorer = [&](const Instance& a, const Instance& b) { return attention_similarity(attention, a, b); };
  ExpandedPair ep = expand(ds.scene_of(probe), probe, ds.scene_of(gallery), gallery, scorer, model.config.k, seed);
  if (ep.degenerate) return (attention_similarity(attention, probe, gallery) + 1.0) / 2.0;
  SiameseGraphs g = build_siamese_graphs(ep, model.config);
  const SiameseGraphs* one[1] = {&g};
  return siamese_scores(model, one).front();
}

namespace {

std::vector<LabeledExpansion> training_expansions(const Dataset& ds, const std::optional<AttentionParams>& attention,
                                                  const GraphTrainOptions& options) {
  options.gcn.validate();
  const ContextExpander expander(ds, attention, options.gcn.k, options.sgd.seed);
  return make_training_expansions(ds, options.split, expander.pair_scorer(), options.gcn.k, options.negative_ratio,
                                  options.sgd.seed);
}

}  // namespace

GcnTrainResult train_graph_model(const Dataset& ds, const std::optional<AttentionParams>& attention,
                                 const GraphTrainOptions& options) {
  const auto expansions = training_expansions(ds, attention, options);
  const auto samples = make_graph_samples(expansions, options.gcn);
  return train_gcn(samples, options.sgd, options.gcn, options.augment);
}

SiameseTrainResult train_siamese_model(const Dataset& ds, const std::optional<AttentionParams>& attention,
                                       const GraphTrainOptions& options) {
  const auto expansions = training_expansions(ds, attention, options);
  const auto samples = make_siamese_samples(expansions, options.gcn);
  return train_siamese(samples, options.sgd, options.gcn, options.augment);
}

}  // namespace ctxrr
