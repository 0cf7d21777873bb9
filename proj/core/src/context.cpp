#include "ctxrr/context.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "ctxrr/errors.hpp"
#include "ctxrr/random.hpp"

namespace ctxrr {

std::vector<CandidatePair> enumerate_candidates(const Scene& probe_scene, const Instance& probe,
                                                const Scene& gallery_scene, const Instance& gallery) {
  if (!probe_scene.contains(probe)) {
    throw UsageError("probe '" + probe.instance_id + "' is not part of scene '" + probe_scene.scene_id + "'");
  }
  if (!gallery_scene.contains(gallery)) {
    throw UsageError("gallery '" + gallery.instance_id + "' is not part of scene '" + gallery_scene.scene_id + "'");
  }
  std::vector<CandidatePair> out;
  for (const Instance& p : probe_scene.instances) {
    if (&p == &probe) continue;
    for (const Instance& g : gallery_scene.instances) {
      if (&g == &gallery) continue;
      out.emplace_back(&p, &g);
    }
  }
  return out;
}

bool context_before(const ContextPair& x, const ContextPair& y) {
  if (x.score != y.score) return x.score > y.score;
  if (x.probe_ctx->instance_id != y.probe_ctx->instance_id) return x.probe_ctx->instance_id < y.probe_ctx->instance_id;
  return x.gallery_ctx->instance_id < y.gallery_ctx->instance_id;
}

std::vector<ContextPair> select_top_k(const std::vector<CandidatePair>& candidates, const std::vector<double>& scores,
                                      std::size_t k) {
  if (scores.size() != candidates.size()) throw UsageError("select_top_k: one score per candidate required");
  std::vector<ContextPair> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked.push_back({candidates[i].first, candidates[i].second, scores[i]});
  }
  // Walking the fully ranked list and skipping used members is exactly the
  // repeated "best compatible candidate" rule.
  std::sort(ranked.begin(), ranked.end(), context_before);
  std::set<const Instance*> used_probe, used_gallery;
  std::vector<ContextPair> out;
  for (const ContextPair& c : ranked) {
    if (out.size() == k) break;
    if (used_probe.count(c.probe_ctx) || used_gallery.count(c.gallery_ctx)) continue;
    used_probe.insert(c.probe_ctx);
    used_gallery.insert(c.gallery_ctx);
    out.push_back(c);
  }
  return out;
}

std::vector<ContextPair> select_top_k(const std::vector<CandidatePair>& candidates, const PairScorer& scorer,
                                      std::size_t k) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& [p, g] : candidates) scores.push_back(scorer(*p, *g));
  return select_top_k(candidates, scores, k);
}

ExpandedPair finish_expansion(const Instance& probe, const Instance& gallery, std::vector<ContextPair> selected,
                              std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("context size K must be >= 1");
  ExpandedPair ep{&probe, &gallery, std::move(selected), k, false};
  if (ep.contexts.empty()) {
    ep.degenerate = true;
    return ep;
  }
  if (ep.contexts.size() < k) {
    Rng rng(derive_seed(seed, probe.instance_id + "|" + gallery.instance_id));
    const std::size_t found = ep.contexts.size();
    std::uniform_int_distribution<std::size_t> pick(0, found - 1);
    while (ep.contexts.size() < k) ep.contexts.push_back(ep.contexts[pick(rng)]);
    std::stable_sort(ep.contexts.begin(), ep.contexts.end(), context_before);
  }
  return ep;
}

ExpandedPair expand(const Scene& probe_scene, const Instance& probe, const Scene& gallery_scene,
                    const Instance& gallery, const PairScorer& scorer, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("context size K must be >= 1");
  const auto candidates = enumerate_candidates(probe_scene, probe, gallery_scene, gallery);
  return finish_expansion(probe, gallery, select_top_k(candidates, scorer, k), k, seed);
}

}  // namespace ctxrr
