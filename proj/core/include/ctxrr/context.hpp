#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ctxrr/embedding.hpp"

namespace ctxrr {

struct ContextPair {
  const Instance* probe_ctx = nullptr;
  const Instance* gallery_ctx = nullptr;
  double score = 0.0;
};

struct ExpandedPair {
  const Instance* probe = nullptr;
  const Instance* gallery = nullptr;
  std::vector<ContextPair> contexts;
  std::size_t k = 0;
  // Set when neither scene offers a single context candidate; `contexts` is
  // then empty and callers fall back to the pairwise similarity.
  bool degenerate = false;
};

using CandidatePair = std::pair<const Instance*, const Instance*>;
using PairScorer = std::function<double(const Instance& probe_ctx, const Instance& gallery_ctx)>;

// Cross product of the non-target instances of both scenes, probe-major in
// scene order. Throws UsageError when a target is not in its scene.
std::vector<CandidatePair> enumerate_candidates(const Scene& probe_scene, const Instance& probe,
                                                const Scene& gallery_scene, const Instance& gallery);

// Strict ordering used everywhere a context list is ranked: score
// descending, then probe id, then gallery id.
bool context_before(const ContextPair& x, const ContextPair& y);

// Greedy one-to-one matching: repeatedly keeps the best remaining candidate
// whose probe and gallery members are both unused, until k pairs or
// exhaustion. Output is sorted with context_before.
std::vector<ContextPair> select_top_k(const std::vector<CandidatePair>& candidates, const PairScorer& scorer,
                                      std::size_t k);
// Same, with the scores already computed (scores[i] belongs to candidates[i]).
std::vector<ContextPair> select_top_k(const std::vector<CandidatePair>& candidates, const std::vector<double>& scores,
                                      std::size_t k);

// Top-k selection plus replication: when 1 <= found < k, uniformly drawn
// copies of the found pairs (seeded) fill the list to exactly k.
ExpandedPair expand(const Scene& probe_scene, const Instance& probe, const Scene& gallery_scene,
                    const Instance& gallery, const PairScorer& scorer, std::size_t k, std::uint64_t seed);

// Replication step alone, exposed for callers that select with cached scores.
ExpandedPair finish_expansion(const Instance& probe, const Instance& gallery, std::vector<ContextPair> selected,
                              std::size_t k, std::uint64_t seed);

}  // namespace ctxrr
