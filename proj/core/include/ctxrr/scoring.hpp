#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxrr/attention.hpp"
#include "ctxrr/context.hpp"
#include "ctxrr/dataset.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/siamese.hpp"

namespace ctxrr {

inline constexpr std::uint64_t kDefaultContextSeed = 42;

/// Scores every instance of a set of gallery scenes against one query.
/// Implementations are immutable after construction, so one scorer may serve
/// concurrent queries.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  // result[i][j] belongs to gallery[i]->instances[j].
  virtual std::vector<std::vector<double>> score(const Instance& query, const Scene& query_scene,
                                                 std::span<const Scene* const> gallery) const = 0;
};

// Per-pair scorers.
class PairwiseScorer : public Scorer {
 public:
  std::vector<std::vector<double>> score(const Instance& query, const Scene& query_scene,
                                         std::span<const Scene* const> gallery) const override;
  virtual double pair(const Instance& query, const Instance& candidate) const = 0;
};

class UniformScorer final : public PairwiseScorer {
 public:
  std::string name() const override { return "uniform"; }
  double pair(const Instance& query, const Instance& candidate) const override;
};

class AttentionScorer final : public PairwiseScorer {
 public:
  // Precomputes projections for every instance of `ds`.
  AttentionScorer(const AttentionParams& params, const Dataset& ds);
  std::string name() const override { return "attention"; }
  double pair(const Instance& query, const Instance& candidate) const override;

 private:
  AttentionProjector projector_;
};

// 1 for the same identity, 0 otherwise: the upper bound of any scorer.
class IdentityOracleScorer final : public PairwiseScorer {
 public:
  std::string name() const override { return "oracle"; }
  double pair(const Instance& query, const Instance& candidate) const override;
};

// Uniform [0, 1) noise seeded per (query, candidate).
class RandomScorer final : public PairwiseScorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  double pair(const Instance& query, const Instance& candidate) const override;

 private:
  std::uint64_t seed_;
};

/// Context selection shared by the graph scorers: candidate pairs are scored
/// with the attention head when one is given (uniform weights otherwise).
class ContextExpander {
 public:
  ContextExpander(const Dataset& ds, std::optional<AttentionParams> attention, std::size_t k,
                  std::uint64_t seed = kDefaultContextSeed);

  double similarity(const Instance& a, const Instance& b) const;
  // One expansion per instance of gallery_scene, sharing the context scores.
  std::vector<ExpandedPair> expand_scene(const Instance& query, const Scene& query_scene,
                                         const Scene& gallery_scene) const;
  PairScorer pair_scorer() const;
  std::size_t k() const { return k_; }

 private:
  std::optional<AttentionProjector> projector_;
  std::size_t k_;
  std::uint64_t seed_;
};

// Positive-class probability of the paired context graph; pairs without any
// context fall back to (s + 1) / 2 with s the pairwise similarity.
class GraphScorer final : public Scorer {
 public:
  GraphScorer(const Dataset& ds, std::optional<AttentionParams> attention, GcnParams gcn,
              std::uint64_t seed = kDefaultContextSeed);
  std::string name() const override { return "graph"; }
  std::vector<std::vector<double>> score(const Instance& query, const Scene& query_scene,
                                         std::span<const Scene* const> gallery) const override;

 private:
  ContextExpander expander_;
  GcnParams gcn_;
};

class SiameseScorer final : public Scorer {
 public:
  SiameseScorer(const Dataset& ds, std::optional<AttentionParams> attention, SiameseParams model,
                std::uint64_t seed = kDefaultContextSeed);
  std::string name() const override { return "siamese"; }
  std::vector<std::vector<double>> score(const Instance& query, const Scene& query_scene,
                                         std::span<const Scene* const> gallery) const override;

 private:
  ContextExpander expander_;
  SiameseParams model_;
};

// Single-pair entry points (expand, build the graph, run the model). The
// context size is the one the model was trained with.
double graph_score(const AttentionParams& attention, const GcnParams& gcn, const Instance& probe,
                   const Instance& gallery, const Dataset& ds, std::uint64_t seed = kDefaultContextSeed);
double siamese_graph_score(const AttentionParams& attention, const SiameseParams& model, const Instance& probe,
                           const Instance& gallery, const Dataset& ds, std::uint64_t seed = kDefaultContextSeed);

struct GraphTrainOptions {
  GcnConfig gcn;
  SgdConfig sgd{0.1, {{10, 0.5}}, 20, 42, 32};
  double negative_ratio = 3.0;
  std::string split = "train";
  GraphAugmentation augment{4, true};
};

// Expands the training pairs of options.split (contexts scored by the
// attention head when given), builds the graphs and trains.
GcnTrainResult train_graph_model(const Dataset& ds, const std::optional<AttentionParams>& attention,
                                 const GraphTrainOptions& options);
SiameseTrainResult train_siamese_model(const Dataset& ds, const std::optional<AttentionParams>& attention,
                                       const GraphTrainOptions& options);

}  // namespace ctxrr
