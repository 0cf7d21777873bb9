#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxrr/checkpoint.hpp"
#include "ctxrr/context.hpp"
#include "ctxrr/dataset.hpp"
#include "ctxrr/optim.hpp"
#include "ctxrr/random.hpp"
#include "ctxrr/tensor.hpp"

namespace ctxrr {

enum class AdjacencyNorm { symmetric, row };
enum class NodeFeatures { whole, all_parts };

std::string to_string(AdjacencyNorm norm);
std::string to_string(NodeFeatures features);
AdjacencyNorm parse_adjacency_norm(std::string_view s);
NodeFeatures parse_node_features(std::string_view s);

struct GcnConfig {
  std::size_t k = 3;
  std::size_t layers = 3;
  AdjacencyNorm norm = AdjacencyNorm::symmetric;
  NodeFeatures features = NodeFeatures::whole;
  std::size_t readout_width = 1024;
  // false switches the propagation layers to a linear activation.
  bool relu = true;

  std::size_t nodes() const { return k + 1; }
  void validate() const;
};

// Star graph over the target pair (node 0) and its contexts: A[i][j] = 1 iff
// i == 0, j == 0 or i == j (0-based).
Tensor star_adjacency(std::size_t nodes);
// symmetric: D^-1/2 A D^-1/2; row: D^-1 A; D is the degree diagonal of A.
Tensor normalize_adjacency(const Tensor& adjacency, AdjacencyNorm norm);

// d values (whole part) or R * d values (all parts, in part order).
std::vector<double> node_features(const Instance& inst, NodeFeatures features);

struct ContextGraph {
  std::size_t nodes = 0;
  std::size_t feature_dim = 0;  // per node, 2 * instance feature width
  Tensor x;                     // nodes x feature_dim
  Tensor adjacency;             // nodes x nodes
  Tensor a_hat;                 // nodes x nodes
};

// Node 0 holds [probe | gallery], node j holds [probe_ctx_j | gallery_ctx_j]
// in the order of ep.contexts. Throws DataError on a degenerate pair, a
// context count other than k, or mismatched feature dimensions.
ContextGraph build_graph(const ExpandedPair& ep, const GcnConfig& cfg);

/// GCN weights (feature_dim x feature_dim per layer, no bias), readout FC
/// from the flattened node matrix to readout_width, and a 2-way classifier.
struct GcnParams {
  GcnConfig config;
  std::size_t feature_dim = 0;
  std::vector<Tensor> layers;
  Tensor readout_w, readout_b;
  Tensor cls_w, cls_b;

  static GcnParams glorot(const GcnConfig& cfg, std::size_t feature_dim, Rng& rng);
  std::vector<Tensor> tensors() const;
  Checkpoint to_checkpoint() const;
  static GcnParams from_checkpoint(const Checkpoint& ckpt);
};

// Node matrix after all propagation layers for one graph (no tape pruning;
// builds a tape when parameters require gradients and grad mode is on).
Tensor gcn_propagate(const GcnParams& params, const ContextGraph& g);

// Logits [B x 2] for a batch of graphs sharing the parameters' node count.
Tensor gcn_logits(const GcnParams& params, std::span<const ContextGraph* const> graphs);

struct GcnOutput {
  Tensor logits;  // [2]
  double score = 0.0;  // softmax(logits)[1]
};
GcnOutput gcn_forward(const GcnParams& params, const ContextGraph& g);

// Positive-class probabilities without building a tape.
std::vector<double> gcn_scores(const GcnParams& params, std::span<const ContextGraph* const> graphs);

struct LabeledExpansion {
  ExpandedPair pair;
  int label = 0;  // 1 same identity, 0 different
};

// Target pairs for graph training from `split`: every same-identity
// cross-scene pair whose scenes both hold context (scenes with a single
// person are skipped), plus `negative_ratio` times as many random
// different-identity pairs. Orientation (which side is the probe) is drawn
// at random.
std::vector<LabeledExpansion> make_training_expansions(const Dataset& ds, std::string_view split,
                                                       const PairScorer& scorer, std::size_t k,
                                                       double negative_ratio, std::uint64_t seed);

struct GraphSample {
  ContextGraph graph;
  int label = 0;
};

std::vector<GraphSample> make_graph_samples(std::span<const LabeledExpansion> expansions, const GcnConfig& cfg);

// Coordinate relabeling y[i] = sign[i] * x[perm[i]] of one instance feature
// block.
struct FeatureTransform {
  std::vector<std::size_t> perm;
  std::vector<double> sign;
};

FeatureTransform random_feature_transform(std::size_t width, Rng& rng);

// Applies `t` to every consecutive block of t.perm.size() values of the
// row-major node matrix, so all nodes and both sides of a pair share it.
// Throws DimensionError when the row width is not a multiple of the block.
Tensor transform_features(const Tensor& x, const FeatureTransform& t);

// Training-time augmentation: every epoch shows each sample `views` times,
// each copy under a fresh random signed permutation of the instance feature
// coordinates. Identity templates from the training split stop being useful
// and the model has to learn how to compare two instances.
struct GraphAugmentation {
  std::size_t views = 1;
  bool signed_permutation = false;

  // Throws ConfigError when views is zero.
  void validate() const;
};

struct GcnTrainResult {
  GcnParams params;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

// Cross-entropy training. Throws DataError when a label class is missing or
// the samples do not share one node count.
GcnTrainResult train_gcn(std::span<const GraphSample> samples, const SgdConfig& sgd, const GcnConfig& cfg,
                         const GraphAugmentation& augment = {});

double gcn_accuracy(const GcnParams& params, std::span<const GraphSample> samples);

}  // namespace ctxrr
