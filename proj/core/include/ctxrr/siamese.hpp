#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctxrr/checkpoint.hpp"
#include "ctxrr/context.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/optim.hpp"
#include "ctxrr/random.hpp"
#include "ctxrr/tensor.hpp"

namespace ctxrr {

/// Two-graph comparison model: each image gets its own star graph whose
/// nodes are single instances (the target first, then that side's members of
/// the selected context pairs). Both graphs run through one shared GCN and
/// readout; the classifier sees [h_p * h_g | (h_p - h_g)^2] of the two
/// readouts, so the score does not depend on which side is the probe.
struct SiameseGraphs {
  ContextGraph probe_side;
  ContextGraph gallery_side;
};

// Throws DataError on a degenerate pair or a context count other than cfg.k.
SiameseGraphs build_siamese_graphs(const ExpandedPair& ep, const GcnConfig& cfg);

struct SiameseParams {
  GcnConfig config;
  std::size_t feature_dim = 0;  // per node, the instance feature width
  std::vector<Tensor> layers;
  Tensor readout_w, readout_b;  // readout_width x nodes * feature_dim
  Tensor cls_w, cls_b;          // 2 x 2 * readout_width

  static SiameseParams glorot(const GcnConfig& cfg, std::size_t feature_dim, Rng& rng);
  std::vector<Tensor> tensors() const;
  Checkpoint to_checkpoint() const;
  static SiameseParams from_checkpoint(const Checkpoint& ckpt);
};

// Readout features [B x readout_width] of one branch for a batch of graphs.
Tensor siamese_branch(const SiameseParams& params, std::span<const ContextGraph* const> graphs);

// Logits [B x 2]; classifier inputs are the elementwise product of the two
// readouts followed by their squared difference.
Tensor siamese_logits(const SiameseParams& params, std::span<const SiameseGraphs* const> pairs);

std::vector<double> siamese_scores(const SiameseParams& params, std::span<const SiameseGraphs* const> pairs);

struct SiameseSample {
  SiameseGraphs graphs;
  int label = 0;
};

std::vector<SiameseSample> make_siamese_samples(std::span<const LabeledExpansion> expansions, const GcnConfig& cfg);

struct SiameseTrainResult {
  SiameseParams params;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

SiameseTrainResult train_siamese(std::span<const SiameseSample> samples, const SgdConfig& sgd, const GcnConfig& cfg,
                                 const GraphAugmentation& augment = {});

double siamese_accuracy(const SiameseParams& params, std::span<const SiameseSample> samples);

}  // namespace ctxrr
