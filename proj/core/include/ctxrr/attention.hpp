#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctxrr/checkpoint.hpp"
#include "ctxrr/dataset.hpp"
#include "ctxrr/embedding.hpp"
#include "ctxrr/optim.hpp"
#include "ctxrr/random.hpp"
#include "ctxrr/tensor.hpp"

namespace ctxrr {

struct VerificationConfig {
  double margin = 0.3;
  void validate() const;
};

/// Pairwise relative-attention head: fc1 -> ReLU -> fc2 -> softmax over the
/// four parts. Input is the per-part pair concatenation
/// [a^0 | b^0 | a^1 | b^1 | a^2 | b^2 | a^3 | b^3] of length 2 * R * d.
struct AttentionParams {
  Tensor fc1_w;  // hidden x 2Rd
  Tensor fc1_b;  // hidden
  Tensor fc2_w;  // R x hidden
  Tensor fc2_b;  // R

  static AttentionParams glorot(std::size_t dim, std::size_t hidden, Rng& rng);
  static AttentionParams zeros(std::size_t dim, std::size_t hidden);

  std::size_t dim() const { return fc1_w.cols() / (2 * kNumParts); }
  std::size_t hidden() const { return fc1_w.rows(); }
  std::vector<Tensor> tensors() const { return {fc1_w, fc1_b, fc2_w, fc2_b}; }

  Checkpoint to_checkpoint() const;
  // Throws DataError when the checkpoint is not an attention checkpoint or
  // its tensors are inconsistent.
  static AttentionParams from_checkpoint(const Checkpoint& ckpt);
};

// Orders a pair by instance_id so that the encoded input, and therefore the
// similarity, does not depend on argument order.
std::pair<const Instance*, const Instance*> canonical_order(const Instance& a, const Instance& b);

// Weights for the pair in the given (first, second) slot order.
PartWeights attention_weights(const AttentionParams& params, const PartEmbedding& first,
                              const PartEmbedding& second);

// fused_similarity under the learned weights, after canonical ordering.
double attention_similarity(const AttentionParams& params, const Instance& a, const Instance& b);
// Same, without reordering.
double attention_similarity(const AttentionParams& params, const PartEmbedding& first, const PartEmbedding& second);

// y = +1 -> 1 - s; y = -1 -> max(0, s + margin). Throws UsageError for other y.
double verification_loss(double similarity, int label, const VerificationConfig& cfg);

struct LabeledPair {
  const Instance* a = nullptr;
  const Instance* b = nullptr;
  int label = 1;  // +1 same identity, -1 different
};

// Tape-building forward for a batch: similarity per pair, canonical order.
Tensor attention_similarity_batch(const AttentionParams& params, std::span<const LabeledPair> pairs);
// Mean verification loss over the batch.
Tensor attention_loss(const AttentionParams& params, std::span<const LabeledPair> pairs, const VerificationConfig& vcfg);

// All same-identity cross-scene pairs of `split` as positives plus
// `negative_ratio` times as many random different-identity cross-scene pairs.
std::vector<LabeledPair> sample_attention_pairs(const Dataset& ds, std::string_view split, double negative_ratio,
                                                Rng& rng);

struct AttentionTrainConfig {
  std::size_t hidden = 256;
  double negative_ratio = 3.0;
  SgdConfig sgd{0.1, {{10, 0.5}}, 10, 42, 32};
};

struct AttentionTrainResult {
  AttentionParams params;
  std::vector<double> epoch_loss;
};

// Trains on a fixed pair list (reshuffled each epoch). Throws DataError on an
// empty or single-class list.
AttentionTrainResult train_attention(std::span<const LabeledPair> pairs, const AttentionTrainConfig& cfg,
                                     const VerificationConfig& vcfg);

// Draws fresh negatives every epoch from the labeled instances of `split`.
AttentionTrainResult train_attention(const Dataset& ds, std::string_view split, const AttentionTrainConfig& cfg,
                                     const VerificationConfig& vcfg);

/// Inference-only scorer. fc1 is linear in the concatenated input, so its
/// pre-activation splits into a first-slot and a second-slot projection per
/// instance; caching those makes each pair cost O(hidden * R) instead of
/// O(hidden * R * d).
class AttentionProjector {
 public:
  explicit AttentionProjector(const AttentionParams& params);

  // Precomputes projections for every instance of the dataset.
  void cache(const Dataset& ds);

  PartWeights weights(const Instance& first, const Instance& second) const;
  // Canonically ordered similarity, identical to attention_similarity().
  double similarity(const Instance& a, const Instance& b) const;

  const AttentionParams& params() const { return params_; }

 private:
  struct Projection {
    std::vector<double> as_first;
    std::vector<double> as_second;
  };
  Projection project(const PartEmbedding& e) const;
  const Projection& projection(const Instance& inst, Projection& scratch) const;

  AttentionParams params_;
  std::unordered_map<const Instance*, Projection> cache_;
};

}  // namespace ctxrr
