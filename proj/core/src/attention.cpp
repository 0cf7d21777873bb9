#include "ctxrr/attention.hpp"

#include <cmath>
#include <map>
#include <string>

#include "ctxrr/errors.hpp"
#include "ctxrr/ops.hpp"
#include "kernels.hpp"
#include "training.hpp"

namespace ctxrr {

void VerificationConfig::validate() const {
  if (!(margin >= 0.0 && margin < 1.0)) throw ConfigError("margin must lie in [0, 1)");
}

AttentionParams AttentionParams::glorot(std::size_t dim, std::size_t hidden, Rng& rng) {
  if (dim < 2 || hidden == 0) throw ConfigError("attention head needs dim >= 2 and hidden >= 1");
  const std::size_t in = 2 * kNumParts * dim;
  AttentionParams p{Tensor::zeros({hidden, in}, true), Tensor::zeros({hidden}, true),
                    Tensor::zeros({kNumParts, hidden}, true), Tensor::zeros({kNumParts}, true)};
  glorot_uniform(p.fc1_w, in, hidden, rng);
  glorot_uniform(p.fc2_w, hidden, kNumParts, rng);
  return p;
}

AttentionParams AttentionParams::zeros(std::size_t dim, std::size_t hidden) {
  const std::size_t in = 2 * kNumParts * dim;
  return {Tensor::zeros({hidden, in}, true), Tensor::zeros({hidden}, true), Tensor::zeros({kNumParts, hidden}, true),
          Tensor::zeros({kNumParts}, true)};
}

Checkpoint AttentionParams::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["model"] = "relative-attention";
  ckpt.meta["dim"] = std::to_string(dim());
  ckpt.meta["hidden"] = std::to_string(hidden());
  ckpt.add("fc1.weight", fc1_w);
  ckpt.add("fc1.bias", fc1_b);
  ckpt.add("fc2.weight", fc2_w);
  ckpt.add("fc2.bias", fc2_b);
  return ckpt;
}

AttentionParams AttentionParams::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta_value("model") != "relative-attention") {
    throw DataError("checkpoint holds a '" + ckpt.meta_value("model") + "' model, expected relative-attention");
  }
  AttentionParams p{ckpt.get("fc1.weight"), ckpt.get("fc1.bias"), ckpt.get("fc2.weight"), ckpt.get("fc2.bias")};
  const bool ok = p.fc1_w.rank() == 2 && p.fc1_w.cols() % (2 * kNumParts) == 0 && p.fc1_b.size() == p.fc1_w.rows() &&
                  p.fc2_w.rank() == 2 && p.fc2_w.rows() == kNumParts && p.fc2_w.cols() == p.fc1_w.rows() &&
                  p.fc2_b.size() == kNumParts;
  if (!ok) throw DataError("attention checkpoint tensors have inconsistent shapes");
  return p;
}

std::pair<const Instance*, const Instance*> canonical_order(const Instance& a, const Instance& b) {
  if (b.instance_id < a.instance_id) return {&b, &a};
  return {&a, &b};
}

namespace {

void check_dim(const AttentionParams& params, const PartEmbedding& e) {
  if (e.dim() != params.dim()) {
    throw ConfigError("attention head expects dimension " + std::to_string(params.dim()) + ", embedding has " +
                      std::to_string(e.dim()));
  }
}

// Contribution of `e` to fc1's pre-activation when placed in `slot` (0 =
// first, 1 = second).
std::vector<double> project(const AttentionParams& params, const PartEmbedding& e, std::size_t slot) {
  check_dim(params, e);
  const std::size_t d = params.dim(), h = params.hidden(), in = params.fc1_w.cols();
  const double* w = params.fc1_w.data().data();
  std::vector<double> out(h, 0.0);
  for (std::size_t k = 0; k < h; ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < kNumParts; ++r) {
      s += kernels::dot(d, w + k * in + (2 * r + slot) * d, e.part(r).data());
    }
    out[k] = s;
  }
  return out;
}

std::array<double, kNumParts> weights_from_projections(const AttentionParams& params, std::span<const double> first,
                                                       std::span<const double> second) {
  const std::size_t h = params.hidden();
  std::vector<double> hidden(h);
  const auto b1 = params.fc1_b.data();
  for (std::size_t k = 0; k < h; ++k) {
    const double pre = b1[k] + first[k] + second[k];
    hidden[k] = pre > 0.0 ? pre : 0.0;
  }
  std::array<double, kNumParts> logits{};
  const double* w2 = params.fc2_w.data().data();
  for (std::size_t r = 0; r < kNumParts; ++r) {
    logits[r] = params.fc2_b.data()[r] + kernels::dot(h, w2 + r * h, hidden.data());
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  std::array<double, kNumParts> w{};
  for (std::size_t r = 0; r < kNumParts; ++r) {
    w[r] = std::exp(logits[r] - mx);
    z += w[r];
  }
  for (double& v : w) v /= z;
  return w;
}

double weighted_cosine(const std::array<double, kNumParts>& w, const PartEmbedding& a, const PartEmbedding& b) {
  const auto cos = part_cosines(a, b);
  double s = 0.0;
  for (std::size_t r = 0; r < kNumParts; ++r) s += w[r] * cos[r];
  return s;
}

}  // namespace

PartWeights attention_weights(const AttentionParams& params, const PartEmbedding& first, const PartEmbedding& second) {
  const auto p = project(params, first, 0);
  const auto q = project(params, second, 1);
  return PartWeights(weights_from_projections(params, p, q));
}

double attention_similarity(const AttentionParams& params, const PartEmbedding& first, const PartEmbedding& second) {
  const auto p = project(params, first, 0);
  const auto q = project(params, second, 1);
  return weighted_cosine(weights_from_projections(params, p, q), first, second);
}

double attention_similarity(const AttentionParams& params, const Instance& a, const Instance& b) {
  const auto [first, second] = canonical_order(a, b);
  return attention_similarity(params, first->embedding, second->embedding);
}

double verification_loss(double similarity, int label, const VerificationConfig& cfg) {
  if (label == 1) return 1.0 - similarity;
  if (label == -1) return std::max(0.0, similarity + cfg.margin);
  throw UsageError("verification label must be +1 or -1, got " + std::to_string(label));
}

Tensor attention_similarity_batch(const AttentionParams& params, std::span<const LabeledPair> pairs) {
  if (pairs.empty()) throw UsageError("attention batch is empty");
  const std::size_t d = params.dim(), in = 2 * kNumParts * d, n = pairs.size();
  std::vector<double> x(n * in);
  std::vector<double> cos(n * kNumParts);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [first, second] = canonical_order(*pairs[i].a, *pairs[i].b);
    check_dim(params, first->embedding);
    check_dim(params, second->embedding);
    for (std::size_t r = 0; r < kNumParts; ++r) {
      const auto pa = first->embedding.part(r);
      const auto pb = second->embedding.part(r);
      std::copy(pa.begin(), pa.end(), x.begin() + static_cast<std::ptrdiff_t>(i * in + (2 * r) * d));
      std::copy(pb.begin(), pb.end(), x.begin() + static_cast<std::ptrdiff_t>(i * in + (2 * r + 1) * d));
    }
    const auto c = part_cosines(first->embedding, second->embedding);
    std::copy(c.begin(), c.end(), cos.begin() + static_cast<std::ptrdiff_t>(i * kNumParts));
  }
  Tensor input = Tensor::matrix(n, in, std::move(x));
  Tensor hidden = relu(linear(input, params.fc1_w, params.fc1_b));
  Tensor weights = softmax_rows(linear(hidden, params.fc2_w, params.fc2_b));
  return row_dot(weights, Tensor::matrix(n, kNumParts, std::move(cos)));
}

Tensor attention_loss(const AttentionParams& params, std::span<const LabeledPair> pairs,
                      const VerificationConfig& vcfg) {
  std::vector<int> labels;
  labels.reserve(pairs.size());
  for (const auto& p : pairs) labels.push_back(p.label);
  return cosine_embedding_loss(attention_similarity_batch(params, pairs), labels, vcfg.margin);
}

std::vector<LabeledPair> sample_attention_pairs(const Dataset& ds, std::string_view split, double negative_ratio,
                                                Rng& rng) {
  std::vector<const Instance*> labeled;
  std::map<int, std::vector<const Instance*>> by_identity;
  for (const Scene* scene : ds.scenes_in_split(split)) {
    for (const Instance& inst : scene->instances) {
      if (!inst.identity) continue;
      labeled.push_back(&inst);
      by_identity[*inst.identity].push_back(&inst);
    }
  }
  std::vector<LabeledPair> pairs;
  for (const auto& [id, group] : by_identity) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        if (group[i]->scene_id != group[j]->scene_id) pairs.push_back({group[i], group[j], 1});
      }
    }
  }
  const std::size_t positives = pairs.size();
  const auto wanted = static_cast<std::size_t>(std::llround(negative_ratio * static_cast<double>(positives)));
  if (by_identity.size() < 2 || labeled.size() < 2) return pairs;
  std::uniform_int_distribution<std::size_t> pick(0, labeled.size() - 1);
  std::size_t drawn = 0;
  for (std::size_t attempts = 0; drawn < wanted && attempts < wanted * 100; ++attempts) {
    const Instance* a = labeled[pick(rng)];
    const Instance* b = labeled[pick(rng)];
    if (*a->identity == *b->identity || a->scene_id == b->scene_id) continue;
    pairs.push_back({a, b, -1});
    ++drawn;
  }
  return pairs;
}

namespace {

void require_both_labels(std::span<const LabeledPair> pairs) {
  bool pos = false, neg = false;
  for (const auto& p : pairs) {
    pos = pos || p.label == 1;
    neg = neg || p.label == -1;
  }
  if (!pos || !neg) throw DataError("attention training needs both positive and negative pairs");
}

AttentionTrainResult run_attention_training(std::size_t dim, const AttentionTrainConfig& cfg,
                                            const VerificationConfig& vcfg,
                                            const std::function<std::vector<LabeledPair>(int)>& pairs_for_epoch) {
  vcfg.validate();
  Rng init_rng(derive_seed(cfg.sgd.seed, "attention/init"));
  AttentionTrainResult result{AttentionParams::glorot(dim, cfg.hidden, init_rng), {}};
  std::vector<LabeledPair> current;
  result.epoch_loss = training::run(
      cfg.sgd, result.params.tensors(), "attention",
      [&](int epoch) {
        current = pairs_for_epoch(epoch);
        require_both_labels(current);
        return current.size();
      },
      [&](std::span<const std::size_t> idx) {
        std::vector<LabeledPair> batch;
        batch.reserve(idx.size());
        for (std::size_t i : idx) batch.push_back(current[i]);
        return attention_loss(result.params, batch, vcfg);
      });
  return result;
}

}  // namespace

AttentionTrainResult train_attention(std::span<const LabeledPair> pairs, const AttentionTrainConfig& cfg,
                                     const VerificationConfig& vcfg) {
  if (pairs.empty()) throw DataError("attention training set is empty");
  require_both_labels(pairs);
  const std::size_t dim = pairs.front().a->embedding.dim();
  std::vector<LabeledPair> fixed(pairs.begin(), pairs.end());
  return run_attention_training(dim, cfg, vcfg, [&](int) { return fixed; });
}

AttentionTrainResult train_attention(const Dataset& ds, std::string_view split, const AttentionTrainConfig& cfg,
                                     const VerificationConfig& vcfg) {
  Rng rng(derive_seed(cfg.sgd.seed, "attention/pairs"));
  auto first = sample_attention_pairs(ds, split, cfg.negative_ratio, rng);
  if (first.empty()) throw DataError("attention training set is empty");
  require_both_labels(first);
  return run_attention_training(ds.dim, cfg, vcfg, [&](int epoch) {
    if (epoch == 1) return first;
    return sample_attention_pairs(ds, split, cfg.negative_ratio, rng);
  });
}

AttentionProjector::AttentionProjector(const AttentionParams& params) : params_(params) {}

AttentionProjector::Projection AttentionProjector::project(const PartEmbedding& e) const {
  return {ctxrr::project(params_, e, 0), ctxrr::project(params_, e, 1)};
}

void AttentionProjector::cache(const Dataset& ds) {
  for (const Scene& scene : ds.scenes) {
    for (const Instance& inst : scene.instances) cache_.emplace(&inst, project(inst.embedding));
  }
}

const AttentionProjector::Projection& AttentionProjector::projection(const Instance& inst, Projection& scratch) const {
  auto it = cache_.find(&inst);
  if (it != cache_.end()) return it->second;
  scratch = project(inst.embedding);
  return scratch;
}

PartWeights AttentionProjector::weights(const Instance& first, const Instance& second) const {
  Projection s1, s2;
  const auto& p = projection(first, s1);
  const auto& q = projection(second, s2);
  return PartWeights(weights_from_projections(params_, p.as_first, q.as_second));
}

double AttentionProjector::similarity(const Instance& a, const Instance& b) const {
  const auto [first, second] = canonical_order(a, b);
  Projection s1, s2;
  const auto& p = projection(*first, s1);
  const auto& q = projection(*second, s2);
  return weighted_cosine(weights_from_projections(params_, p.as_first, q.as_second), first->embedding,
                         second->embedding);
}

}  // namespace ctxrr
