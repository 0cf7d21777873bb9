#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxrr {

inline constexpr std::size_t kNumParts = 4;

enum class Part : std::size_t { whole = 0, upper = 1, middle = 2, lower = 3 };

std::string_view part_name(Part p);

// Norm deviation below which an ingested part vector is silently
// re-normalized; anything larger is rejected.
inline constexpr double kRenormTolerance = 1e-3;

/// The four L2-normalized part vectors (whole, upper, middle, lower) of one
/// person. Only constructible through from_parts(), which enforces the
/// unit-norm invariant, so every PartEmbedding in the program is valid.
class PartEmbedding {
 public:
  using Parts = std::array<std::vector<double>, kNumParts>;

  // Re-normalizes vectors whose norm is within kRenormTolerance of 1 and
  // throws ValidationError otherwise. `label` names the owner in messages.
  static PartEmbedding from_parts(Parts parts, std::string_view label = "embedding");

  std::size_t dim() const { return parts_[0].size(); }
  std::span<const double> part(std::size_t r) const { return parts_.at(r); }
  std::span<const double> part(Part p) const { return part(static_cast<std::size_t>(p)); }
  const Parts& parts() const { return parts_; }

  friend bool operator==(const PartEmbedding&, const PartEmbedding&) = default;

 private:
  explicit PartEmbedding(Parts parts) : parts_(std::move(parts)) {}
  Parts parts_;
};

struct Box {
  double x = 0, y = 0, w = 1, h = 1;
  friend bool operator==(const Box&, const Box&) = default;
};

struct Instance {
  std::string instance_id;
  std::string scene_id;
  Box box;
  std::optional<int> identity;
  PartEmbedding embedding;
};

struct Scene {
  std::string scene_id;
  std::string camera_id;
  // "train" / "test"; empty when the dataset is not split.
  std::string split;
  std::vector<Instance> instances;

  const Instance* find(std::string_view instance_id) const;
  bool contains(const Instance& inst) const;
};

/// Convex part-fusion weights.
class PartWeights {
 public:
  // Throws ValidationError unless all weights are >= 0 and sum to 1 within 1e-9.
  explicit PartWeights(std::array<double, kNumParts> w);

  double operator[](std::size_t r) const { return w_[r]; }
  const std::array<double, kNumParts>& values() const { return w_; }

 private:
  std::array<double, kNumParts> w_;
};

PartWeights uniform_weights();

// Cosine of part r of a and b; equals the dot product under the unit-norm
// invariant. Throws DimensionError on dimension mismatch, UsageError on a bad
// part index.
double part_cosine(const PartEmbedding& a, const PartEmbedding& b, std::size_t r);

std::array<double, kNumParts> part_cosines(const PartEmbedding& a, const PartEmbedding& b);

// sum_r w_r * cos(a^r, b^r)
double fused_similarity(const PartEmbedding& a, const PartEmbedding& b, const PartWeights& w);

}  // namespace ctxrr
