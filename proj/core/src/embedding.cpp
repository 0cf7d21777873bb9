#include "ctxrr/embedding.hpp"

#include <cmath>
#include <sstream>

#include "ctxrr/errors.hpp"
#include "kernels.hpp"

namespace ctxrr {

std::string_view part_name(Part p) {
  switch (p) {
    case Part::whole: return "whole";
    case Part::upper: return "upper";
    case Part::middle: return "middle";
    case Part::lower: return "lower";
  }
  return "?";
}

PartEmbedding PartEmbedding::from_parts(Parts parts, std::string_view label) {
  const std::size_t d = parts[0].size();
  if (d < 2) throw ValidationError(std::string(label) + ": part dimension must be >= 2");
  for (std::size_t r = 0; r < kNumParts; ++r) {
    auto& v = parts[r];
    if (v.size() != d) {
      throw ValidationError(std::string(label) + ": part " + std::string(part_name(Part(r))) + " has dimension " +
                            std::to_string(v.size()) + ", expected " + std::to_string(d));
    }
    double sq = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) throw ValidationError(std::string(label) + ": non-finite embedding value");
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (std::abs(norm - 1.0) >= kRenormTolerance) {
      std::ostringstream msg;
      msg << label << ": part " << part_name(Part(r)) << " has norm " << norm << ", expected 1";
      throw ValidationError(msg.str());
    }
    // Vectors that are unit up to rounding are kept bit for bit, so a
    // save/load cycle does not drift.
    if (std::abs(norm - 1.0) > 1e-14) {
      for (double& x : v) x /= norm;
    }
  }
  return PartEmbedding(std::move(parts));
}

const Instance* Scene::find(std::string_view instance_id) const {
  for (const Instance& inst : instances) {
    if (inst.instance_id == instance_id) return &inst;
  }
  return nullptr;
}

bool Scene::contains(const Instance& inst) const {
  for (const Instance& i : instances) {
    if (&i == &inst) return true;
  }
  return false;
}

PartWeights::PartWeights(std::array<double, kNumParts> w) : w_(w) {
  double total = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0)) throw ValidationError("part weights must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("part weights must sum to 1");
}

PartWeights uniform_weights() { return PartWeights({0.25, 0.25, 0.25, 0.25}); }

double part_cosine(const PartEmbedding& a, const PartEmbedding& b, std::size_t r) {
  if (r >= kNumParts) throw UsageError("part index " + std::to_string(r) + " out of range");
  if (a.dim() != b.dim()) {
    throw DimensionError("part_cosine: dimension " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const auto pa = a.part(r);
  const auto pb = b.part(r);
  if (pa.data() == pb.data()) return 1.0;
  const double c = kernels::dot(pa.size(), pa.data(), pb.data());
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

std::array<double, kNumParts> part_cosines(const PartEmbedding& a, const PartEmbedding& b) {
  std::array<double, kNumParts> out{};
  for (std::size_t r = 0; r < kNumParts; ++r) out[r] = part_cosine(a, b, r);
  return out;
}

double fused_similarity(const PartEmbedding& a, const PartEmbedding& b, const PartWeights& w) {
  const auto cos = part_cosines(a, b);
  double s = 0.0;
  for (std::size_t r = 0; r < kNumParts; ++r) s += w[r] * cos[r];
  return s;
}

}  // namespace ctxrr
