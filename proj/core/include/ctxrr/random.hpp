#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ctxrr/tensor.hpp"

namespace ctxrr {

using Rng = std::mt19937_64;

// Stable 64-bit mix of a run seed and a string tag (FNV-1a then splitmix64).
// Used to give each probe/gallery pair its own reproducible stream that does
// not depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Fills `t` uniformly in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace ctxrr
