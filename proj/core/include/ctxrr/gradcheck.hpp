#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxrr/random.hpp"
#include "ctxrr/tensor.hpp"

namespace ctxrr {

// Below this magnitude gradients are compared absolutely: central
// differences carry roughly eps * |f| / h of rounding noise.
inline constexpr double kGradcheckFloor = 1e-6;

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = kGradcheckFloor);

struct FiniteDifferenceResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  // Coordinates whose +-h perturbation changed a ReLU or hinge branch; the
  // function is not differentiable across them, so they are not compared.
  std::size_t skipped_kinks = 0;
};

// Compares the taped gradient of `loss` (a scalar) with central differences
// on `inputs`. Tensors with at most `max_coords` elements are checked fully,
// larger ones on `max_coords` coordinates drawn from `rng`.
FiniteDifferenceResult finite_difference_check(const std::function<Tensor()>& loss, std::span<Tensor> inputs,
                                               Rng& rng, std::size_t max_coords = 12, double step = 1e-5);

struct GradcheckOptions {
  std::size_t configs = 100;
  std::uint64_t seed = 42;
  double step = 1e-5;
  std::size_t max_coords = 12;
};

struct GradcheckComponent {
  std::string name;
  std::size_t configs = 0;
  std::size_t coordinates = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  double seconds = 0.0;
};

// Runs every suite: the individual ops, the attention head end to end
// (learned weights, fused similarity, verification loss), the paired GCN
// pipeline (propagation, readout, cross-entropy) and the siamese variant.
// Each suite draws `configs` random configurations.
std::vector<GradcheckComponent> run_gradcheck(const GradcheckOptions& options);

std::vector<std::string> gradcheck_component_names();
GradcheckComponent run_gradcheck_component(const std::string& name, const GradcheckOptions& options);

}  // namespace ctxrr
