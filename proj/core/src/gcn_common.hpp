#pragma once

#include <cstddef>
#include <string_view>

#include "ctxrr/checkpoint.hpp"
#include "ctxrr/graph.hpp"

namespace ctxrr::detail {

// Shared by the paired and the siamese graph models, which differ only in
// the classifier input width (readout_width times `branches`).
Checkpoint write_gcn_checkpoint(const GcnParams& params, std::string_view model);
GcnParams read_gcn_checkpoint(const Checkpoint& ckpt, std::string_view model, std::size_t branches);

// Z <- act(A_hat Z W) for each layer over a stack of equally sized graphs.
Tensor propagate_layers(const GcnConfig& cfg, const std::vector<Tensor>& layers, const Tensor& a_hat, Tensor z);

}  // namespace ctxrr::detail
