#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <spdlog/logger.h>

#include "ctxrr/ops.hpp"
#include "ctxrr/optim.hpp"
#include "ctxrr/random.hpp"

namespace ctxrr {

spdlog::logger& logger();

namespace training {

// Mini-batch SGD driver shared by the attention head and the graph models.
// `prepare(epoch)` returns the number of items for that epoch (and may
// resample them); `batch_loss(indices)` builds the mean loss over a batch.
// Returns the sample-weighted mean loss of each epoch.
inline std::vector<double> run(const SgdConfig& cfg, std::vector<Tensor> params, const std::string& name,
                               const std::function<std::size_t(int)>& prepare,
                               const std::function<Tensor(std::span<const std::size_t>)>& batch_loss) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, name + "/shuffle"));
  Sgd sgd(std::move(params));
  std::vector<double> epoch_loss;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::size_t n = prepare(epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.rate_at(epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      Tensor loss = batch_loss(batch);
      total += loss.item() * static_cast<double>(len);
      loss.backward();
      sgd.step(lr);
    }
    epoch_loss.push_back(n ? total / static_cast<double>(n) : 0.0);
    logger().info("{} epoch {}/{} lr={:.4g} loss={:.6f}", name, epoch, cfg.epochs, lr, epoch_loss.back());
  }
  return epoch_loss;
}

}  // namespace training
}  // namespace ctxrr
