#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ctxrr/tensor.hpp"

namespace ctxrr {

struct SgdConfig {
  double learning_rate = 0.1;
  // (epoch, multiplier): from epoch + 1 onward the rate is scaled by
  // `multiplier`. Entries compound.
  std::vector<std::pair<int, double>> schedule{{10, 0.5}};
  int epochs = 20;
  std::uint64_t seed = 42;
  std::size_t batch_size = 32;

  // Throws ConfigError on non-positive rates/epochs/batch or a
  // non-increasing schedule.
  void validate() const;

  // Learning rate in effect during `epoch` (1-based).
  double rate_at(int epoch) const;
};

class Sgd {
 public:
  explicit Sgd(std::vector<Tensor> params);

  // p <- p - lr * grad(p), then clears every gradient. Throws UsageError if a
  // parameter has no gradient.
  void step(double learning_rate);
  void zero_grad();

  std::span<const Tensor> params() const { return params_; }

 private:
  std::vector<Tensor> params_;
};

}  // namespace ctxrr
