#include "ctxrr/optim.hpp"

#include <string>

#include "ctxrr/errors.hpp"

namespace ctxrr {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i].second > 0.0)) throw ConfigError("schedule multipliers must be positive");
    if (i > 0 && schedule[i].first <= schedule[i - 1].first) {
      throw ConfigError("schedule epochs must be strictly increasing");
    }
  }
}

double SgdConfig::rate_at(int epoch) const {
  double rate = learning_rate;
  for (const auto& [boundary, multiplier] : schedule) {
    if (epoch > boundary) rate *= multiplier;
  }
  return rate;
}

Sgd::Sgd(std::vector<Tensor> params) : params_(std::move(params)) {}

void Sgd::step(double learning_rate) {
  for (const Tensor& p : params_) {
    if (!p.has_grad()) throw UsageError("sgd step: parameter " + shape_string(p.shape()) + " has no gradient");
  }
  for (Tensor& p : params_) {
    auto value = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate * grad[i];
    p.zero_grad();
  }
}

void Sgd::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace ctxrr
