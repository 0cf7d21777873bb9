#include "ctxrr/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>
#include <utility>

#include "ctxrr/errors.hpp"

namespace ctxrr {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

}  // namespace detail

Tensor::Tensor() : Tensor(Shape{1}, {0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (std::size_t dim : shape) {
    if (dim == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  if (numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " + std::to_string(numel(shape)) +
                         " values, got " + std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = node_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("rows() needs rank <= 2, got " + shape_string(s));
}

std::size_t Tensor::cols() const {
  const Shape& s = node_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("cols() needs rank <= 2, got " + shape_string(s));
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t i) const { return node_->value.at(i); }
double Tensor::at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw UsageError("tensor " + shape_string(shape()) + " has no gradient");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::backward() {
  if (size() != 1) throw UsageError("backward() needs a scalar, got " + shape_string(shape()));
  if (!node_->requires_grad) throw UsageError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order (parents before child).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    node->ensure_grad();
    for (auto& parent : node->parents) {
      if (parent->requires_grad) parent->ensure_grad();
    }
    node->backward(*node);
  }
}

Tensor Tensor::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

}  // namespace ctxrr
