#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctxrr {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode tape. A node owns its value and, once
// backward has reached it, its gradient buffer. Nodes that do not require a
// gradient carry no parents and no backward closure, so constant subgraphs
// never enter the tape.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad();
};

}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode differentiation.
///
/// Copies are shallow: two Tensor handles that compare equal via same_node()
/// see the same value and gradient buffers. Operations build a fresh tape on
/// every forward pass; dropping the loss handle frees the whole tape.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Rank-2 accessors; a rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Seeds d(self)/d(self) = 1 and propagates through the tape. Only valid on
  // a single-element tensor.
  void backward();

  // Same values, no tape, no gradient.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Construction hook for operations.
  static Tensor from_node(std::shared_ptr<detail::Node> node);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

}  // namespace ctxrr
