#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ctxrr/tensor.hpp"

namespace ctxrr {

// Disables tape construction on the current thread while alive. Used for
// frozen-parameter inference so scoring never allocates gradient state.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Fingerprints the branch taken by every piecewise-linear op (ReLU, hinge)
// evaluated on the current thread while alive. Finite-difference checks use
// it to detect perturbations that cross a kink.
class KinkRecorder {
 public:
  KinkRecorder();
  ~KinkRecorder();
  KinkRecorder(const KinkRecorder&) = delete;
  KinkRecorder& operator=(const KinkRecorder&) = delete;

  void note(bool on);
  std::uint64_t pattern() const { return pattern_; }
  std::size_t count() const { return count_; }

 private:
  KinkRecorder* previous_;
  std::uint64_t pattern_ = 0xcbf29ce484222325ULL;
  std::size_t count_ = 0;
};

// a[m x k] * b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[B x in] * transpose(w[out x in]) + bias[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

enum class ElementwiseOp { relu, add, mul, sub, scale };

// Dispatcher over the elementwise family; `rhs` is ignored for relu and
// `factor` is only read for scale.
Tensor elementwise(ElementwiseOp op, const Tensor& lhs, const Tensor* rhs = nullptr,
                   double factor = 1.0);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Adjoint at exactly zero is 0.
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Softmax over every element (intended for rank-1 inputs).
Tensor softmax(const Tensor& x);
// Row-wise softmax of a [B x n] matrix.
Tensor softmax_rows(const Tensor& x);

// -log softmax(logits)[label] for a length-2 logit vector.
Tensor cross_entropy_binary(const Tensor& logits, int label);
// Mean over rows of -log softmax(row)[label_row] for logits [B x C].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> labels);

// out[i] = sum_j a[i][j] * b[i][j]; a, b are [B x n], out is [B].
Tensor row_dot(const Tensor& a, const Tensor& b);

// Same data, new shape with the same element count.
Tensor reshape(const Tensor& a, Shape shape);

// [B x n1] ++ [B x n2] -> [B x (n1 + n2)]
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Block-diagonal graph propagation: z is a stack of B node matrices, each
// [nodes x F], and every block is left-multiplied by a_hat [nodes x nodes].
// a_hat is treated as a constant.
Tensor graph_propagate(const Tensor& a_hat, const Tensor& z, std::size_t nodes);

// Mean cosine-embedding verification loss over a batch of similarities:
// y = +1 -> 1 - s, y = -1 -> max(0, s + margin).
Tensor cosine_embedding_loss(const Tensor& similarity, std::span<const int> labels, double margin);

}  // namespace ctxrr
