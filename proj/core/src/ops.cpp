#include "ctxrr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <utility>

#include "ctxrr/errors.hpp"
#include "kernels.hpp"

namespace ctxrr {
namespace {

thread_local bool g_grad_enabled = true;
thread_local KinkRecorder* g_kink_recorder = nullptr;

void note_branch(bool on) {
  if (g_kink_recorder != nullptr) g_kink_recorder->note(on);
}

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_finite(const char* op, const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

KinkRecorder::KinkRecorder() : previous_(g_kink_recorder) { g_kink_recorder = this; }
KinkRecorder::~KinkRecorder() { g_kink_recorder = previous_; }

void KinkRecorder::note(bool on) {
  // FNV-1a over the branch bits.
  pattern_ = (pattern_ ^ (on ? 0x9eu : 0x61u)) * 0x100000001b3ULL;
  ++count_;
}
bool grad_enabled() { return g_grad_enabled; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  NodePtr an = a.node(), bn = b.node();
  return make_result({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) kernels::gemm_nt(m, n, k, self.grad.data(), bn->value.data(), an->grad.data());
    if (bn->requires_grad) kernels::gemm_tn(k, m, n, an->value.data(), self.grad.data(), bn->grad.data());
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank2("linear", x);
  require_rank2("linear", w);
  const std::size_t batch = x.rows(), in = x.cols(), out_dim = w.rows();
  if (w.cols() != in) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  if (bias.size() != out_dim) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  std::vector<double> out(batch * out_dim);
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(bias.data().begin(), bias.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * out_dim));
  }
  kernels::gemm_nt(batch, in, out_dim, x.data().data(), w.data().data(), out.data());
  NodePtr xn = x.node(), wn = w.node(), bn = bias.node();
  return make_result({batch, out_dim}, std::move(out), {x, w, bias},
                     [xn, wn, bn, batch, in, out_dim](Node& self) {
                       if (xn->requires_grad) {
                         kernels::gemm_nn(batch, out_dim, in, self.grad.data(), wn->value.data(), xn->grad.data());
                       }
                       if (wn->requires_grad) {
                         kernels::gemm_tn(out_dim, batch, in, self.grad.data(), xn->value.data(), wn->grad.data());
                       }
                       if (bn->requires_grad) {
                         for (std::size_t i = 0; i < batch; ++i) {
                           const double* g = self.grad.data() + i * out_dim;
                           for (std::size_t o = 0; o < out_dim; ++o) bn->grad[o] += g[o];
                         }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i];
      if (bn->requires_grad) bn->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i];
      if (bn->requires_grad) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i] * bn->value[i];
      if (bn->requires_grad) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  NodePtr an = a.node();
  return make_result(a.shape(), std::move(out), {a}, [an, factor](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * factor;
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    note_branch(a.data()[i] > 0.0);
  }
  NodePtr an = a.node();
  return make_result(a.shape(), std::move(out), {a}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
    }
  });
}

Tensor elementwise(ElementwiseOp op, const Tensor& lhs, const Tensor* rhs, double factor) {
  auto need_rhs = [&]() -> const Tensor& {
    if (rhs == nullptr) throw UsageError("elementwise: binary op needs a right-hand operand");
    return *rhs;
  };
  switch (op) {
    case ElementwiseOp::relu: return relu(lhs);
    case ElementwiseOp::add: return add(lhs, need_rhs());
    case ElementwiseOp::mul: return mul(lhs, need_rhs());
    case ElementwiseOp::sub: return sub(lhs, need_rhs());
    case ElementwiseOp::scale: return scale(lhs, factor);
  }
  throw UsageError("elementwise: unknown op");
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  NodePtr an = a.node();
  return make_result({1}, {s}, {a}, [an](Node& self) {
    const double g = self.grad[0];
    for (double& v : an->grad) v += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

namespace {

void softmax_inplace(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    z += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

// dx_i = y_i * (g_i - sum_j g_j y_j)
void softmax_adjoint(const double* y, const double* g, double* dx, std::size_t n) {
  double dotp = 0.0;
  for (std::size_t i = 0; i < n; ++i) dotp += g[i] * y[i];
  for (std::size_t i = 0; i < n; ++i) dx[i] += y[i] * (g[i] - dotp);
}

}  // namespace

Tensor softmax(const Tensor& x) {
  require_finite("softmax", x);
  const std::size_t n = x.size();
  std::vector<double> out(n);
  softmax_inplace(x.data().data(), out.data(), n);
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), {x}, [xn, n](Node& self) {
    softmax_adjoint(self.value.data(), self.grad.data(), xn->grad.data(), n);
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2("softmax_rows", x);
  require_finite("softmax_rows", x);
  const std::size_t rows = x.rows(), n = x.cols();
  std::vector<double> out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) softmax_inplace(x.data().data() + r * n, out.data() + r * n, n);
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), {x}, [xn, rows, n](Node& self) {
    for (std::size_t r = 0; r < rows; ++r) {
      softmax_adjoint(self.value.data() + r * n, self.grad.data() + r * n, xn->grad.data() + r * n, n);
    }
  });
}

Tensor cross_entropy_binary(const Tensor& logits, int label) {
  if (logits.size() != 2) {
    throw DimensionError("cross_entropy_binary: expected 2 logits, got " + shape_string(logits.shape()));
  }
  const int labels[1] = {label};
  return cross_entropy_rows(reshape(logits, {1, 2}), labels);
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> labels) {
  require_rank2("cross_entropy_rows", logits);
  require_finite("cross_entropy_rows", logits);
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy_rows: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  std::vector<double> probs(rows * classes);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw UsageError("cross_entropy_rows: label " + std::to_string(y) + " out of range");
    }
    const double* row = logits.data().data() + r * classes;
    double mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double log_z = mx + std::log(z);
    total += log_z - row[y];
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - log_z);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  NodePtr ln = logits.node();
  return make_result({1}, {total / static_cast<double>(rows)}, {logits},
                     [ln, probs = std::move(probs), ys = std::move(ys), rows, classes](Node& self) {
                       const double g = self.grad[0] / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < classes; ++c) {
                           const double target = static_cast<std::size_t>(ys[r]) == c ? 1.0 : 0.0;
                           ln->grad[r * classes + c] += g * (probs[r * classes + c] - target);
                         }
                       }
                     });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_rank2("row_dot", a);
  require_same_shape("row_dot", a, b);
  const std::size_t rows = a.rows(), n = a.cols();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = kernels::dot(n, a.data().data() + r * n, b.data().data() + r * n);
  }
  NodePtr an = a.node(), bn = b.node();
  return make_result({rows}, std::move(out), {a, b}, [an, bn, rows, n](Node& self) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double g = self.grad[r];
      for (std::size_t j = 0; j < n; ++j) {
        if (an->requires_grad) an->grad[r * n + j] += g * bn->value[r * n + j];
        if (bn->requires_grad) bn->grad[r * n + j] += g * an->value[r * n + j];
      }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  NodePtr an = a.node();
  return make_result(std::move(shape), std::move(out), {a}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2("concat_cols", a);
  require_rank2("concat_cols", b);
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const std::size_t rows = a.rows(), na = a.cols(), nb = b.cols(), n = na + nb;
  std::vector<double> out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * na, na, out.data() + r * n);
    std::copy_n(b.data().data() + r * nb, nb, out.data() + r * n + na);
  }
  NodePtr an = a.node(), bn = b.node();
  return make_result({rows, n}, std::move(out), {a, b}, [an, bn, rows, na, nb, n](Node& self) {
    for (std::size_t r = 0; r < rows; ++r) {
      if (an->requires_grad) {
        for (std::size_t j = 0; j < na; ++j) an->grad[r * na + j] += self.grad[r * n + j];
      }
      if (bn->requires_grad) {
        for (std::size_t j = 0; j < nb; ++j) bn->grad[r * nb + j] += self.grad[r * n + na + j];
      }
    }
  });
}

Tensor graph_propagate(const Tensor& a_hat, const Tensor& z, std::size_t nodes) {
  require_rank2("graph_propagate", a_hat);
  require_rank2("graph_propagate", z);
  if (a_hat.rows() != nodes || a_hat.cols() != nodes) {
    throw DimensionError("graph_propagate: adjacency " + shape_string(a_hat.shape()) + " is not " +
                         std::to_string(nodes) + "x" + std::to_string(nodes));
  }
  if (z.rows() % nodes != 0) {
    throw DimensionError("graph_propagate: " + std::to_string(z.rows()) + " rows is not a multiple of " +
                         std::to_string(nodes) + " nodes");
  }
  const std::size_t blocks = z.rows() / nodes, features = z.cols();
  std::vector<double> out(z.size(), 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t offset = b * nodes * features;
    kernels::gemm_nn(nodes, nodes, features, a_hat.data().data(), z.data().data() + offset, out.data() + offset);
  }
  std::vector<double> adj(a_hat.data().begin(), a_hat.data().end());
  NodePtr zn = z.node();
  return make_result(z.shape(), std::move(out), {z},
                     [zn, adj = std::move(adj), blocks, nodes, features](Node& self) {
                       for (std::size_t b = 0; b < blocks; ++b) {
                         const std::size_t offset = b * nodes * features;
                         kernels::gemm_tn(nodes, nodes, features, adj.data(), self.grad.data() + offset,
                                          zn->grad.data() + offset);
                       }
                     });
}

Tensor cosine_embedding_loss(const Tensor& similarity, std::span<const int> labels, double margin) {
  const std::size_t n = similarity.size();
  if (labels.size() != n) {
    throw DimensionError("cosine_embedding_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " similarities");
  }
  std::vector<double> slope(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = similarity.data()[i];
    if (labels[i] == 1) {
      total += 1.0 - s;
      slope[i] = -1.0;
    } else if (labels[i] == -1) {
      note_branch(s + margin > 0.0);
      if (s + margin > 0.0) {
        total += s + margin;
        slope[i] = 1.0;
      }
    } else {
      throw UsageError("cosine_embedding_loss: label must be +1 or -1, got " + std::to_string(labels[i]));
    }
  }
  NodePtr sn = similarity.node();
  return make_result({1}, {total / static_cast<double>(n)}, {similarity},
                     [sn, slope = std::move(slope), n](Node& self) {
                       const double g = self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) sn->grad[i] += g * slope[i];
                     });
}

}  // namespace ctxrr
