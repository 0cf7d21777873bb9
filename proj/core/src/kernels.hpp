#pragma once

// Dense row-major kernels shared by the autograd ops and the tape-free
// inference paths. All loops run in a fixed order so results are bitwise
// reproducible for identical inputs.

#include <cstddef>
#include <vector>

namespace ctxrr::kernels {

// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + (i + 0) * k;
    const double* a1 = a + (i + 1) * k;
    const double* a2 = a + (i + 2) * k;
    const double* a3 = a + (i + 3) * k;
    double* c0 = c + (i + 0) * n;
    double* c1 = c + (i + 1) * n;
    double* c2 = c + (i + 2) * n;
    double* c3 = c + (i + 3) * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += x0 * bv;
        c1[j] += x1 * bv;
        c2[j] += x2 * bv;
        c3[j] += x3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += x * brow[j];
    }
  }
}

// out[cols x rows] = transpose(in[rows x cols])
inline void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = r0 + kBlock < rows ? r0 + kBlock : rows;
      const std::size_t c1 = c0 + kBlock < cols ? c0 + kBlock : cols;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
      }
    }
  }
}

// C[m x n] += A[m x k] * transpose(B[n x k])
inline void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c) {
  std::vector<double> bt(k * n);
  transpose(n, k, b, bt.data());
  gemm_nn(m, k, n, a, bt.data(), c);
}

// C[m x n] += transpose(A[k x m]) * B[k x n]
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                    double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = arow[i];
      if (x == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += x * brow[j];
    }
  }
}

inline double dot(std::size_t n, const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ctxrr::kernels
