#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

#include "atsn/common.hpp"

namespace atsn {

// Dense row-major matrix. Biases are stored as 1xN matrices so that every
// parameter moves through the same tensor plumbing (init, Adam, serialization,
// finite differences).
template <class S>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<S> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, S(0)) {}

  S* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const S* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

  S& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  S at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return a.size(); }
  void zero() { std::fill(a.begin(), a.end(), S(0)); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// Named view of one parameter tensor; shared by the optimizer, the
// serializer and the gradient checks so they all agree on order and shape.
template <class S>
struct TensorRef {
  std::string name;
  Mat<S>* mat;
};

namespace detail {

template <class S>
inline void ensure_shape(Mat<S>& c, int rows, int cols, bool accumulate) {
  if (c.rows != rows || c.cols != cols) {
    c = Mat<S>(rows, cols);
  } else if (!accumulate) {
    c.zero();
  }
}

}  // namespace detail

namespace detail {

// Below this many multiply-adds a matmul runs serially; spawning threads
// for tiny products costs more than it saves.
inline constexpr std::size_t kParallelWorkThreshold = std::size_t(1) << 21;

inline void dispatch_rows(std::size_t rows, std::size_t work,
                          const std::function<void(std::size_t, std::size_t)>& kernel) {
  if (work < kParallelWorkThreshold) {
    kernel(0, rows);
  } else {
    parallel_for(rows, kernel);
  }
}

}  // namespace detail

// C = A * B (or C += A * B). Parallel over rows of C; each output element
// keeps its serial k-order so results are identical for any thread count.
template <class S>
void matmul(const Mat<S>& A, const Mat<S>& B, Mat<S>& C, bool accumulate = false) {
  assert(A.cols == B.rows);
  detail::ensure_shape(C, A.rows, B.cols, accumulate);
  const int n = A.cols;
  const int m = B.cols;
  detail::dispatch_rows(
      static_cast<std::size_t>(A.rows),
      static_cast<std::size_t>(A.rows) * n * m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          S* crow = C.row(static_cast<int>(i));
          const S* arow = A.row(static_cast<int>(i));
          for (int k = 0; k < n; ++k) {
            const S aik = arow[k];
            const S* brow = B.row(k);
            for (int j = 0; j < m; ++j) crow[j] += aik * brow[j];
          }
        }
      });
}

// C = A^T * B (or +=). A is k x m, B is k x n, C is m x n. The k loop is
// outermost per output block, so per-element accumulation order is fixed.
template <class S>
void matmul_tn(const Mat<S>& A, const Mat<S>& B, Mat<S>& C, bool accumulate = false) {
  assert(A.rows == B.rows);
  detail::ensure_shape(C, A.cols, B.cols, accumulate);
  const int kdim = A.rows;
  const int m = A.cols;
  const int n = B.cols;
  detail::dispatch_rows(
      static_cast<std::size_t>(m), static_cast<std::size_t>(kdim) * m * n,
      [&](std::size_t lo, std::size_t hi) {
        for (int k = 0; k < kdim; ++k) {
          const S* arow = A.row(k);
          const S* brow = B.row(k);
          for (std::size_t i = lo; i < hi; ++i) {
            const S aki = arow[i];
            S* crow = C.row(static_cast<int>(i));
            for (int j = 0; j < n; ++j) crow[j] += aki * brow[j];
          }
        }
      });
}

template <class S>
void transpose(const Mat<S>& A, Mat<S>& At) {
  At = Mat<S>(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i) {
    const S* arow = A.row(i);
    for (int j = 0; j < A.cols; ++j) At.at(j, i) = arow[j];
  }
}

// C = A * B^T (or +=), via an explicit transpose so the inner loops stay
// contiguous and vectorizable without reassociation.
template <class S>
void matmul_nt(const Mat<S>& A, const Mat<S>& B, Mat<S>& C, bool accumulate = false) {
  Mat<S> bt;
  transpose(B, bt);
  matmul(A, bt, C, accumulate);
}

// Adds a 1xN bias row to every row of X.
template <class S>
void add_bias(Mat<S>& X, const Mat<S>& bias) {
  assert(bias.rows == 1 && bias.cols == X.cols);
  const S* b = bias.row(0);
  for (int i = 0; i < X.rows; ++i) {
    S* xrow = X.row(i);
    for (int j = 0; j < X.cols; ++j) xrow[j] += b[j];
  }
}

// Column sums of dY into a 1xN gradient row (or +=).
template <class S>
void colsum(const Mat<S>& dY, Mat<S>& db, bool accumulate = false) {
  detail::ensure_shape(db, 1, dY.cols, accumulate);
  S* out = db.row(0);
  for (int i = 0; i < dY.rows; ++i) {
    const S* r = dY.row(i);
    for (int j = 0; j < dY.cols; ++j) out[j] += r[j];
  }
}

template <class S>
void relu_inplace(Mat<S>& X) {
  for (auto& x : X.a) x = x > S(0) ? x : S(0);
}

template <class S>
S sigmoid(S z) {
  if (z >= S(0)) {
    return S(1) / (S(1) + std::exp(-z));
  }
  const S e = std::exp(z);
  return e / (S(1) + e);
}

// Binary cross-entropy from the logit; stable for large |z|.
template <class S>
S bce_from_logit(S z, int label) {
  const S zy = label ? z : S(0);
  const S m = z > S(0) ? z : S(0);
  return m - zy + std::log(S(1) + std::exp(-std::abs(z)));
}

}  // namespace atsn
