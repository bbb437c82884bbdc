// Small dense linear-algebra helpers used across modules.
#pragma once

#include "ebmnm/core.hpp"

#include <functional>

namespace ebmnm {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

/// Eigen-decomposition with values sorted in descending order.
struct EigenSystem {
  Vector values;
  Matrix vectors;  // columns are orthonormal eigenvectors
};

EigenSystem eigen_desc(const Matrix& A);

inline Matrix symmetrize(const Matrix& A) { return 0.5 * (A + A.transpose()); }

/// max |A - A^T| relative to max |A|; 0 for the zero matrix.
double relative_asymmetry(const Matrix& A);

/// Clamps eigenvalues in [-rel_tol * radius, 0) to zero. Returns nullopt when
/// some eigenvalue is more negative than that.
std::optional<Matrix> clamp_psd(const Matrix& A, double rel_tol = 1e-10);

/// Truncates every negative eigenvalue to zero, i.e. (A)_+.
Matrix psd_part(const Matrix& A);

/// Lower Cholesky factor of a symmetric matrix, or nullopt if it is not
/// numerically positive definite.
std::optional<Matrix> cholesky_lower(const Matrix& A);

/// Cholesky factor of A; on failure retries once with
/// A + 1e-10 * tr(A)/R * I and throws NumericalFailure if that fails too.
Matrix cholesky_with_jitter(const Matrix& A);

/// log N(x; 0, C) for each row of X, given the lower Cholesky factor of C.
Vector log_mvn_rows(const Matrix& X, const Matrix& chol);

double log_mvn(const Eigen::Ref<const Vector>& x, const Matrix& chol);

/// Weighted scatter sum_j w_j x_j x_j^T over the rows of X.
Matrix weighted_scatter(const Matrix& X, const Vector& w);

/// Pairwise (fixed-order) summation; reproducible regardless of threading.
double pairwise_sum(const double* data, std::size_t count);
inline double pairwise_sum(const Vector& v) {
  return pairwise_sum(v.data(), static_cast<std::size_t>(v.size()));
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 means
/// hardware concurrency). Each index is handled by exactly one worker.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn);

namespace detail {
void run_parallel(int count, int threads, const std::function<void(int)>& fn);
}

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (threads == 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  detail::run_parallel(count, threads, std::function<void(int)>(std::forward<Fn>(fn)));
}

}  // namespace ebmnm
