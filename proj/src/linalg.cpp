#include "ebmnm/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace ebmnm {

EigenSystem eigen_desc(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(A));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "eigendecomposition failed");
  }
  // Eigen returns ascending order.
  EigenSystem out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

double relative_asymmetry(const Matrix& A) {
  const double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (A - A.transpose()).cwiseAbs().maxCoeff() / scale;
}

std::optional<Matrix> clamp_psd(const Matrix& A, double rel_tol) {
  const Matrix S = symmetrize(A);
  EigenSystem es = eigen_desc(S);
  const double radius = es.values.cwiseAbs().maxCoeff();
  const double floor = -rel_tol * radius;
  if (es.values.minCoeff() < floor) return std::nullopt;
  if (es.values.minCoeff() >= 0.0) return S;
  es.values = es.values.cwiseMax(0.0);
  return symmetrize(es.vectors * es.values.asDiagonal() * es.vectors.transpose());
}

Matrix psd_part(const Matrix& A) {
  EigenSystem es = eigen_desc(A);
  es.values = es.values.cwiseMax(0.0);
  return symmetrize(es.vectors * es.values.asDiagonal() * es.vectors.transpose());
}

std::optional<Matrix> cholesky_lower(const Matrix& A) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix L = llt.matrixL();
  if ((L.diagonal().array() <= 0.0).any() || !L.allFinite()) return std::nullopt;
  return L;
}

Matrix cholesky_with_jitter(const Matrix& A) {
  if (auto L = cholesky_lower(A)) return *std::move(L);
  const auto R = A.rows();
  const double jitter = 1e-10 * A.trace() / static_cast<double>(R);
  if (jitter > 0.0) {
    if (auto L = cholesky_lower(A + jitter * Matrix::Identity(R, R))) return *std::move(L);
  }
  throw Error(ErrorKind::NumericalFailure, "covariance matrix is singular beyond jitter");
}

Vector log_mvn_rows(const Matrix& X, const Matrix& chol) {
  const auto R = chol.rows();
  const Matrix Z = chol.triangularView<Eigen::Lower>().solve(X.transpose());
  const double logdet = 2.0 * chol.diagonal().array().log().sum();
  const double c = -0.5 * (static_cast<double>(R) * kLog2Pi + logdet);
  return (c - 0.5 * Z.colwise().squaredNorm().array()).matrix().transpose();
}

double log_mvn(const Eigen::Ref<const Vector>& x, const Matrix& chol) {
  const auto R = chol.rows();
  const Vector z = chol.triangularView<Eigen::Lower>().solve(x);
  const double logdet = 2.0 * chol.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(R) * kLog2Pi + logdet + z.squaredNorm());
}

Matrix weighted_scatter(const Matrix& X, const Vector& w) {
  const Matrix Xw = X.array().colwise() * w.array();
  return symmetrize(X.transpose() * Xw);
}

double pairwise_sum(const double* data, std::size_t count) {
  if (count <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += data[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

namespace detail {

void run_parallel(int count, int threads, const std::function<void(int)>& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail
}  // namespace ebmnm
