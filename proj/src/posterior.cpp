#include "ebmnm/posterior.hpp"

#include "ebmnm/linalg.hpp"
#include "ebmnm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ebmnm {

namespace {

// Shrinkage operator A = U (U+V)^{-1}; then b = A x and B = A V.
Matrix shrinkage(const Matrix& U, const Matrix& V) {
  const Matrix L = cholesky_with_jitter(U + V);
  const auto Lt = L.triangularView<Eigen::Lower>();
  return Lt.transpose().solve(Lt.solve(U)).transpose();
}

struct SignMass {
  double nonneg = 0.0;
  double nonpos = 0.0;

  void add(double w, double mean, double var) {
    if (w == 0.0) return;
    if (var > 0.0) {
      const double sd = std::sqrt(var);
      nonneg += w * normal_cdf(mean / sd);
      nonpos += w * normal_cdf(-mean / sd);
    } else if (mean > 0.0) {
      nonneg += w;
    } else if (mean < 0.0) {
      nonpos += w;
    } else {
      nonneg += w;
      nonpos += w;
    }
  }

  double lfsr() const { return std::clamp(std::min(nonneg, nonpos), 0.0, 1.0); }
};

void check_dims(const Dataset& d, const MixturePrior& m) {
  if (m.dim() != d.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "prior has dimension " + std::to_string(m.dim()) +
                                                  " but the dataset has " + std::to_string(d.dim()));
  }
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

PosteriorMixture posterior_mixture(const Dataset& d, const MixturePrior& m, Eigen::Index j) {
  check_dims(d, m);
  if (j < 0 || j >= d.n()) throw Error(ErrorKind::DimensionMismatch, "observation index out of range");
  const Dataset one = Dataset(Matrix(d.row(j).transpose()), SharedNoise{d.noise(j)});
  PosteriorMixture pm;
  pm.weights = responsibilities(one, m).row(0).transpose();
  for (Eigen::Index k = 0; k < m.K(); ++k) {
    const Matrix A = shrinkage(m.U(k), d.noise(j));
    pm.means.push_back(A * d.row(j));
    Matrix B = symmetrize(A * d.noise(j));
    B.diagonal() = B.diagonal().cwiseMax(0.0);
    pm.covs.push_back(std::move(B));
  }
  return pm;
}

double lfsr(const PosteriorMixture& pm, Eigen::Index r) {
  SignMass mass;
  for (Eigen::Index k = 0; k < pm.weights.size(); ++k) {
    mass.add(pm.weights(k), pm.means[k](r), std::max(pm.covs[k](r, r), 0.0));
  }
  return mass.lfsr();
}

PosteriorSummary summarize(const Dataset& d, const MixturePrior& m, int threads) {
  check_dims(d, m);
  const Matrix w = responsibilities(d, m, threads);
  const auto n = d.n();
  const auto R = d.dim();
  const auto K = m.K();

  std::vector<Matrix> A_shared;
  std::vector<Vector> Bdiag_shared;
  if (d.shared_noise()) {
    for (Eigen::Index k = 0; k < K; ++k) {
      A_shared.push_back(shrinkage(m.U(k), d.noise(0)));
      Bdiag_shared.push_back((A_shared.back() * d.noise(0)).diagonal().cwiseMax(0.0));
    }
  }

  PosteriorSummary out{Matrix(n, R), Matrix(n, R), Matrix(n, R)};
  parallel_for(static_cast<int>(n), threads, [&](int j) {
    std::vector<Vector> b(K);
    std::vector<Vector> var(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (d.shared_noise()) {
        b[k] = A_shared[k] * d.row(j);
        var[k] = Bdiag_shared[k];
      } else {
        const Matrix A = shrinkage(m.U(k), d.noise(j));
        b[k] = A * d.row(j);
        var[k] = (A * d.noise(j)).diagonal().cwiseMax(0.0);
      }
    }
    for (Eigen::Index r = 0; r < R; ++r) {
      double mean = 0.0, second = 0.0;
      SignMass mass;
      for (Eigen::Index k = 0; k < K; ++k) {
        const double wk = w(j, k);
        mean += wk * b[k](r);
        second += wk * (var[k](r) + b[k](r) * b[k](r));
        mass.add(wk, b[k](r), var[k](r));
      }
      out.mean(j, r) = mean;
      out.sd(j, r) = std::sqrt(std::max(second - mean * mean, 0.0));
      out.lfsr(j, r) = mass.lfsr();
    }
  });
  return out;
}

}  // namespace ebmnm
