#include "ebmnm/solvers.hpp"

#include "ebmnm/penalty.hpp"

#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/Polynomials>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ebmnm {

namespace {

// Cholesky solve helpers for a lower factor L of C.
Matrix chol_solve(const Matrix& L, const Matrix& B) {
  const auto Lt = L.triangularView<Eigen::Lower>();
  return Lt.transpose().solve(Lt.solve(B));
}

Matrix keep_psd(const Matrix& A) {
  auto clamped = clamp_psd(A, std::numeric_limits<double>::infinity());
  return clamped ? *std::move(clamped) : psd_part(A);
}

// Maximises f over [lo, hi]: coarse scan, then Brent around the best point.
template <class F>
double maximize_bounded(F f, double lo, double hi, int scan = 64) {
  if (!(hi > lo)) return lo;
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= scan; ++i) {
    const double x = lo + (hi - lo) * i / scan;
    const double v = f(x);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  const double a = lo + (hi - lo) * std::max(best - 1, 0) / scan;
  const double b = lo + (hi - lo) * std::min(best + 1, scan) / scan;
  std::uintmax_t max_iter = 200;
  auto res = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, a, b,
                                                   std::numeric_limits<double>::digits, max_iter);
  const double x_scan = lo + (hi - lo) * best / scan;
  return -res.second >= best_val ? res.first : x_scan;
}

}  // namespace

double weighted_objective(const Dataset& d, const Vector& w, const Matrix& U) {
  if (d.shared_noise()) {
    const Matrix L = cholesky_with_jitter(U + d.noise(0));
    const Vector ld = log_mvn_rows(d.x(), L);
    const Vector terms = (w.array() * ld.array()).matrix();
    return pairwise_sum(terms);
  }
  Vector terms(d.n());
  for (Eigen::Index j = 0; j < d.n(); ++j) {
    terms(j) = w(j) == 0.0 ? 0.0 : w(j) * log_mvn(d.row(j), cholesky_with_jitter(U + d.noise(j)));
  }
  return pairwise_sum(terms);
}

double penalized_objective(const WeightedProblem& p, const Matrix& U) {
  const double phi = weighted_objective(p.data, p.weights, U);
  if (!p.penalty.active()) return phi;
  return phi - penalty_value(p.penalty, p.data.to_noise_frame(U), p.scale);
}

// ---------------------------------------------------------------------------
// TED

double eigenvalue_objective(double e, double d, double W, const Penalty& penalty, double s) {
  const double fit = -0.5 * W * (std::log1p(e) + d / (1.0 + e));
  if (!penalty.active()) return fit;
  return fit - penalty_term(penalty, e / s);
}

double solve_penalized_eigenvalue(double d, double W, const Penalty& penalty, double s) {
  if (!penalty.active()) return std::max(d - 1.0, 0.0);
  const double lam = penalty.lambda;
  // Numerator of g'(e) after clearing the positive denominators; its positive
  // real roots are the stationary points. g -> -inf at 0+ and at +inf, so
  // the best stationary point is the global maximiser.
  Vector c;
  if (penalty.kind == PenaltyKind::InverseWishart) {
    // W e^2 (1 + e - d) + lam (1 + e)^2 (e - s)
    c.resize(4);
    c << -lam * s, lam * (1.0 - 2.0 * s), W * (1.0 - d) + lam * (2.0 - s), W + lam;
  } else {
    // 2 W s e^2 (1 + e - d) + lam (e^2 - s^2) (1 + e)^2
    c.resize(5);
    c << -lam * s * s, -2.0 * lam * s * s, 2.0 * W * s * (1.0 - d) + lam * (1.0 - s * s),
        2.0 * W * s + 2.0 * lam, lam;
  }
  auto poly = [&](double e) {
    double v = 0.0;
    for (Eigen::Index i = c.size() - 1; i >= 0; --i) v = v * e + c(i);
    return v;
  };
  auto dpoly = [&](double e) {
    double v = 0.0;
    for (Eigen::Index i = c.size() - 1; i >= 1; --i) v = v * e + static_cast<double>(i) * c(i);
    return v;
  };
  auto g = [&](double e) { return eigenvalue_objective(e, d, W, penalty, s); };

  // Stationary points lie in [min(d-1, s), max(d-1, s)]: outside it both
  // terms of the numerator share a sign.
  const double lo = std::max(std::min(d - 1.0, s), 0.0);
  const double hi = std::max(d - 1.0, s);

  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(c);
  double best_e = std::numeric_limits<double>::quiet_NaN();
  double best_g = -std::numeric_limits<double>::infinity();
  for (const auto& z : solver.roots()) {
    double e = z.real();
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(e))) continue;
    if (!(e > 0.0)) continue;
    for (int it = 0; it < 3; ++it) {
      const double dp = dpoly(e);
      if (dp == 0.0) break;
      const double next = e - poly(e) / dp;
      if (!(next > 0.0)) break;
      e = next;
    }
    const double v = g(e);
    if (v > best_g) {
      best_g = v;
      best_e = e;
    }
  }
  if (std::isnan(best_e)) {
    const double a = lo > 0.0 ? lo : std::min(1e-12, hi);
    best_e = maximize_bounded(g, a, hi);
  }
  return best_e;
}

Matrix ted_update(const WeightedProblem& p, bool rank_one) {
  const Dataset& d = p.data;
  const Matrix& Xw = d.whitened_x();  // throws UnsupportedNoise
  if (rank_one && p.penalty.active()) {
    throw Error(ErrorKind::UnsupportedPenalty, "penalised rank-1 TED is not supported");
  }
  const double W = pairwise_sum(p.weights);
  if (W < kDeadWeight) return p.current;

  const Matrix S = weighted_scatter(Xw, p.weights) / W;
  const EigenSystem es = eigen_desc(S);
  Vector e(es.values.size());
  for (Eigen::Index r = 0; r < e.size(); ++r) {
    e(r) = solve_penalized_eigenvalue(es.values(r), W, p.penalty, p.scale);
  }
  if (rank_one && e.size() > 1) e.tail(e.size() - 1).setZero();
  const Matrix U_white = es.vectors * e.asDiagonal() * es.vectors.transpose();
  return d.from_noise_frame(symmetrize(U_white));
}

// ---------------------------------------------------------------------------
// ED

Matrix ed_update(const WeightedProblem& p) {
  if (p.penalty.kind == PenaltyKind::NuclearNorm) {
    throw Error(ErrorKind::UnsupportedPenalty, "ED does not support the nuclear-norm penalty");
  }
  const Dataset& d = p.data;
  const double W = pairwise_sum(p.weights);
  if (W < kDeadWeight) return p.current;

  const Matrix& U = p.current;
  const auto R = d.dim();
  Matrix M = Matrix::Zero(R, R);
  if (d.shared_noise()) {
    const Matrix& V = d.noise(0);
    const Matrix L = cholesky_with_jitter(U + V);
    const Matrix A = chol_solve(L, U).transpose();  // U (U+V)^{-1}
    const Matrix B = symmetrize(A * V);             // U - U (U+V)^{-1} U
    M = W * B + A * weighted_scatter(d.x(), p.weights) * A.transpose();
  } else {
    for (Eigen::Index j = 0; j < d.n(); ++j) {
      const double wj = p.weights(j);
      if (wj == 0.0) continue;
      const Matrix& Vj = d.noise(j);
      const Matrix L = cholesky_with_jitter(U + Vj);
      const Matrix A = chol_solve(L, U).transpose();
      const Vector b = A * d.row(j);
      M.noalias() += wj * (symmetrize(A * Vj) + b * b.transpose());
    }
  }
  if (p.penalty.kind == PenaltyKind::InverseWishart) {
    const double lam = p.penalty.lambda;
    const Matrix target = d.shared_noise() ? d.noise(0) : Matrix::Identity(R, R);
    M = (M + lam * p.scale * target) / (W + lam);
  } else {
    M /= W;
  }
  if (!M.allFinite()) throw Error(ErrorKind::NumericalFailure, "ED update produced non-finite values");
  return keep_psd(symmetrize(M));
}

// ---------------------------------------------------------------------------
// FA

Vector fa_update(const WeightedProblem& p, const Vector& current_u) {
  const Dataset& d = p.data;
  const double W = pairwise_sum(p.weights);
  if (W < kDeadWeight) return current_u;
  if (!current_u.allFinite()) throw Error(ErrorKind::NumericalFailure, "FA factor is not finite");

  const auto R = d.dim();
  if (d.shared_noise()) {
    // With a shared V the system matrix is (sum w (mu^2 + sigma^2)) V^{-1},
    // so the update reduces to a weighted average of the x_j.
    const Matrix& L = d.noise_chol();
    const Vector y = chol_solve(L, current_u);  // V^{-1} u
    const double sigma2 = 1.0 / (1.0 + current_u.dot(y));
    const Vector mu = sigma2 * (d.x() * y);
    const Vector denom_terms = (p.weights.array() * (mu.array().square() + sigma2)).matrix();
    const double denom = pairwise_sum(denom_terms);
    const Vector wmu = (p.weights.array() * mu.array()).matrix();
    return d.x().transpose() * wmu / denom;
  }
  Matrix A = Matrix::Zero(R, R);
  Vector rhs = Vector::Zero(R);
  for (Eigen::Index j = 0; j < d.n(); ++j) {
    const double wj = p.weights(j);
    if (wj == 0.0) continue;
    const Matrix L = cholesky_with_jitter(d.noise(j));
    const Matrix Vinv = chol_solve(L, Matrix::Identity(R, R));
    const Vector y = Vinv * current_u;
    const double sigma2 = 1.0 / (1.0 + current_u.dot(y));
    const double mu = sigma2 * y.dot(d.row(j));
    A.noalias() += wj * (mu * mu + sigma2) * Vinv;
    rhs.noalias() += wj * mu * (Vinv * d.row(j));
  }
  auto L = cholesky_lower(symmetrize(A));
  if (!L) throw Error(ErrorKind::NumericalFailure, "FA system matrix is singular");
  return chol_solve(*L, rhs);
}

// ---------------------------------------------------------------------------
// Scaling constraint

double scaled_update(const WeightedProblem& p, const Matrix& base) {
  const Dataset& d = p.data;
  const double W = pairwise_sum(p.weights);
  const double base_sq = base.squaredNorm();
  const double current_c =
      base_sq > 0.0 ? std::max((p.current.array() * base.array()).sum() / base_sq, 0.0) : 0.0;
  if (W < kDeadWeight) return current_c;

  if (d.shared_noise()) {
    // In the whitened eigenbasis of the base the objective separates:
    //   phi(c) = const - 1/2 sum_r [W log(1 + c a_r) + t_r / (1 + c a_r)].
    const EigenSystem es = eigen_desc(d.to_noise_frame(base));
    const Matrix S = weighted_scatter(d.whitened_x(), p.weights);
    const Vector t = (es.vectors.transpose() * S * es.vectors).diagonal();
    const Vector a = es.values.cwiseMax(0.0);
    auto phi = [&](double c) {
      double v = 0.0;
      for (Eigen::Index r = 0; r < a.size(); ++r) {
        const double q = 1.0 + c * a(r);
        v -= 0.5 * (W * std::log(q) + t(r) / q);
      }
      return v;
    };
    auto dphi = [&](double c) {
      double v = 0.0;
      for (Eigen::Index r = 0; r < a.size(); ++r) {
        const double q = 1.0 + c * a(r);
        v -= 0.5 * a(r) * (W * q - t(r)) / (q * q);
      }
      return v;
    };
    // phi' < 0 once c a_r > t_r / W - 1 for every r.
    const double a_tol = 1e-12 * std::max(a.maxCoeff(), 0.0);
    double c_max = 0.0;
    for (Eigen::Index r = 0; r < a.size(); ++r) {
      if (a(r) > a_tol) c_max = std::max(c_max, (t(r) / W - 1.0) / a(r));
    }
    if (!(c_max > 0.0)) return 0.0;
    double c = maximize_bounded(phi, 0.0, c_max, 128);
    // Polish on the derivative when the optimum is interior.
    const double step = c_max / 128.0;
    double lo = std::max(c - step, 0.0), hi = std::min(c + step, c_max);
    if (dphi(lo) > 0.0 && dphi(hi) < 0.0) {
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dphi(mid) > 0.0 ? lo : hi) = mid;
      }
      const double polished = 0.5 * (lo + hi);
      if (phi(polished) >= phi(c)) c = polished;
    }
    return phi(c) >= phi(current_c) ? c : current_c;
  }

  auto phi = [&](double c) { return weighted_objective(d, p.weights, c * base); };
  double c_hi = 1.0;
  double prev = phi(c_hi);
  for (int it = 0; it < 60; ++it) {
    const double next = phi(2.0 * c_hi);
    if (next <= prev) break;
    prev = next;
    c_hi *= 2.0;
  }
  c_hi *= 2.0;
  const double c = maximize_bounded(phi, 0.0, c_hi, 64);
  return phi(c) >= phi(current_c) ? c : current_c;
}

// ---------------------------------------------------------------------------
// Scale factors

double scale_factor_update(const Matrix& U, const Penalty& penalty) {
  if (!penalty.active()) return 1.0;
  const Vector e = eigen_desc(U).values;
  if ((e.array() <= 0.0).any()) {
    throw Error(ErrorKind::SingularMatrix, "penalty is undefined for a singular covariance");
  }
  const double inv_sum = e.cwiseInverse().sum();
  if (penalty.kind == PenaltyKind::InverseWishart) {
    return static_cast<double>(e.size()) / inv_sum;
  }
  return std::sqrt(e.sum() / inv_sum);
}

Vector rank_one_factor(const Matrix& U) {
  const EigenSystem es = eigen_desc(U);
  return std::sqrt(std::max(es.values(0), 0.0)) * es.vectors.col(0);
}

}  // namespace ebmnm
