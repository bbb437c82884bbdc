// Single-component covariance updates: the inner
//
//   argmax_U  phi(U; w) - rho(U / s),   phi(U; w) = sum_j w_j log N(x_j; 0, U + V_j)
//
// step of the mixture EM, plus the closed-form scale-factor update.
//
// Penalties are measured in the noise frame: for shared noise V = L L^T the
// penalised matrix is L^{-1} U L^{-T} / s, so the penalty pulls U/s towards V.
// With V = I this is the plain rho(U / s).
#pragma once

#include "ebmnm/core.hpp"
#include "ebmnm/linalg.hpp"

namespace ebmnm {

/// One weighted single-component subproblem.
struct WeightedProblem {
  const Dataset& data;
  const Vector& weights;  // w_j in [0, 1]
  double scale = 1.0;     // s
  Penalty penalty;
  Matrix current;  // current U; returned unchanged when sum(w) < 1e-12
};

/// Components with total weight below this are left untouched.
inline constexpr double kDeadWeight = 1e-12;

/// phi(U; w).
double weighted_objective(const Dataset& d, const Vector& w, const Matrix& U);

/// phi(U; w) - rho(U/s), with rho measured in the noise frame.
double penalized_objective(const WeightedProblem& p, const Matrix& U);

/// Exact TED solve in the whitened frame. Unpenalised it truncates the
/// eigenvalues of S~ - I at zero, S~ being the whitened weighted sample
/// covariance; penalised it solves a scalar problem per eigenvalue of S~.
/// `rank_one` keeps only the leading eigen-direction (unpenalised only).
Matrix ted_update(const WeightedProblem& p, bool rank_one = false);

/// One ED (EM) step from p.current, optionally with the IW penalty:
///   U_new = (sum_j w_j (B_j + b_j b_j^T) + lambda s P) / (sum_j w_j + lambda)
/// with P = V for shared noise and P = I otherwise.
Matrix ed_update(const WeightedProblem& p);

/// One FA (EM) step for the rank-1 factor u with U = u u^T.
Vector fa_update(const WeightedProblem& p, const Vector& current_u);

/// c >= 0 maximising phi(c * base; w).
double scaled_update(const WeightedProblem& p, const Matrix& base);

/// argmin_{s>0} rho(U/s) in closed form, U given in the penalty frame.
/// IW: R / sum(1/e_r); NN: sqrt(sum(e_r) / sum(1/e_r)); None: 1.
/// Throws SingularMatrix if a penalty is active and some e_r <= 0.
double scale_factor_update(const Matrix& U, const Penalty& penalty);

/// Per-eigenvalue objective of the penalised TED solve:
///   g(e) = -(W/2) [log(1+e) + d/(1+e)] - rho_1(e/s).
double eigenvalue_objective(double e, double d, double W, const Penalty& penalty, double s);

/// Global maximiser of eigenvalue_objective over e > 0 (e >= 0 unpenalised).
double solve_penalized_eigenvalue(double d, double W, const Penalty& penalty, double s);

/// u with U ~= u u^T from the leading eigenpair.
Vector rank_one_factor(const Matrix& U);

}  // namespace ebmnm
