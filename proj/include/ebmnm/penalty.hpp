// Eigenvalue-separable covariance penalties rho(U / s).
//
//   IW:  rho(A) = (lambda/2) * sum_r (log a_r + 1/a_r)
//   NN:  rho(A) = (lambda/2) * sum_r (a_r/2 + 1/(2 a_r))
//
// with a_r the eigenvalues of A. Both are minimised at A = I.
#pragma once

#include "ebmnm/core.hpp"

namespace ebmnm {

/// Contribution of a single eigenvalue `a` of A = U/s.
double penalty_term(const Penalty& p, double a);

/// Eigenvalues are floored at 1e-8 * (spectral radius + 1) before any
/// penalty evaluation, keeping rho finite on singular U.
Vector floor_eigenvalues(const Vector& values);

/// rho(U/s) for U given in the penalty frame (see Dataset::to_noise_frame).
/// Zero when the penalty is inactive.
double penalty_value(const Penalty& p, const Matrix& U, double s);

}  // namespace ebmnm
