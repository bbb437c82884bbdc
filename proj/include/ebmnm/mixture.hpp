// Mixture EM: responsibilities, weight updates, per-component covariance
// and scale updates, warm starts and convergence control.
#pragma once

#include "ebmnm/core.hpp"

namespace ebmnm {

/// n x K matrix of w_jk; rows sum to one.
using ResponsibilityMatrix = Matrix;

struct FitResult {
  MixturePrior prior;
  FitTrace trace;
  FitConfig config;
};

/// n x K matrix of log N(x_j; 0, U_k + V_j).
Matrix component_log_densities(const Dataset& d, const std::vector<Matrix>& U, int threads = 1);

/// Per-observation log p(x_j | pi, U) via log-sum-exp.
Vector observation_log_likelihoods(const Dataset& d, const MixturePrior& m, int threads = 1);

/// sum_j log sum_k pi_k N(x_j; 0, U_k + V_j).
double log_likelihood(const Dataset& d, const MixturePrior& m, int threads = 1);

/// log_likelihood minus sum_k rho(U_k / s_k) over unconstrained components.
double penalized_log_likelihood(const Dataset& d, const MixturePrior& m, const Penalty& penalty,
                                int threads = 1);

ResponsibilityMatrix responsibilities(const Dataset& d, const MixturePrior& m, int threads = 1);

/// Runs the mixture EM from `init`. Throws InvalidConfig for unsupported
/// combinations and propagates solver failures.
FitResult fit(const Dataset& d, const MixturePrior& init, const FitConfig& cfg);

/// pi_k = 1/K, s_k = 1. Free: A A^T + 0.1 I with A standard normal; Rank1:
/// u u^T with u standard normal; Scaled: the base itself. An empty
/// `constraints` means K free components.
MixturePrior random_init(int R, int K, std::uint64_t seed,
                         std::vector<ComponentConstraint> constraints = {});

}  // namespace ebmnm
