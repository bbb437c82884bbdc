// Posterior inference under a fitted prior. Given x_j the posterior of
// theta_j is a K-component normal mixture with weights w_jk and moments
//   b_jk = U_k (U_k + V_j)^{-1} x_j,   B_jk = U_k - U_k (U_k + V_j)^{-1} U_k.
#pragma once

#include "ebmnm/core.hpp"

namespace ebmnm {

struct PosteriorMixture {
  Vector weights;              // K
  std::vector<Vector> means;   // b_k
  std::vector<Matrix> covs;    // B_k
};

struct PosteriorSummary {
  Matrix mean;  // n x R
  Matrix sd;    // n x R
  Matrix lfsr;  // n x R
};

PosteriorMixture posterior_mixture(const Dataset& d, const MixturePrior& m, Eigen::Index j);

/// min{P(theta_r >= 0), P(theta_r <= 0)} under the mixture's r-th marginal.
/// A component that is a point mass at zero in coordinate r counts towards
/// both probabilities, so a pure point mass at zero gives 1.
double lfsr(const PosteriorMixture& pm, Eigen::Index r);

PosteriorSummary summarize(const Dataset& d, const MixturePrior& m, int threads = 1);

/// Standard normal CDF via erfc.
double normal_cdf(double z);

}  // namespace ebmnm
