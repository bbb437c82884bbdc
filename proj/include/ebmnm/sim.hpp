// Simulation scenarios with known generating priors, and the evaluation
// metrics used to score fitted priors against them.
#pragma once

#include "ebmnm/core.hpp"
#include "ebmnm/posterior.hpp"

#include <optional>
#include <random>

namespace ebmnm {

enum class ScenarioKind { Hybrid, RankOne };
const char* to_string(ScenarioKind kind);

struct Scenario {
  ScenarioKind kind = ScenarioKind::Hybrid;
  int n = 1000;
  int nTest = 0;
  int R = 5;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  MixturePrior prior;
  Matrix theta;       // n x R
  Matrix thetaTest;   // nTest x R
  Matrix xTest;       // nTest x R
  std::vector<int> labels;      // generating component of each theta_j
  std::vector<int> labelsTest;
};

struct SimulatedData {
  Dataset train;
  std::optional<Dataset> test;  // present when nTest > 0
  GroundTruth truth;
};

/// Hybrid: K = 10 uniform; U_1 = 5 e_1 e_1^T, U_2 = 5 11^T, U_3 = 5 I and
/// seven inverse-Wishart(5 I, R + 2) draws. RankOne (R >= 5): 5 e_k e_k^T for
/// k = 1..5 and u_k u_k^T with u_k ~ N(0, I) for k = 6..10. Noise is V = I.
/// Bit-identical for a fixed seed.
SimulatedData generate(const Scenario& sc);

/// Generating prior only (consumes the same draws generate() starts with).
MixturePrior scenario_prior(ScenarioKind kind, int R, std::mt19937_64& rng);

/// Draw from the inverse-Wishart distribution with scale matrix `scale` and
/// `dof` degrees of freedom (mean scale / (dof - R - 1)), via the Bartlett
/// decomposition of the corresponding Wishart draw.
Matrix sample_inverse_wishart(const Matrix& scale, double dof, std::mt19937_64& rng);

/// (1/n) sum_j log[p(x_j | truth) / p(x_j | fitted)] over the test set.
double kl_divergence(const Dataset& test, const MixturePrior& truth, const MixturePrior& fitted,
                     int threads = 1);

struct FsrResult {
  double fsr = 0.0;
  long count = 0;
};

/// Among (j, r) with lfsr < threshold, the fraction whose posterior-mean sign
/// disagrees with theta (theta = 0 always counts as wrong). (0, 0) when
/// nothing is significant.
FsrResult empirical_fsr(const PosteriorSummary& summary, const Matrix& theta, double threshold);

struct CurvePoint {
  double threshold = 0.0;
  double power = 0.0;
  double fsr = 0.0;
  long significant = 0;
};

/// Power = correct-sign discoveries / #{theta_jr != 0}; fsr as empirical_fsr.
std::vector<CurvePoint> power_fsr_curve(const PosteriorSummary& summary, const Matrix& theta,
                                        const std::vector<double>& thresholds);

/// 41 log-spaced thresholds from 1e-6 to 0.5.
std::vector<double> default_thresholds();

struct EvalReport {
  double klDivergence = 0.0;
  double threshold = 0.05;
  double empiricalFsr = 0.0;
  long significantCount = 0;
  std::vector<CurvePoint> powerFsrCurve;
};

/// Posterior summary on `train` under `fitted`, scored against truth.theta;
/// KL on `test`.
EvalReport evaluate(const Dataset& train, const Dataset& test, const GroundTruth& truth,
                    const MixturePrior& fitted, double threshold = 0.05,
                    const std::vector<double>& thresholds = default_thresholds(), int threads = 1);

}  // namespace ebmnm
