#include "ebmnm/sim.hpp"

#include "ebmnm/linalg.hpp"
#include "ebmnm/mixture.hpp"

#include <cmath>

namespace ebmnm {

const char* to_string(ScenarioKind kind) {
  return kind == ScenarioKind::Hybrid ? "hybrid" : "rank1";
}

namespace {

Vector standard_normal(int R, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(R);
  for (int i = 0; i < R; ++i) z(i) = normal(rng);
  return z;
}

// F with F F^T = U for PSD (possibly singular) U.
Matrix psd_factor(const Matrix& U) {
  const EigenSystem es = eigen_desc(U);
  return es.vectors * es.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct Draws {
  Matrix theta;
  Matrix x;
  std::vector<int> labels;
};

Draws draw(const MixturePrior& prior, const std::vector<Matrix>& factors, int n,
           std::mt19937_64& rng) {
  const auto R = static_cast<int>(prior.dim());
  std::discrete_distribution<int> pick(prior.pi().data(), prior.pi().data() + prior.K());
  Draws out{Matrix(n, R), Matrix(n, R), std::vector<int>(static_cast<std::size_t>(n))};
  for (int j = 0; j < n; ++j) {
    const int k = pick(rng);
    out.labels[static_cast<std::size_t>(j)] = k;
    out.theta.row(j) = (factors[static_cast<std::size_t>(k)] * standard_normal(R, rng)).transpose();
    out.x.row(j) = out.theta.row(j) + standard_normal(R, rng).transpose();
  }
  return out;
}

}  // namespace

Matrix sample_inverse_wishart(const Matrix& scale, double dof, std::mt19937_64& rng) {
  const auto R = scale.rows();
  if (!(dof > static_cast<double>(R) - 1.0)) {
    throw Error(ErrorKind::InvalidScenario, "inverse-Wishart degrees of freedom must exceed R - 1");
  }
  // X ~ IW(scale, dof)  <=>  X^{-1} ~ Wishart(scale^{-1}, dof).
  const Matrix L = *cholesky_lower(symmetrize(scale.inverse()));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix A = Matrix::Zero(R, R);
  for (Eigen::Index i = 0; i < R; ++i) {
    std::chi_squared_distribution<double> chi2(dof - static_cast<double>(i));
    A(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = normal(rng);
  }
  const Matrix LA = L * A;
  const Matrix W = symmetrize(LA * LA.transpose());
  return symmetrize(W.llt().solve(Matrix::Identity(R, R)));
}

MixturePrior scenario_prior(ScenarioKind kind, int R, std::mt19937_64& rng) {
  if (R < 1) throw Error(ErrorKind::InvalidScenario, "R must be at least 1");
  if (kind == ScenarioKind::RankOne && R < 5) {
    throw Error(ErrorKind::InvalidScenario, "the rank1 scenario requires R >= 5 (it uses e_1..e_5)");
  }
  const Matrix I = Matrix::Identity(R, R);
  std::vector<Matrix> U;
  if (kind == ScenarioKind::Hybrid) {
    Matrix U1 = Matrix::Zero(R, R);
    U1(0, 0) = 5.0;
    U.push_back(U1);
    U.push_back(Matrix::Constant(R, R, 5.0));
    U.push_back(5.0 * I);
    for (int k = 0; k < 7; ++k) U.push_back(sample_inverse_wishart(5.0 * I, R + 2.0, rng));
  } else {
    for (int k = 0; k < 5; ++k) {
      Matrix Uk = Matrix::Zero(R, R);
      Uk(k, k) = 5.0;
      U.push_back(Uk);
    }
    for (int k = 0; k < 5; ++k) {
      const Vector u = standard_normal(R, rng);
      U.push_back(u * u.transpose());
    }
  }
  return MixturePrior(Vector::Constant(10, 0.1), std::move(U), Vector::Ones(10),
                      std::vector<ComponentConstraint>(10));
}

SimulatedData generate(const Scenario& sc) {
  if (sc.n < 1) throw Error(ErrorKind::InvalidScenario, "n must be at least 1");
  if (sc.nTest < 0) throw Error(ErrorKind::InvalidScenario, "nTest must be nonnegative");
  std::mt19937_64 rng(sc.seed);
  MixturePrior prior = scenario_prior(sc.kind, sc.R, rng);
  std::vector<Matrix> factors;
  for (const auto& U : prior.U()) factors.push_back(psd_factor(U));

  Draws train = draw(prior, factors, sc.n, rng);
  Draws test = sc.nTest > 0 ? draw(prior, factors, sc.nTest, rng) : Draws{Matrix(0, sc.R), Matrix(0, sc.R), {}};

  const Matrix I = Matrix::Identity(sc.R, sc.R);
  Dataset train_ds(std::move(train.x), SharedNoise{I});
  std::optional<Dataset> test_ds;
  if (sc.nTest > 0) test_ds.emplace(test.x, SharedNoise{I});
  GroundTruth truth{std::move(prior),      std::move(train.theta), std::move(test.theta),
                    std::move(test.x),     std::move(train.labels), std::move(test.labels)};
  return SimulatedData{std::move(train_ds), std::move(test_ds), std::move(truth)};
}

double kl_divergence(const Dataset& test, const MixturePrior& truth, const MixturePrior& fitted,
                     int threads) {
  const Vector diff = observation_log_likelihoods(test, truth, threads) -
                      observation_log_likelihoods(test, fitted, threads);
  return pairwise_sum(diff) / static_cast<double>(test.n());
}

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

void check_aligned(const PosteriorSummary& summary, const Matrix& theta) {
  if (summary.lfsr.rows() != theta.rows() || summary.lfsr.cols() != theta.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "posterior summary and true means are not aligned");
  }
}

}  // namespace

FsrResult empirical_fsr(const PosteriorSummary& summary, const Matrix& theta, double threshold) {
  check_aligned(summary, theta);
  long count = 0, wrong = 0;
  for (Eigen::Index j = 0; j < theta.rows(); ++j) {
    for (Eigen::Index r = 0; r < theta.cols(); ++r) {
      if (!(summary.lfsr(j, r) < threshold)) continue;
      ++count;
      const double t = theta(j, r);
      if (t == 0.0 || sign(summary.mean(j, r)) != sign(t)) ++wrong;
    }
  }
  if (count == 0) return {};
  return {static_cast<double>(wrong) / static_cast<double>(count), count};
}

std::vector<CurvePoint> power_fsr_curve(const PosteriorSummary& summary, const Matrix& theta,
                                        const std::vector<double>& thresholds) {
  check_aligned(summary, theta);
  const long nonzero = static_cast<long>((theta.array() != 0.0).count());
  std::vector<CurvePoint> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    long sig = 0, correct = 0;
    for (Eigen::Index j = 0; j < theta.rows(); ++j) {
      for (Eigen::Index r = 0; r < theta.cols(); ++r) {
        if (!(summary.lfsr(j, r) < t)) continue;
        ++sig;
        const double th = theta(j, r);
        if (th != 0.0 && sign(summary.mean(j, r)) == sign(th)) ++correct;
      }
    }
    CurvePoint p;
    p.threshold = t;
    p.significant = sig;
    p.power = nonzero > 0 ? static_cast<double>(correct) / static_cast<double>(nonzero) : 0.0;
    p.fsr = sig > 0 ? static_cast<double>(sig - correct) / static_cast<double>(sig) : 0.0;
    curve.push_back(p);
  }
  return curve;
}

std::vector<double> default_thresholds() {
  std::vector<double> out;
  const double lo = std::log(1e-6), hi = std::log(0.5);
  constexpr int kPoints = 41;
  for (int i = 0; i < kPoints; ++i) out.push_back(std::exp(lo + (hi - lo) * i / (kPoints - 1)));
  out.back() = 0.5;
  return out;
}

EvalReport evaluate(const Dataset& train, const Dataset& test, const GroundTruth& truth,
                    const MixturePrior& fitted, double threshold,
                    const std::vector<double>& thresholds, int threads) {
  EvalReport rep;
  rep.klDivergence = kl_divergence(test, truth.prior, fitted, threads);
  const PosteriorSummary summary = summarize(train, fitted, threads);
  const FsrResult f = empirical_fsr(summary, truth.theta, threshold);
  rep.threshold = threshold;
  rep.empiricalFsr = f.fsr;
  rep.significantCount = f.count;
  rep.powerFsrCurve = power_fsr_curve(summary, truth.theta, thresholds);
  return rep;
}

}  // namespace ebmnm
