#include "ebmnm/linalg.hpp"
#include "ebmnm/mixture.hpp"
#include "ebmnm/posterior.hpp"
#include "ebmnm/sim.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <numbers>

using namespace ebmnm;

namespace {

double max_abs(const Matrix& A) { return A.cwiseAbs().maxCoeff(); }

MixturePrior corrupted(const MixturePrior& p) {
  return MixturePrior(p.pi(), std::vector<Matrix>(p.K(), Matrix::Identity(p.dim(), p.dim())), p.s(),
                      std::vector<ComponentConstraint>(p.K()));
}

}  // namespace

TEST_CASE("hybrid scenario structure") {
  const SimulatedData sim = generate({ScenarioKind::Hybrid, 300, 100, 5, 1});
  const auto& p = sim.truth.prior;
  CHECK(p.K() == 10);
  CHECK(max_abs(p.pi() - Vector::Constant(10, 0.1)) == 0.0);
  Matrix U1 = Matrix::Zero(5, 5);
  U1(0, 0) = 5.0;
  CHECK(p.U(0) == U1);
  CHECK(p.U(1) == Matrix::Constant(5, 5, 5.0));
  CHECK(p.U(2) == 5.0 * Matrix::Identity(5, 5));
  for (int k = 3; k < 10; ++k) {
    CHECK(p.U(k).allFinite());
    CHECK(eigen_desc(p.U(k)).values.minCoeff() > 0.0);
  }
  CHECK(sim.train.n() == 300);
  CHECK(sim.train.shared_noise());
  CHECK(sim.train.noise(0) == Matrix::Identity(5, 5));
  REQUIRE(sim.test);
  CHECK(sim.test->n() == 100);
  CHECK(sim.truth.theta.rows() == 300);
  CHECK(sim.truth.thetaTest.rows() == 100);
  CHECK(sim.truth.xTest.rows() == 100);

  // Component 1 draws vary only in the first coordinate.
  for (int j = 0; j < 300; ++j) {
    if (sim.truth.labels[j] == 0) CHECK(sim.truth.theta.row(j).tail(4).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("large settings generate") {
  const SimulatedData large = generate({ScenarioKind::Hybrid, 10000, 0, 5, 2});
  CHECK(large.train.n() == 10000);
  const SimulatedData small = generate({ScenarioKind::Hybrid, 1000, 0, 50, 2});
  CHECK(small.train.dim() == 50);
}

TEST_CASE("rank-1 scenario structure and validation") {
  const SimulatedData sim = generate({ScenarioKind::RankOne, 200, 0, 6, 3});
  const auto& p = sim.truth.prior;
  for (int k = 0; k < 5; ++k) {
    CHECK(p.U(k)(k, k) == 5.0);
    CHECK(p.U(k).cwiseAbs().sum() == 5.0);
  }
  for (int k = 5; k < 10; ++k) {
    const Vector ev = eigen_desc(p.U(k)).values;
    CHECK(ev(1) <= 1e-10 * ev(0));
  }
  CHECK_THROWS_AS(generate({ScenarioKind::RankOne, 10, 0, 3, 1}), Error);
  try {
    generate({ScenarioKind::RankOne, 10, 0, 4, 1});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidScenario);
    CHECK(std::string(e.what()).find("R >= 5") != std::string::npos);
  }
}

TEST_CASE("generation is bit-identical for a seed") {
  const SimulatedData a = generate({ScenarioKind::Hybrid, 200, 50, 4, 77});
  const SimulatedData b = generate({ScenarioKind::Hybrid, 200, 50, 4, 77});
  CHECK(a.train.x() == b.train.x());
  CHECK(a.truth.theta == b.truth.theta);
  CHECK(a.test->x() == b.test->x());
  for (int k = 0; k < 10; ++k) CHECK(a.truth.prior.U(k) == b.truth.prior.U(k));
  const SimulatedData c = generate({ScenarioKind::Hybrid, 200, 50, 4, 78});
  CHECK(c.train.x() != a.train.x());
}

TEST_CASE("component-2 draws have covariance near 5 11^T") {
  const SimulatedData sim = generate({ScenarioKind::Hybrid, 100000, 0, 5, 4});
  Matrix S = Matrix::Zero(5, 5);
  int count = 0;
  for (int j = 0; j < 100000; ++j) {
    if (sim.truth.labels[j] != 1) continue;
    S += sim.truth.theta.row(j).transpose() * sim.truth.theta.row(j);
    ++count;
  }
  S /= count;
  CHECK(max_abs(S - Matrix::Constant(5, 5, 5.0)) <= 0.5);
}

TEST_CASE("inverse-Wishart draws") {
  std::mt19937_64 rng(5);
  const int R = 5;
  Matrix mean = Matrix::Zero(R, R);
  const int N = 10000;
  for (int i = 0; i < N; ++i) {
    const Matrix X = sample_inverse_wishart(5.0 * Matrix::Identity(R, R), R + 2.0, rng);
    REQUIRE(X.allFinite());
    REQUIRE(eigen_desc(X).values.minCoeff() > 0.0);
    mean += X;
  }
  mean /= N;
  // The mean is 5 I / (nu - R - 1) = 5 I; off-diagonal entries are zero, so
  // they are held to 15% of the diagonal scale.
  CHECK(max_abs(mean - 5.0 * Matrix::Identity(R, R)) <= 0.15 * 5.0);

  // A better-behaved dof checks the formula more tightly.
  Matrix mean2 = Matrix::Zero(3, 3);
  Matrix scale(3, 3);
  scale << 2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0;
  for (int i = 0; i < N; ++i) mean2 += sample_inverse_wishart(scale, 12.0, rng);
  mean2 /= N;
  CHECK(max_abs(mean2 - scale / (12.0 - 3.0 - 1.0)) <= 0.03);
  CHECK_THROWS_AS(sample_inverse_wishart(Matrix::Identity(3, 3), 1.5, rng), Error);
}

TEST_CASE("KL divergence") {
  const SimulatedData sim = generate({ScenarioKind::Hybrid, 200, 2000, 5, 6});
  CHECK(kl_divergence(*sim.test, sim.truth.prior, sim.truth.prior) == 0.0);

  // Nonnegative up to Monte Carlo error for a fitted prior.
  FitConfig cfg{Algorithm::TED, Penalty::inverse_wishart(5.0), 200, 0.01, 10, 1, 10, 1};
  const FitResult r = fit(sim.train, random_init(5, 10, 1), cfg);
  const Vector diff = observation_log_likelihoods(*sim.test, sim.truth.prior) -
                      observation_log_likelihoods(*sim.test, r.prior);
  const double se = std::sqrt((diff.array() - diff.mean()).square().sum() / (diff.size() - 1) / diff.size());
  CHECK(kl_divergence(*sim.test, sim.truth.prior, r.prior) >= -3.0 * se);
  CHECK(kl_divergence(*sim.test, sim.truth.prior, r.prior) == doctest::Approx(diff.mean()).epsilon(1e-12));
}

TEST_CASE("one-dimensional KL matches quadrature") {
  // x ~ N(0, 2) under the truth; fitted gives N(0, 1).
  std::mt19937_64 rng(7);
  const Matrix X = oracle::random_normal(5000, 1, rng, std::sqrt(2.0));
  const Dataset d(X, SharedNoise{Matrix::Ones(1, 1)});
  const MixturePrior truth(Vector::Ones(1), {Matrix::Ones(1, 1)}, Vector::Ones(1), {ComponentConstraint::free()});
  const MixturePrior fitted(Vector::Ones(1), {Matrix::Zero(1, 1)}, Vector::Ones(1), {ComponentConstraint::free()});
  const double kl = kl_divergence(d, truth, fitted);

  double direct = 0.0;
  for (int j = 0; j < 5000; ++j) {
    direct += std::log(oracle::mvn_density(X.row(j).transpose(), Matrix::Constant(1, 1, 2.0)) /
                       oracle::mvn_density(X.row(j).transpose(), Matrix::Ones(1, 1)));
  }
  CHECK(kl == doctest::Approx(direct / 5000.0).epsilon(1e-12));

  // Its expectation by quadrature: KL(N(0,2) || N(0,1)) = (2 - 1 - log 2) / 2.
  auto integrand = [](double x) {
    const double p = std::exp(-x * x / 4.0) / std::sqrt(4.0 * std::numbers::pi);
    const double q = std::exp(-x * x / 2.0) / std::sqrt(2.0 * std::numbers::pi);
    return p * std::log(p / q);
  };
  const double expected = oracle::simpson(integrand, -30.0, 30.0, 20000);
  CHECK(expected == doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-10));
  const Vector per = (X.array().square() / 4.0 - 0.5 * std::log(2.0)).matrix().col(0);
  const double se = std::sqrt((per.array() - per.mean()).square().sum() / 4999.0 / 5000.0);
  CHECK(std::abs(kl - expected) <= 3.0 * se);
}

TEST_CASE("empirical FSR conventions") {
  PosteriorSummary s{Matrix(2, 2), Matrix::Ones(2, 2), Matrix(2, 2)};
  s.mean << 1.0, -2.0, 0.5, 3.0;
  s.lfsr << 0.01, 0.2, 0.03, 0.6;
  Matrix theta(2, 2);
  theta << 2.0, -1.0, 1.0, 1.0;

  const FsrResult none = empirical_fsr(s, theta, 0.001);
  CHECK(none.count == 0);
  CHECK(none.fsr == 0.0);

  const FsrResult ok = empirical_fsr(s, theta, 0.05);
  CHECK(ok.count == 2);
  CHECK(ok.fsr == 0.0);

  theta(1, 0) = -1.0;  // wrong sign
  CHECK(empirical_fsr(s, theta, 0.05).fsr == 0.5);
  theta(1, 0) = 0.0;  // zero counts as a sign error
  CHECK(empirical_fsr(s, theta, 0.05).fsr == 0.5);

  const auto curve = power_fsr_curve(s, theta, {1e-9, 0.05, 0.5, 1.0});
  CHECK(curve[0].power == 0.0);
  CHECK(curve[0].fsr == 0.0);
  CHECK(curve[0].significant == 0);
  // theta(1,0) = 0 leaves three nonzero coordinates.
  CHECK(curve[1].power == doctest::Approx(1.0 / 3.0));
  CHECK(curve[2].power == doctest::Approx(2.0 / 3.0));
  CHECK(curve[3].power == doctest::Approx(1.0));
}

TEST_CASE("default threshold grid") {
  const auto t = default_thresholds();
  CHECK(t.size() == 41);
  CHECK(t.front() == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(t.back() == 0.5);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
}

TEST_CASE("oracle power-FSR curves are monotone and near-perfect information finds the signal") {
  const SimulatedData sim = generate({ScenarioKind::Hybrid, 2000, 0, 5, 8});
  const PosteriorSummary s = summarize(sim.train, sim.truth.prior);
  const auto curve = power_fsr_curve(s, sim.truth.theta, default_thresholds());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].power >= curve[i - 1].power);
    CHECK(curve[i].significant >= curve[i - 1].significant);
    CHECK(curve[i].fsr >= 0.0);
    CHECK(curve[i].fsr <= 1.0);
  }

  // Posterior nearly a point mass at the truth: lfsr 0 with the true sign.
  PosteriorSummary exact{sim.truth.theta, Matrix::Zero(2000, 5), Matrix::Zero(2000, 5)};
  const auto perfect = power_fsr_curve(exact, sim.truth.theta, {0.5});
  CHECK(perfect[0].power == 1.0);
}

TEST_CASE("oracle FSR at 0.05 is controlled") {
  long count = 0, wrong = 0;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const SimulatedData sim = generate({ScenarioKind::Hybrid, 10000, 0, 5, seed});
    const PosteriorSummary s = summarize(sim.train, sim.truth.prior);
    const FsrResult f = empirical_fsr(s, sim.truth.theta, 0.05);
    count += f.count;
    wrong += std::lround(f.fsr * f.count);
  }
  const double fsr = static_cast<double>(wrong) / count;
  CHECK(fsr <= 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / count));
}

TEST_CASE("oracle dominates a corrupted prior") {
  double oracle_area = 0.0, corrupt_area = 0.0;
  int wins = 0;
  for (std::uint64_t seed = 200; seed < 205; ++seed) {
    const SimulatedData sim = generate({ScenarioKind::Hybrid, 1000, 0, 5, seed});
    const auto co = power_fsr_curve(summarize(sim.train, sim.truth.prior), sim.truth.theta, default_thresholds());
    const auto cc =
        power_fsr_curve(summarize(sim.train, corrupted(sim.truth.prior)), sim.truth.theta, default_thresholds());
    // Power at matched FSR 0.05: best power among points with fsr <= 0.05.
    auto power_at = [](const std::vector<CurvePoint>& c) {
      double best = 0.0;
      for (const auto& p : c) {
        if (p.fsr <= 0.05) best = std::max(best, p.power);
      }
      return best;
    };
    oracle_area += power_at(co);
    corrupt_area += power_at(cc);
    wins += power_at(co) >= power_at(cc);
  }
  CHECK(oracle_area > corrupt_area);
  CHECK(wins >= 4);
}

TEST_CASE("evaluate assembles a report") {
  const SimulatedData sim = generate({ScenarioKind::Hybrid, 300, 300, 5, 9});
  const EvalReport rep = evaluate(sim.train, *sim.test, sim.truth, sim.truth.prior);
  CHECK(rep.klDivergence == 0.0);
  CHECK(rep.threshold == 0.05);
  CHECK(rep.powerFsrCurve.size() == 41);
  const EvalReport zero = evaluate(sim.train, *sim.test, sim.truth, sim.truth.prior, 0.0);
  CHECK(zero.significantCount == 0);
  CHECK(zero.empiricalFsr == 0.0);
}
