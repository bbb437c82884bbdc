#include "ebmnm/linalg.hpp"
#include "ebmnm/posterior.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <numbers>

using namespace ebmnm;

namespace {

double max_abs(const Matrix& A) { return A.cwiseAbs().maxCoeff(); }

double npdf(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

PosteriorMixture single(double mean, double var) {
  return PosteriorMixture{Vector::Ones(1), {Vector::Constant(1, mean)}, {Matrix::Constant(1, 1, var)}};
}

}  // namespace

TEST_CASE("zero prior gives a point mass at zero") {
  std::mt19937_64 rng(41);
  const Dataset d(oracle::random_normal(6, 3, rng), SharedNoise{Matrix::Identity(3, 3)});
  const MixturePrior m(Vector::Ones(1), {Matrix::Zero(3, 3)}, Vector::Ones(1), {ComponentConstraint::free()});
  const PosteriorMixture pm = posterior_mixture(d, m, 2);
  CHECK(max_abs(pm.means[0]) == 0.0);
  CHECK(max_abs(pm.covs[0]) == 0.0);
  const PosteriorSummary s = summarize(d, m);
  CHECK(max_abs(s.mean) == 0.0);
  CHECK(max_abs(s.sd) == 0.0);
  // Closed inequalities on both sides: the point mass counts twice.
  CHECK((s.lfsr.array() == 1.0).all());
}

TEST_CASE("U = V = I halves the data") {
  std::mt19937_64 rng(42);
  const Matrix X = oracle::random_normal(4, 2, rng);
  const Dataset d(X, SharedNoise{Matrix::Identity(2, 2)});
  const MixturePrior m(Vector::Ones(1), {Matrix::Identity(2, 2)}, Vector::Ones(1), {ComponentConstraint::free()});
  for (Eigen::Index j = 0; j < 4; ++j) {
    const PosteriorMixture pm = posterior_mixture(d, m, j);
    CHECK(max_abs(pm.means[0] - 0.5 * X.row(j).transpose()) <= 1e-15);
    CHECK(max_abs(pm.covs[0] - 0.5 * Matrix::Identity(2, 2)) <= 1e-15);
  }
}

TEST_CASE("R = 1 posterior mean matches quadrature") {
  const Matrix X{{1.7}, {-0.4}, {4.2}};
  const Vector pi{{0.35, 0.65}};
  const std::vector<Matrix> U{Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 6.0)};
  const double V = 1.3;
  const Dataset d(X, SharedNoise{Matrix::Constant(1, 1, V)});
  const MixturePrior m(pi, U, Vector::Ones(2), std::vector<ComponentConstraint>(2));
  const PosteriorSummary s = summarize(d, m);
  for (int j = 0; j < 3; ++j) {
    const double x = X(j, 0);
    auto dens = [&](double t) { return (pi(0) * npdf(t, 0.3) + pi(1) * npdf(t, 6.0)) * npdf(x - t, V); };
    const double z = oracle::simpson(dens, -40.0, 40.0, 40000);
    const double m1 = oracle::simpson([&](double t) { return t * dens(t); }, -40.0, 40.0, 40000) / z;
    const double m2 = oracle::simpson([&](double t) { return t * t * dens(t); }, -40.0, 40.0, 40000) / z;
    const double p_pos = oracle::simpson(dens, 0.0, 40.0, 20000) / z;
    CHECK(std::abs(s.mean(j, 0) - m1) <= 1e-6);
    CHECK(std::abs(s.sd(j, 0) - std::sqrt(m2 - m1 * m1)) <= 1e-6);
    CHECK(std::abs(s.lfsr(j, 0) - std::min(p_pos, 1.0 - p_pos)) <= 1e-6);
  }
}

TEST_CASE("lfsr of single normals") {
  CHECK(lfsr(single(0.0, 1.0), 0) == 0.5);
  CHECK(lfsr(single(10.0, 1.0), 0) == doctest::Approx(7.619853024160526e-24).epsilon(1e-12));
  CHECK(normal_cdf(-10.0) == doctest::Approx(7.619853024160526e-24).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(-37.0) > 0.0);
}

TEST_CASE("two-component lfsr matches Monte Carlo") {
  PosteriorMixture pm{Vector{{0.4, 0.6}},
                      {Vector::Constant(1, -1.0), Vector::Constant(1, 2.0)},
                      {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)}};
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const long N = 10000000;
  long nonneg = 0;
  for (long i = 0; i < N; ++i) {
    const double t = u(rng) < 0.4 ? -1.0 + z(rng) : 2.0 + z(rng);
    nonneg += t >= 0.0;
  }
  const double p = static_cast<double>(nonneg) / N;
  const double est = std::min(p, 1.0 - p);
  const double se = std::sqrt(p * (1.0 - p) / N);
  CHECK(std::abs(lfsr(pm, 0) - est) <= 3.0 * se);
}

TEST_CASE("posterior moments match importance sampling from the prior") {
  std::mt19937_64 rng(44);
  for (int inst = 0; inst < 4; ++inst) {
    const int R = 1 + inst % 3, K = 1 + (inst + 1) % 3;
    Vector pi = oracle::random_uniform(K, rng, 0.2, 1.0);
    pi /= pi.sum();
    std::vector<Matrix> U;
    for (int k = 0; k < K; ++k) U.push_back(oracle::random_spd(R, rng, 0.1));
    const Matrix V = oracle::random_spd(R, rng, 0.5);
    const Matrix X = oracle::random_normal(1, R, rng, 1.5);
    const Dataset d(X, SharedNoise{V});
    const MixturePrior m(pi, U, Vector::Ones(K), std::vector<ComponentConstraint>(K));
    const PosteriorSummary s = summarize(d, m);

    // theta ~ prior, weight N(x; theta, V).
    std::vector<Matrix> F;
    for (const auto& Uk : U) F.push_back(Eigen::LLT<Matrix>(Uk).matrixL());
    const Matrix Vinv = V.inverse();
    std::discrete_distribution<int> pick(pi.data(), pi.data() + K);
    std::normal_distribution<double> z(0.0, 1.0);
    const long N = 1000000;
    Vector sw1 = Vector::Zero(R), sw2 = Vector::Zero(R), swp = Vector::Zero(R);
    double W = 0.0;
    std::vector<double> ws(N);
    Matrix th(N, R);
    for (long i = 0; i < N; ++i) {
      Vector e(R);
      for (int r = 0; r < R; ++r) e(r) = z(rng);
      const Vector t = F[pick(rng)] * e;
      const Vector res = X.row(0).transpose() - t;
      const double w = std::exp(-0.5 * res.dot(Vinv * res));
      ws[i] = w;
      th.row(i) = t.transpose();
      W += w;
      sw1 += w * t;
      sw2 += w * t.cwiseProduct(t);
      swp += w * (t.array() >= 0.0).cast<double>().matrix();
    }
    for (int r = 0; r < R; ++r) {
      const double mean = sw1(r) / W;
      const double var = sw2(r) / W - mean * mean;
      const double ppos = swp(r) / W;
      // Delta-method standard errors for self-normalised estimates.
      double am = 0.0, av = 0.0, ap = 0.0;
      for (long i = 0; i < N; ++i) {
        const double w2 = ws[i] * ws[i];
        const double t = th(i, r);
        am += w2 * (t - mean) * (t - mean);
        av += w2 * std::pow((t - mean) * (t - mean) - var, 2);
        ap += w2 * std::pow((t >= 0.0) - ppos, 2);
      }
      const double se_m = std::sqrt(am) / W, se_v = std::sqrt(av) / W, se_p = std::sqrt(ap) / W;
      CHECK(std::abs(s.mean(0, r) - mean) <= 3.0 * se_m);
      CHECK(std::abs(s.sd(0, r) * s.sd(0, r) - var) <= 3.0 * se_v);
      CHECK(std::abs(s.lfsr(0, r) - std::min(ppos, 1.0 - ppos)) <= 3.0 * se_p + 1e-12);
    }
  }
}

TEST_CASE("rank-1 prior gives constant lfsr across coordinates") {
  std::mt19937_64 rng(45);
  const Vector u{{1.0, -0.5, 2.0, 0.3}};
  const Matrix X = oracle::random_normal(100, 4, rng, 2.0);
  const Dataset d(X, SharedNoise{Matrix::Identity(4, 4)});
  const MixturePrior m(Vector::Ones(1), {u * u.transpose()}, Vector::Ones(1), {ComponentConstraint::rank1()});
  const PosteriorSummary s = summarize(d, m);
  for (int j = 0; j < 100; ++j) CHECK(s.lfsr.row(j).maxCoeff() - s.lfsr.row(j).minCoeff() <= 1e-12);
}

TEST_CASE("diagonal prior shrinks every coordinate") {
  std::mt19937_64 rng(46);
  const Matrix X = oracle::random_normal(50, 3, rng, 3.0);
  const Dataset d(X, SharedNoise{Matrix::Identity(3, 3)});
  const MixturePrior m(Vector{{0.5, 0.5}}, {Vector{{0.5, 2.0, 9.0}}.asDiagonal().toDenseMatrix(),
                                            Vector{{3.0, 0.1, 1.0}}.asDiagonal().toDenseMatrix()},
                       Vector::Ones(2), std::vector<ComponentConstraint>(2));
  const PosteriorSummary s = summarize(d, m);
  CHECK((s.mean.array().abs() <= X.array().abs()).all());
}

TEST_CASE("lfsr and means are invariant to component order") {
  std::mt19937_64 rng(47);
  const Matrix X = oracle::random_normal(30, 3, rng, 2.0);
  std::vector<Matrix> U{oracle::random_spd(3, rng), oracle::random_spd(3, rng, 0.0), oracle::random_spd(3, rng)};
  const Vector pi{{0.2, 0.5, 0.3}};
  const Dataset d(X, SharedNoise{oracle::random_spd(3, rng, 0.5)});
  const MixturePrior a(pi, U, Vector::Ones(3), std::vector<ComponentConstraint>(3));
  const MixturePrior b(Vector{{0.3, 0.2, 0.5}}, {U[2], U[0], U[1]}, Vector::Ones(3),
                       std::vector<ComponentConstraint>(3));
  const PosteriorSummary sa = summarize(d, a), sb = summarize(d, b);
  CHECK(max_abs(sa.lfsr - sb.lfsr) <= 1e-12);
  CHECK(max_abs(sa.mean - sb.mean) <= 1e-12);
}

TEST_CASE("shared and per-observation paths agree") {
  std::mt19937_64 rng(48);
  const Matrix X = oracle::random_normal(20, 3, rng, 2.0);
  const Matrix V = oracle::random_spd(3, rng, 0.5);
  const MixturePrior m(Vector{{0.4, 0.6}}, {oracle::random_spd(3, rng), oracle::random_spd(3, rng)}, Vector::Ones(2),
                       std::vector<ComponentConstraint>(2));
  const PosteriorSummary a = summarize(Dataset(X, SharedNoise{V}), m);
  const PosteriorSummary b = summarize(Dataset(X, PerObservationNoise{std::vector<Matrix>(20, V)}), m, 3);
  CHECK(max_abs(a.mean - b.mean) <= 1e-12);
  CHECK(max_abs(a.sd - b.sd) <= 1e-12);
  CHECK(max_abs(a.lfsr - b.lfsr) <= 1e-12);

  // summarize agrees with the explicit per-observation mixture.
  const Dataset ds(X, SharedNoise{V});
  for (Eigen::Index j = 0; j < 20; j += 7) {
    const PosteriorMixture pm = posterior_mixture(ds, m, j);
    Vector mean = Vector::Zero(3);
    for (int k = 0; k < 2; ++k) mean += pm.weights(k) * pm.means[k];
    CHECK(max_abs(mean - a.mean.row(j).transpose()) <= 1e-12);
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(lfsr(pm, r) == doctest::Approx(a.lfsr(j, r)).epsilon(1e-12));
  }
}
