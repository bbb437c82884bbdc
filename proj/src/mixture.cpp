#include "ebmnm/mixture.hpp"

#include "ebmnm/linalg.hpp"
#include "ebmnm/penalty.hpp"
#include "ebmnm/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace ebmnm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Row-wise log-sum-exp of log(pi_k) + logdens(j, k).
Vector row_log_marginals(const Matrix& logdens, const Vector& pi) {
  const auto n = logdens.rows();
  const auto K = logdens.cols();
  Vector log_pi(K);
  for (Eigen::Index k = 0; k < K; ++k) log_pi(k) = pi(k) > 0.0 ? std::log(pi(k)) : kNegInf;
  Vector out(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double mx = kNegInf;
    for (Eigen::Index k = 0; k < K; ++k) mx = std::max(mx, log_pi(k) + logdens(j, k));
    if (mx == kNegInf) {
      out(j) = kNegInf;
      continue;
    }
    double acc = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (log_pi(k) != kNegInf) acc += std::exp(log_pi(k) + logdens(j, k) - mx);
    }
    out(j) = mx + std::log(acc);
  }
  return out;
}

Matrix row_responsibilities(const Matrix& logdens, const Vector& pi, const Vector& log_marg) {
  Matrix w(logdens.rows(), logdens.cols());
  for (Eigen::Index k = 0; k < logdens.cols(); ++k) {
    if (pi(k) <= 0.0) {
      w.col(k).setZero();
      continue;
    }
    const double lp = std::log(pi(k));
    w.col(k) = (lp + logdens.col(k).array() - log_marg.array()).exp().matrix();
  }
  // Renormalise so rows sum to one to rounding.
  const Vector sums = w.rowwise().sum();
  return w.array().colwise() / sums.array();
}

double component_penalty(const Dataset& d, const Matrix& U, const ComponentConstraint& c,
                         double s, const Penalty& penalty) {
  if (!penalty.active() || c.kind != ConstraintKind::Free) return 0.0;
  return penalty_value(penalty, d.to_noise_frame(U), s);
}

double total_penalty(const Dataset& d, const std::vector<Matrix>& U, const Vector& s,
                     const std::vector<ComponentConstraint>& constraints, const Penalty& penalty) {
  double total = 0.0;
  for (std::size_t k = 0; k < U.size(); ++k) {
    total += component_penalty(d, U[k], constraints[k], s(static_cast<Eigen::Index>(k)), penalty);
  }
  return total;
}

double floored_scale(const Dataset& d, const Matrix& U, const Penalty& penalty) {
  const Vector e = floor_eigenvalues(eigen_desc(d.to_noise_frame(U)).values);
  return scale_factor_update(Matrix(e.asDiagonal()), penalty);
}

enum class Phase { WarmStart, Main };

struct State {
  Vector pi;
  std::vector<Matrix> U;
  Vector s;
};

class EmRunner {
 public:
  EmRunner(const Dataset& d, const std::vector<ComponentConstraint>& constraints,
           const FitConfig& cfg)
      : d_(d), constraints_(constraints), cfg_(cfg) {}

  // Returns ell - penalty at the given state and caches the log densities.
  double evaluate(const State& st, const Penalty& penalty) {
    logdens_ = component_log_densities(d_, st.U, cfg_.threads);
    log_marg_ = row_log_marginals(logdens_, st.pi);
    const double ll = pairwise_sum(log_marg_);
    if (!std::isfinite(ll)) throw Error(ErrorKind::NumericalFailure, "log-likelihood is not finite");
    return ll - total_penalty(d_, st.U, st.s, constraints_, penalty);
  }

  // One EM iteration using the densities cached by the last evaluate().
  void step(State& st, Phase phase, const Penalty& penalty) {
    const Matrix w = row_responsibilities(logdens_, st.pi, log_marg_);
    const auto n = static_cast<double>(d_.n());
    const auto K = static_cast<int>(st.pi.size());
    Vector pi(K);
    for (int k = 0; k < K; ++k) pi(k) = pairwise_sum(Vector(w.col(k))) / n;
    pi /= pairwise_sum(pi);
    st.pi = pi;

    parallel_for(K, cfg_.threads, [&](int k) {
      if (st.pi(k) < kDeadWeight) return;
      const Vector wk = w.col(k);
      const auto& c = constraints_[k];
      const WeightedProblem p{d_, wk, st.s(k), penalty, st.U[k]};
      switch (c.kind) {
        case ConstraintKind::Scaled:
          st.U[k] = scaled_update(p, c.base) * c.base;
          return;
        case ConstraintKind::Rank1:
          if (phase == Phase::Main && cfg_.algorithm == Algorithm::TED) {
            st.U[k] = ted_update(p, true);
          } else {
            const Vector u = fa_update(p, rank_one_factor(st.U[k]));
            st.U[k] = u * u.transpose();
          }
          return;
        case ConstraintKind::Free:
          if (phase == Phase::Main && cfg_.algorithm == Algorithm::TED) {
            st.U[k] = ted_update(p);
          } else {
            st.U[k] = ed_update(p);
          }
          if (penalty.active()) st.s(k) = floored_scale(d_, st.U[k], penalty);
          return;
      }
    });
  }

 private:
  const Dataset& d_;
  const std::vector<ComponentConstraint>& constraints_;
  const FitConfig& cfg_;
  Matrix logdens_;
  Vector log_marg_;
};

}  // namespace

Matrix component_log_densities(const Dataset& d, const std::vector<Matrix>& U, int threads) {
  const auto K = static_cast<int>(U.size());
  Matrix out(d.n(), K);
  parallel_for(K, threads, [&](int k) {
    if (U[k].rows() != d.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "prior dimension does not match the dataset");
    }
    if (d.shared_noise()) {
      out.col(k) = log_mvn_rows(d.x(), cholesky_with_jitter(U[k] + d.noise(0)));
    } else {
      for (Eigen::Index j = 0; j < d.n(); ++j) {
        out(j, k) = log_mvn(d.row(j), cholesky_with_jitter(U[k] + d.noise(j)));
      }
    }
  });
  return out;
}

Vector observation_log_likelihoods(const Dataset& d, const MixturePrior& m, int threads) {
  if (m.dim() != d.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "prior has dimension " + std::to_string(m.dim()) +
                                                  " but the dataset has " + std::to_string(d.dim()));
  }
  return row_log_marginals(component_log_densities(d, m.U(), threads), m.pi());
}

double log_likelihood(const Dataset& d, const MixturePrior& m, int threads) {
  return pairwise_sum(observation_log_likelihoods(d, m, threads));
}

double penalized_log_likelihood(const Dataset& d, const MixturePrior& m, const Penalty& penalty,
                                int threads) {
  return log_likelihood(d, m, threads) - total_penalty(d, m.U(), m.s(), m.constraints(), penalty);
}

ResponsibilityMatrix responsibilities(const Dataset& d, const MixturePrior& m, int threads) {
  if (m.dim() != d.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "prior dimension does not match the dataset");
  }
  const Matrix logdens = component_log_densities(d, m.U(), threads);
  return row_responsibilities(logdens, m.pi(), row_log_marginals(logdens, m.pi()));
}

FitResult fit(const Dataset& d, const MixturePrior& init, const FitConfig& cfg) {
  if (init.dim() != d.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "initial prior dimension does not match the dataset");
  }
  validate_fit_config(cfg, d, init.constraints());

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  State st{init.pi(), init.U(), init.s()};
  EmRunner em(d, init.constraints(), cfg);
  FitTrace trace;

  if (cfg.warmStartEDIterations > 0) {
    // ED cannot carry the nuclear-norm penalty; its warm start is unpenalised.
    const Penalty warm_penalty =
        cfg.penalty.kind == PenaltyKind::NuclearNorm ? Penalty::none() : cfg.penalty;
    double obj = em.evaluate(st, warm_penalty);
    trace.warmStart.push_back({0, obj, elapsed()});
    for (int it = 1; it <= cfg.warmStartEDIterations; ++it) {
      em.step(st, Phase::WarmStart, warm_penalty);
      obj = em.evaluate(st, warm_penalty);
      trace.warmStart.push_back({it, obj, elapsed()});
    }
  }

  double obj = em.evaluate(st, cfg.penalty);
  trace.perIteration.push_back({0, obj, elapsed()});
  for (int it = 1; it <= cfg.maxIterations; ++it) {
    em.step(st, Phase::Main, cfg.penalty);
    const double next = em.evaluate(st, cfg.penalty);
    trace.perIteration.push_back({it, next, elapsed()});
    trace.iterationsRun = it;
    const double gain = next - obj;
    obj = next;
    if (gain < cfg.tolerance) {
      trace.converged = true;
      break;
    }
  }

  return FitResult{MixturePrior(st.pi, st.U, st.s, init.constraints()), std::move(trace), cfg};
}

MixturePrior random_init(int R, int K, std::uint64_t seed,
                         std::vector<ComponentConstraint> constraints) {
  if (K < 1 || R < 1) throw Error(ErrorKind::InvalidConfig, "random_init needs K >= 1 and R >= 1");
  if (constraints.empty()) constraints.assign(static_cast<std::size_t>(K), ComponentConstraint::free());
  if (static_cast<int>(constraints.size()) != K) {
    throw Error(ErrorKind::InvalidConfig, "constraint count does not match K");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Matrix> U;
  U.reserve(static_cast<std::size_t>(K));
  for (const auto& c : constraints) {
    switch (c.kind) {
      case ConstraintKind::Free: {
        Matrix A(R, R);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
        U.push_back(symmetrize(A * A.transpose()) + 0.1 * Matrix::Identity(R, R));
        break;
      }
      case ConstraintKind::Rank1: {
        Vector u(R);
        for (Eigen::Index i = 0; i < R; ++i) u(i) = normal(rng);
        U.push_back(u * u.transpose());
        break;
      }
      case ConstraintKind::Scaled:
        if (c.base.rows() != R) throw Error(ErrorKind::InvalidConfig, "scaled base has wrong dimension");
        U.push_back(c.base);
        break;
    }
  }
  return MixturePrior(Vector::Constant(K, 1.0 / K), std::move(U), Vector::Ones(K),
                      std::move(constraints));
}

}  // namespace ebmnm
