#include "ebmnm/core.hpp"

#include "ebmnm/linalg.hpp"

#include <cmath>
#include <sstream>

namespace ebmnm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::UnsupportedNoise: return "UnsupportedNoise";
    case ErrorKind::UnsupportedPenalty: return "UnsupportedPenalty";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Free: return "free";
    case ConstraintKind::Rank1: return "rank1";
    case ConstraintKind::Scaled: return "scaled";
  }
  return "unknown";
}

const char* to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::None: return "none";
    case PenaltyKind::InverseWishart: return "iw";
    case PenaltyKind::NuclearNorm: return "nn";
  }
  return "unknown";
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::TED: return "ted";
    case Algorithm::ED: return "ed";
    case Algorithm::FA: return "fa";
  }
  return "unknown";
}

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

void check_noise_matrix(const Matrix& V, Eigen::Index R, const std::string& label) {
  if (V.rows() != R || V.cols() != R) {
    std::ostringstream os;
    os << label << " is " << V.rows() << "x" << V.cols() << ", expected " << R << "x" << R;
    fail(ErrorKind::DimensionMismatch, os.str());
  }
  if (!V.allFinite()) fail(ErrorKind::MalformedInput, label + " has non-finite entries");
  if (relative_asymmetry(V) > 1e-10) fail(ErrorKind::NotPositiveDefinite, label + " is not symmetric");
  if (!cholesky_lower(symmetrize(V))) {
    fail(ErrorKind::NotPositiveDefinite, label + " is not positive definite");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Matrix x, Noise noise) : x_(std::move(x)), noise_(std::move(noise)) {
  if (x_.rows() == 0) fail(ErrorKind::EmptyData, "dataset has no observations");
  if (x_.cols() == 0) fail(ErrorKind::DimensionMismatch, "dataset has dimension 0");
  if (!x_.allFinite()) fail(ErrorKind::MalformedInput, "observations contain non-finite values");
  const auto R = x_.cols();
  if (auto* shared = std::get_if<SharedNoise>(&noise_)) {
    check_noise_matrix(shared->V, R, "noise matrix V");
    shared->V = symmetrize(shared->V);
    chol_ = *cholesky_lower(shared->V);
    x_white_ = chol_.triangularView<Eigen::Lower>().solve(x_.transpose()).transpose();
  } else {
    auto& per = std::get<PerObservationNoise>(noise_);
    if (static_cast<Eigen::Index>(per.V.size()) != x_.rows()) {
      std::ostringstream os;
      os << "expected " << x_.rows() << " noise matrices, got " << per.V.size();
      fail(ErrorKind::DimensionMismatch, os.str());
    }
    for (std::size_t j = 0; j < per.V.size(); ++j) {
      check_noise_matrix(per.V[j], R, "noise matrix V_" + std::to_string(j));
      per.V[j] = symmetrize(per.V[j]);
    }
  }
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& rows, Noise noise) {
  if (rows.empty()) fail(ErrorKind::EmptyData, "dataset has no observations");
  const std::size_t R = rows.front().size();
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(R));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != R) {
      std::ostringstream os;
      os << "observation " << j << " has length " << rows[j].size() << ", expected " << R;
      fail(ErrorKind::DimensionMismatch, os.str());
    }
    for (std::size_t r = 0; r < R; ++r) x(j, r) = rows[j][r];
  }
  return Dataset(std::move(x), std::move(noise));
}

const Matrix& Dataset::noise(Eigen::Index j) const {
  if (const auto* shared = std::get_if<SharedNoise>(&noise_)) return shared->V;
  return std::get<PerObservationNoise>(noise_).V[j];
}

const Matrix& Dataset::noise_chol() const {
  if (!shared_noise()) fail(ErrorKind::UnsupportedNoise, "operation requires shared noise");
  return chol_;
}

const Matrix& Dataset::whitened_x() const {
  if (!shared_noise()) fail(ErrorKind::UnsupportedNoise, "operation requires shared noise");
  return x_white_;
}

Matrix Dataset::to_noise_frame(const Matrix& A) const {
  if (!shared_noise()) return A;
  const auto L = chol_.triangularView<Eigen::Lower>();
  const Matrix T = L.solve(A);
  return symmetrize(L.solve(T.transpose()).transpose());
}

Matrix Dataset::from_noise_frame(const Matrix& A) const {
  if (!shared_noise()) return A;
  return symmetrize(chol_ * A * chol_.transpose());
}

Dataset Dataset::with_x(Matrix x) const { return Dataset(std::move(x), noise_); }

Dataset validate_dataset(const Dataset& d) { return Dataset(d.x(), d.noise()); }

// ---------------------------------------------------------------------------
// Constraints and penalties

ComponentConstraint ComponentConstraint::scaled(Matrix base) {
  if (base.rows() != base.cols() || base.rows() == 0) {
    fail(ErrorKind::InvariantViolation, "scaled-constraint base must be a nonempty square matrix");
  }
  if (!base.allFinite() || relative_asymmetry(base) > 1e-10) {
    fail(ErrorKind::InvariantViolation, "scaled-constraint base must be symmetric");
  }
  auto clamped = clamp_psd(base);
  if (!clamped) fail(ErrorKind::InvariantViolation, "scaled-constraint base must be PSD");
  if (clamped->cwiseAbs().maxCoeff() == 0.0) {
    fail(ErrorKind::InvariantViolation, "scaled-constraint base must be nonzero");
  }
  return {ConstraintKind::Scaled, *std::move(clamped)};
}

Penalty Penalty::inverse_wishart(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    fail(ErrorKind::InvalidConfig, "penalty strength lambda must be positive");
  }
  return {PenaltyKind::InverseWishart, lambda};
}

Penalty Penalty::nuclear_norm(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    fail(ErrorKind::InvalidConfig, "penalty strength lambda must be positive");
  }
  return {PenaltyKind::NuclearNorm, lambda};
}

// ---------------------------------------------------------------------------
// MixturePrior

MixturePrior::MixturePrior(Vector pi, std::vector<Matrix> U, Vector s,
                           std::vector<ComponentConstraint> constraints)
    : pi_(std::move(pi)), U_(std::move(U)), s_(std::move(s)), constraints_(std::move(constraints)) {
  const auto K = pi_.size();
  if (K == 0) fail(ErrorKind::InvariantViolation, "prior must have at least one component");
  if (static_cast<Eigen::Index>(U_.size()) != K || s_.size() != K ||
      static_cast<Eigen::Index>(constraints_.size()) != K) {
    fail(ErrorKind::InvariantViolation, "pi, U, s and constraints must all have K entries");
  }
  if (!pi_.allFinite() || (pi_.array() < 0.0).any()) {
    fail(ErrorKind::InvariantViolation, "mixture weights must be finite and nonnegative");
  }
  if (std::abs(pi_.sum() - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "mixture weights sum to " << pi_.sum() << ", not 1";
    fail(ErrorKind::InvariantViolation, os.str());
  }
  if (!s_.allFinite() || (s_.array() <= 0.0).any()) {
    fail(ErrorKind::InvariantViolation, "scale factors must be positive");
  }
  const auto R = U_.front().rows();
  if (R == 0) fail(ErrorKind::InvariantViolation, "prior covariances must be nonempty");
  for (Eigen::Index k = 0; k < K; ++k) {
    Matrix& Uk = U_[k];
    const std::string label = "U_" + std::to_string(k);
    if (Uk.rows() != R || Uk.cols() != R) fail(ErrorKind::InvariantViolation, label + " has wrong shape");
    if (!Uk.allFinite()) fail(ErrorKind::InvariantViolation, label + " has non-finite entries");
    if (relative_asymmetry(Uk) > 1e-10) fail(ErrorKind::InvariantViolation, label + " is not symmetric");
    auto clamped = clamp_psd(Uk);
    if (!clamped) fail(ErrorKind::InvariantViolation, label + " is not positive semidefinite");
    Uk = *std::move(clamped);

    const auto& c = constraints_[k];
    if (c.kind == ConstraintKind::Rank1) {
      const Vector ev = eigen_desc(Uk).values;
      const double tol = 1e-8 * std::max(ev(0), 0.0) + 1e-300;
      if (R > 1 && ev(1) > tol) fail(ErrorKind::InvariantViolation, label + " violates its rank-1 constraint");
    } else if (c.kind == ConstraintKind::Scaled) {
      if (c.base.rows() != R || c.base.cols() != R) {
        fail(ErrorKind::InvariantViolation, label + " scaled-constraint base has wrong shape");
      }
      const double coef = (Uk.array() * c.base.array()).sum() / c.base.squaredNorm();
      const double resid = (Uk - coef * c.base).norm();
      if (coef < -1e-12 || resid > 1e-8 * std::max(Uk.norm(), 1e-300)) {
        fail(ErrorKind::InvariantViolation, label + " is not a nonnegative multiple of its base");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// FitConfig

void validate_fit_config(const FitConfig& cfg, const Dataset& d,
                         const std::vector<ComponentConstraint>& constraints) {
  auto invalid = [](const std::string& msg) { fail(ErrorKind::InvalidConfig, msg); };
  if (cfg.maxIterations < 1) invalid("maxIterations must be positive");
  if (!(cfg.tolerance > 0.0)) invalid("tolerance must be positive");
  if (cfg.warmStartEDIterations < 0) invalid("warmStartEDIterations must be nonnegative");
  if (cfg.K != static_cast<int>(constraints.size())) {
    invalid("K = " + std::to_string(cfg.K) + " does not match the " +
            std::to_string(constraints.size()) + " components of the initial prior");
  }
  if (cfg.penalty.active() && !(cfg.penalty.lambda > 0.0 && std::isfinite(cfg.penalty.lambda))) {
    invalid("penalty strength lambda must be positive");
  }
  bool has_free = false;
  bool has_rank1 = false;
  for (const auto& c : constraints) {
    has_free |= c.kind == ConstraintKind::Free;
    has_rank1 |= c.kind == ConstraintKind::Rank1;
    if (c.kind == ConstraintKind::Scaled && c.base.rows() != d.dim()) {
      invalid("scaled-constraint base dimension does not match the dataset");
    }
  }
  switch (cfg.algorithm) {
    case Algorithm::TED:
      if (!d.shared_noise()) invalid("TED requires shared (homoskedastic) noise");
      break;
    case Algorithm::ED:
      if (has_rank1) invalid("ED cannot fit rank-1 constrained components; use FA or TED");
      if (cfg.penalty.kind == PenaltyKind::NuclearNorm) invalid("the nuclear-norm penalty is only supported with TED");
      break;
    case Algorithm::FA:
      if (cfg.penalty.active()) invalid("penalties are not supported with FA");
      if (has_free) invalid("FA fits rank-1 components only; unconstrained components need TED or ED");
      break;
  }
  if (cfg.penalty.active() && has_rank1) {
    invalid("penalties are undefined for rank-1 constrained components");
  }
}

}  // namespace ebmnm
