// Domain types shared by every part of the library: datasets, priors,
// penalties, constraints, fit configuration and traces.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ebmnm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  EmptyData,
  MalformedInput,
  InvariantViolation,
  UnsupportedNoise,
  UnsupportedPenalty,
  NumericalFailure,
  SingularMatrix,
  InvalidConfig,
  InvalidScenario,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct SharedNoise {
  Matrix V;
};

struct PerObservationNoise {
  std::vector<Matrix> V;
};

using Noise = std::variant<SharedNoise, PerObservationNoise>;

/// n noisy observations x_j ~ N(theta_j, V_j) of dimension R.
///
/// Immutable after construction. For shared noise the Cholesky factor L of V
/// (V = L L^T) and the whitened observations L^{-1} x_j are cached, since
/// every homoskedastic algorithm works in that frame.
class Dataset {
 public:
  /// Rows of `x` are observations.
  Dataset(Matrix x, Noise noise);

  /// Builds from ragged rows; rows of differing length raise DimensionMismatch.
  static Dataset from_rows(const std::vector<std::vector<double>>& rows, Noise noise);

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index dim() const { return x_.cols(); }
  const Matrix& x() const { return x_; }
  auto row(Eigen::Index j) const { return x_.row(j).transpose(); }

  bool shared_noise() const { return std::holds_alternative<SharedNoise>(noise_); }
  const Noise& noise() const { return noise_; }
  const Matrix& noise(Eigen::Index j) const;

  /// Lower Cholesky factor of the shared V. Throws UnsupportedNoise otherwise.
  const Matrix& noise_chol() const;
  /// Rows L^{-1} x_j. Throws UnsupportedNoise for per-observation noise.
  const Matrix& whitened_x() const;

  /// Returns L^{-1} A L^{-T} for shared noise, A unchanged otherwise. This is
  /// the frame in which penalties are measured.
  Matrix to_noise_frame(const Matrix& A) const;
  /// Inverse of to_noise_frame.
  Matrix from_noise_frame(const Matrix& A) const;

  /// Same noise, different observations (dimensions must agree).
  Dataset with_x(Matrix x) const;

 private:
  Matrix x_;
  Noise noise_;
  Matrix chol_;
  Matrix x_white_;
};

/// Re-checks every Dataset invariant and returns a copy of `d`.
Dataset validate_dataset(const Dataset& d);

// ---------------------------------------------------------------------------
// Prior
// ---------------------------------------------------------------------------

enum class ConstraintKind { Free, Rank1, Scaled };

struct ComponentConstraint {
  ConstraintKind kind = ConstraintKind::Free;
  Matrix base;  // only meaningful for Scaled

  static ComponentConstraint free() { return {}; }
  static ComponentConstraint rank1() { return {ConstraintKind::Rank1, {}}; }
  static ComponentConstraint scaled(Matrix base);
};

enum class PenaltyKind { None, InverseWishart, NuclearNorm };

struct Penalty {
  PenaltyKind kind = PenaltyKind::None;
  double lambda = 0.0;

  bool active() const { return kind != PenaltyKind::None; }
  static Penalty none() { return {}; }
  static Penalty inverse_wishart(double lambda);
  static Penalty nuclear_norm(double lambda);
};

const char* to_string(ConstraintKind kind);
const char* to_string(PenaltyKind kind);

/// Mixture of K zero-mean multivariate normals with per-component scale s_k.
///
/// The constructor validates and normalises: eigenvalues in
/// [-1e-10 * spectral radius, 0) are clamped to zero; anything more negative,
/// a weight vector off the simplex, or a U_k violating its constraint raises
/// InvariantViolation.
class MixturePrior {
 public:
  MixturePrior(Vector pi, std::vector<Matrix> U, Vector s,
               std::vector<ComponentConstraint> constraints);

  Eigen::Index K() const { return pi_.size(); }
  Eigen::Index dim() const { return U_.front().rows(); }
  const Vector& pi() const { return pi_; }
  const std::vector<Matrix>& U() const { return U_; }
  const Matrix& U(Eigen::Index k) const { return U_[k]; }
  const Vector& s() const { return s_; }
  const std::vector<ComponentConstraint>& constraints() const { return constraints_; }

 private:
  Vector pi_;
  std::vector<Matrix> U_;
  Vector s_;
  std::vector<ComponentConstraint> constraints_;
};

// ---------------------------------------------------------------------------
// Fit configuration and trace
// ---------------------------------------------------------------------------

enum class Algorithm { TED, ED, FA };
const char* to_string(Algorithm a);

struct FitConfig {
  Algorithm algorithm = Algorithm::TED;
  Penalty penalty;
  int maxIterations = 2000;
  double tolerance = 0.01;
  int warmStartEDIterations = 0;
  std::uint64_t seed = 1;
  int K = 1;
  int threads = 1;  // 0 means hardware concurrency
};

/// Throws InvalidConfig when the algorithm/penalty/constraint/noise
/// combination is not supported.
void validate_fit_config(const FitConfig& cfg, const Dataset& d,
                         const std::vector<ComponentConstraint>& constraints);

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;
  double seconds = 0.0;
};

struct FitTrace {
  std::vector<TracePoint> warmStart;
  std::vector<TracePoint> perIteration;  // entry 0 is the starting point
  bool converged = false;
  int iterationsRun = 0;
};

}  // namespace ebmnm
