#include "ebmnm/penalty.hpp"

#include "ebmnm/linalg.hpp"

#include <cmath>

namespace ebmnm {

double penalty_term(const Penalty& p, double a) {
  switch (p.kind) {
    case PenaltyKind::None: return 0.0;
    case PenaltyKind::InverseWishart: return 0.5 * p.lambda * (std::log(a) + 1.0 / a);
    case PenaltyKind::NuclearNorm: return 0.5 * p.lambda * (0.5 * a + 0.5 / a);
  }
  return 0.0;
}

Vector floor_eigenvalues(const Vector& values) {
  const double radius = values.cwiseAbs().maxCoeff();
  return values.cwiseMax(1e-8 * (radius + 1.0));
}

double penalty_value(const Penalty& p, const Matrix& U, double s) {
  if (!p.active()) return 0.0;
  const Vector e = floor_eigenvalues(eigen_desc(U).values);
  double total = 0.0;
  for (Eigen::Index r = 0; r < e.size(); ++r) total += penalty_term(p, e(r) / s);
  return total;
}

}  // namespace ebmnm
