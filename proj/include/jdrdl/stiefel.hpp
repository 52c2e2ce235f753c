// Geometry of the Stiefel manifold St(d,m) under the embedded metric:
// tangent projection, QR retraction, projection-based vector transport.
#pragma once

#include "jdrdl/spd.hpp"

namespace jdrdl {

/// An m x d matrix with orthonormal columns (d <= m). Construction verifies
/// U^T U = I to 1e-10 Frobenius.
class StiefelPoint {
 public:
  explicit StiefelPoint(Matrix entries);
  /// First d columns of the m x m identity.
  static StiefelPoint identity(int m, int d);

  const Matrix& mat() const noexcept { return entries_; }
  int ambient_dim() const noexcept { return static_cast<int>(entries_.rows()); }
  int reduced_dim() const noexcept { return static_cast<int>(entries_.cols()); }

 private:
  Matrix entries_;
};

/// Tangent direction to St(d,m). Tangency at a base point U means
/// U^T V + V^T U = 0; construction sites guarantee it.
class StiefelTangent {
 public:
  explicit StiefelTangent(Matrix entries) : entries_(std::move(entries)) {}
  static StiefelTangent zero(int m, int d) { return StiefelTangent(Matrix::Zero(m, d)); }

  const Matrix& mat() const noexcept { return entries_; }

 private:
  Matrix entries_;
};

/// Orthogonal projection of an ambient direction onto the tangent space at u:
/// Z - U sym(U^T Z).
StiefelTangent project_tangent(const StiefelPoint& u, const Matrix& z);

/// True when U^T V + V^T U vanishes to the stated tolerance.
bool is_tangent_at(const StiefelPoint& u, const StiefelTangent& v, double tol = 1e-10);

/// QR retraction: thin QR of U + tV with the diagonal of R forced positive.
/// Throws std::runtime_error when U + tV is numerically rank deficient.
StiefelPoint retract_qr(const StiefelPoint& u, const StiefelTangent& v, double t);

/// Projection-based vector transport to the tangent space at u_new.
StiefelTangent transport(const StiefelPoint& u_new, const StiefelTangent& v);

}  // namespace jdrdl
