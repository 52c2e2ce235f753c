#include "jdrdl/stiefel.hpp"

#include <Eigen/QR>

#include <cmath>

namespace jdrdl {

StiefelPoint::StiefelPoint(Matrix entries) : entries_(std::move(entries)) {
  const auto m = entries_.rows();
  const auto d = entries_.cols();
  if (m == 0 || d == 0 || d > m) {
    throw std::invalid_argument("StiefelPoint: need 1 <= d <= m");
  }
  const Matrix gram = entries_.transpose() * entries_;
  const double defect = (gram - Matrix::Identity(d, d)).norm();
  if (defect > 1e-10) {
    throw std::invalid_argument("StiefelPoint: columns not orthonormal (defect " +
                                std::to_string(defect) + ")");
  }
}

StiefelPoint StiefelPoint::identity(int m, int d) {
  return StiefelPoint(Matrix::Identity(m, m).leftCols(d));
}

StiefelTangent project_tangent(const StiefelPoint& u, const Matrix& z) {
  if (z.rows() != u.ambient_dim() || z.cols() != u.reduced_dim()) {
    throw std::invalid_argument("project_tangent: shape mismatch");
  }
  const Matrix utz = u.mat().transpose() * z;
  return StiefelTangent(z - u.mat() * symmetrize(utz));
}

bool is_tangent_at(const StiefelPoint& u, const StiefelTangent& v, double tol) {
  const Matrix s = u.mat().transpose() * v.mat();
  return (s + s.transpose()).norm() <= tol;
}

StiefelPoint retract_qr(const StiefelPoint& u, const StiefelTangent& v, double t) {
  if (t == 0.0) return u;
  if (v.mat().rows() != u.ambient_dim() || v.mat().cols() != u.reduced_dim()) {
    throw std::invalid_argument("retract_qr: shape mismatch");
  }
  const Matrix stepped = u.mat() + t * v.mat();
  Eigen::HouseholderQR<Matrix> qr(stepped);
  const int d = u.reduced_dim();
  const Matrix r = qr.matrixQR().topLeftCorner(d, d).triangularView<Eigen::Upper>();
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  for (int i = 0; i < d; ++i) {
    if (std::abs(r(i, i)) <= 1e-12 * rmax) {
      throw std::runtime_error("retract_qr: U + tV is rank deficient");
    }
  }
  Matrix q = qr.householderQ() * Matrix::Identity(u.ambient_dim(), d);
  for (int i = 0; i < d; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return StiefelPoint(std::move(q));
}

StiefelTangent transport(const StiefelPoint& u_new, const StiefelTangent& v) {
  return project_tangent(u_new, v.mat());
}

}  // namespace jdrdl
