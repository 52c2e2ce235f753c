// Matrix functions and Riemannian geometry primitives for the manifold of
// symmetric positive definite matrices under the affine-invariant metric.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace jdrdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative floor below which an eigenvalue is treated as zero by matrix
/// functions that require strict positive definiteness.
inline constexpr double kEigFloorRel = 1e-12;

/// Thrown when a matrix function meets an eigenvalue at or below its floor.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double eigenvalue)
      : std::runtime_error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

inline Matrix symmetrize(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

/// Max-abs asymmetry of m relative to its largest entry.
double relative_asymmetry(const Matrix& m);

/// A symmetric matrix viewed as a tangent vector to the SPD manifold.
class SymTangent {
 public:
  explicit SymTangent(Matrix entries);
  static SymTangent zero(int dim) { return SymTangent(Matrix::Zero(dim, dim)); }

  const Matrix& mat() const noexcept { return entries_; }
  int dim() const noexcept { return static_cast<int>(entries_.rows()); }

 private:
  Matrix entries_;
};

/// Dense symmetric positive definite matrix with a verified spectrum.
/// Construction fails unless the matrix is symmetric (1e-12 relative) and its
/// smallest eigenvalue clears the relative floor.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix entries);
  static SpdMatrix identity(int dim) { return SpdMatrix(Matrix::Identity(dim, dim)); }

  const Matrix& mat() const noexcept { return entries_; }
  int dim() const noexcept { return static_cast<int>(entries_.rows()); }

  // Extremal eigenvalues captured by the construction-time check.
  double eig_min() const noexcept { return eig_min_; }
  double eig_max() const noexcept { return eig_max_; }

 private:
  Matrix entries_;
  double eig_min_ = 0.0;
  double eig_max_ = 0.0;
};

/// Eigendecomposition of a symmetric matrix. Eigenvalues ascending,
/// eigenvectors orthonormal columns. Throws std::invalid_argument on
/// non-symmetric input.
std::pair<Vector, Matrix> sym_eig(const Matrix& m);

enum class SpdFn { Log, ExpOfSym, Sqrt, InvSqrt, Inv };

/// Applies f to the spectrum: Q f(diag) Q^T. Log/Sqrt/InvSqrt/Inv demand a
/// spectrum above the relative floor and throw SingularityError otherwise.
Matrix spd_fn(const Matrix& m, SpdFn fn);

/// AIRM inner product <V,W>_P = <P^{-1/2} V P^{-1/2}, P^{-1/2} W P^{-1/2}>_F.
double airm_inner(const SpdMatrix& p, const SymTangent& v, const SymTangent& w);

/// Squared geodesic distance under the AIRM: sum of squared log generalized
/// eigenvalues of the pencil (b, a).
double airm_dist_sq(const SpdMatrix& a, const SpdMatrix& b);

/// Symmetric Stein divergence ln det((A+B)/2) - (1/2) ln det(AB).
double stein_dist_sq(const SpdMatrix& a, const SpdMatrix& b);

/// Converts a symmetrized Euclidean gradient into the Riemannian gradient at
/// d: returns d * egrad * d.
SymTangent egrad_to_rgrad_spd(const SpdMatrix& d, const SymTangent& egrad);

/// Exponential-map retraction D^{1/2} exp(t D^{-1/2} V D^{-1/2}) D^{1/2}.
SpdMatrix spd_retract(const SpdMatrix& d, const SymTangent& v, double t);

/// Cached eigenfactorization of an SPD matrix; serves repeated fractional
/// powers of the same base point.
struct SpdEigen {
  Vector evals;
  Matrix evecs;

  explicit SpdEigen(const Matrix& spd);
  Matrix pow(double exponent) const;
  Matrix sqrt() const { return pow(0.5); }
  Matrix inv_sqrt() const { return pow(-0.5); }
};

}  // namespace jdrdl
