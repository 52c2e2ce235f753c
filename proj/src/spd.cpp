#include "jdrdl/spd.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace jdrdl {

namespace {

void require_square(const Matrix& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument(std::string(who) + ": matrix must be square and nonempty");
  }
}

void require_symmetric(const Matrix& m, const char* who) {
  require_square(m, who);
  if (relative_asymmetry(m) > 1e-12) {
    throw std::invalid_argument(std::string(who) + ": matrix is not symmetric");
  }
}

void require_same_dim(int a, int b, const char* who) {
  if (a != b) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("log_det: Cholesky factorization failed", 0.0);
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

double relative_asymmetry(const Matrix& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

SymTangent::SymTangent(Matrix entries) : entries_(std::move(entries)) {
  require_symmetric(entries_, "SymTangent");
}

SpdMatrix::SpdMatrix(Matrix entries) : entries_(std::move(entries)) {
  require_symmetric(entries_, "SpdMatrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(entries_, Eigen::EigenvaluesOnly);
  eig_min_ = es.eigenvalues().minCoeff();
  eig_max_ = es.eigenvalues().maxCoeff();
  if (!(eig_min_ > 0.0) || eig_min_ <= kEigFloorRel * eig_max_) {
    throw SingularityError("SpdMatrix: smallest eigenvalue " + std::to_string(eig_min_) +
                               " below positive-definiteness floor",
                           eig_min_);
  }
}

std::pair<Vector, Matrix> sym_eig(const Matrix& m) {
  require_symmetric(m, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sym_eig: eigensolver failed to converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

Matrix spd_fn(const Matrix& m, SpdFn fn) {
  auto [evals, evecs] = sym_eig(m);
  const int n = static_cast<int>(evals.size());
  const double floor = kEigFloorRel * evals.maxCoeff();

  Vector mapped(n);
  for (int i = 0; i < n; ++i) {
    const double x = evals[i];
    switch (fn) {
      case SpdFn::ExpOfSym:
        mapped[i] = std::exp(x);
        break;
      case SpdFn::Log:
      case SpdFn::Sqrt:
      case SpdFn::InvSqrt:
      case SpdFn::Inv:
        if (!(x > 0.0) || x <= floor) {
          throw SingularityError("spd_fn: eigenvalue " + std::to_string(x) +
                                     " at or below relative floor",
                                 x);
        }
        if (fn == SpdFn::Log) mapped[i] = std::log(x);
        else if (fn == SpdFn::Sqrt) mapped[i] = std::sqrt(x);
        else if (fn == SpdFn::InvSqrt) mapped[i] = 1.0 / std::sqrt(x);
        else mapped[i] = 1.0 / x;
        break;
    }
  }
  return symmetrize(evecs * mapped.asDiagonal() * evecs.transpose());
}

double airm_inner(const SpdMatrix& p, const SymTangent& v, const SymTangent& w) {
  require_same_dim(p.dim(), v.dim(), "airm_inner");
  require_same_dim(p.dim(), w.dim(), "airm_inner");
  Eigen::LLT<Matrix> llt(p.mat());
  const Matrix pv = llt.solve(v.mat());
  const Matrix pw = llt.solve(w.mat());
  return pv.cwiseProduct(pw.transpose()).sum();
}

double airm_dist_sq(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "airm_dist_sq");
  // Generalized eigenvalues of b x = lambda a x are the eigenvalues of a^{-1} b.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(b.mat(), a.mat(),
                                                       Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  double sum = 0.0;
  for (int i = 0; i < ges.eigenvalues().size(); ++i) {
    const double lg = std::log(std::max(ges.eigenvalues()[i], std::numeric_limits<double>::min()));
    sum += lg * lg;
  }
  return sum;
}

double stein_dist_sq(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "stein_dist_sq");
  const Matrix mid = 0.5 * (a.mat() + b.mat());
  return log_det_spd(mid) - 0.5 * (log_det_spd(a.mat()) + log_det_spd(b.mat()));
}

SymTangent egrad_to_rgrad_spd(const SpdMatrix& d, const SymTangent& egrad) {
  require_same_dim(d.dim(), egrad.dim(), "egrad_to_rgrad_spd");
  return SymTangent(symmetrize(d.mat() * egrad.mat() * d.mat()));
}

SpdMatrix spd_retract(const SpdMatrix& d, const SymTangent& v, double t) {
  require_same_dim(d.dim(), v.dim(), "spd_retract");
  if (t == 0.0) return d;
  SpdEigen base(d.mat());
  const Matrix half = base.sqrt();
  const Matrix inv_half = base.inv_sqrt();
  const Matrix w = symmetrize(inv_half * (t * v.mat()) * inv_half);
  const Matrix e = spd_fn(w, SpdFn::ExpOfSym);
  return SpdMatrix(symmetrize(half * e * half));
}

SpdEigen::SpdEigen(const Matrix& spd) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(spd);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("SpdEigen: eigensolver failed to converge");
  }
  evals = es.eigenvalues();
  evecs = es.eigenvectors();
}

Matrix SpdEigen::pow(double exponent) const {
  Vector mapped(evals.size());
  for (int i = 0; i < evals.size(); ++i) {
    const double x = evals[i];
    if (!(x > 0.0)) {
      throw SingularityError("SpdEigen::pow: nonpositive eigenvalue", x);
    }
    mapped[i] = std::pow(x, exponent);
  }
  return symmetrize(evecs * mapped.asDiagonal() * evecs.transpose());
}

}  // namespace jdrdl
