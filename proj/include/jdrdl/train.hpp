// Training machinery: Euclidean gradients of the dictionary-learning
// sub-problem, the per-column coding objective, both sub-problem solvers, and
// the alternating trainer.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jdrdl/model.hpp"
#include "jdrdl/rcg.hpp"
#include "jdrdl/rng.hpp"
#include "jdrdl/spg.hpp"

namespace jdrdl {

/// Squared AIRM distance together with the Euclidean gradients with respect
/// to either argument: for W = M^{-1/2} S M^{-1/2} with eigen pairs (l, Q),
/// grad_M = -2 M^{-1/2} Q diag(log l) Q^T M^{-1/2} and
/// grad_S =  2 M^{-1/2} Q diag(log l / l) Q^T M^{-1/2}.
struct DistGrads {
  double d2;
  Matrix g_m;  // empty unless requested
  Matrix g_s;  // empty unless requested
};
DistGrads dist_sq_grads(const SpdEigen& m_eig, const Matrix& s, bool need_m, bool need_s);

/// Objective of the dictionary-learning sub-problem (codes fixed): the
/// discriminative reconstruction term, the weighted projection alignment
/// term, and the atom trace penalty.
double dl_objective(const StiefelPoint& u, const Dictionary& dict, const CoefficientMatrix& a,
                    const LabeledDataset& data, const GraphSet& graphs,
                    const HyperParams& hyper);

struct DlGradient {
  Matrix egrad_u;                  // m x d
  std::vector<Matrix> egrad_atoms; // H symmetric d x d matrices
};

/// Euclidean gradients of dl_objective with respect to U and every atom.
/// Floored reconstruction terms contribute no atom gradient (the floor is
/// treated as locally constant) but keep their projection-side gradient.
DlGradient egrad_dl(const StiefelPoint& u, const Dictionary& dict, const LabeledDataset& data,
                    const CoefficientMatrix& a, const GraphSet& graphs,
                    const HyperParams& hyper);

struct DlOutcome {
  StiefelPoint u;
  Dictionary dict;
  RcgStatus status;
  std::vector<RcgTraceRow> trace;
};

/// Riemannian conjugate gradient descent on (U, atoms) with the codes fixed.
/// The returned objective never exceeds the entering one. With
/// hyper.freeze_u set, the projection component of the gradient is masked and
/// U stays at its entering value.
DlOutcome solve_dl_subproblem(const StiefelPoint& u, const Dictionary& dict,
                              const CoefficientMatrix& a, const LabeledDataset& data,
                              const GraphSet& graphs, const HyperParams& hyper,
                              const RcgOptions& opts);

/// Fixed (U, dictionary) view for one coding pass: caches the projected
/// samples and their eigenfactorizations, and evaluates the per-column
/// objective and gradient.
class ScContext {
 public:
  ScContext(const StiefelPoint& u, const Dictionary& dict, const LabeledDataset& data,
            const GraphSet& graphs, const HyperParams& hyper);

  /// Per-column objective: half the two reconstruction distances, the raw
  /// cross-class suppression, the graph alignment restricted to column n
  /// (both pair orders, hence no half), the l1 term, and the ridge.
  double psi(int n, const Vector& a, const Matrix& a_all) const;

  /// Gradient of psi in a. Floored reconstruction terms contribute zero.
  Vector psi_grad(int n, const Vector& a, const Matrix& a_all) const;

  const SpdMatrix& projected(int n) const { return proj_.at(n); }
  int atoms() const { return dict_.total_atoms(); }

 private:
  const Dictionary& dict_;
  const LabeledDataset& data_;
  const GraphSet& graphs_;
  const HyperParams& hyper_;
  std::vector<SpdMatrix> proj_;
  std::vector<SpdEigen> proj_eig_;
};

/// One Gauss-Seidel pass over the columns in index order. Each column is
/// solved by the projected-gradient solver warm-started from its current
/// value (or a uniform positive vector when the current column is all zero);
/// a column is committed only when it does not increase its objective, so the
/// full objective is non-increasing.
CoefficientMatrix solve_sc_subproblem(const StiefelPoint& u, const Dictionary& dict,
                                      CoefficientMatrix a, const LabeledDataset& data,
                                      const GraphSet& graphs, const HyperParams& hyper,
                                      const SpgOptions& opts);

/// Deterministic projection initializer: top-d eigenvectors of the arithmetic
/// mean of the training samples (sign-fixed), or a seeded random orthonormal
/// basis.
StiefelPoint init_projection(const LabeledDataset& data, int d, HyperParams::UInit mode,
                             Rng& rng);

/// Class atoms: the projected class samples themselves when the requested
/// count matches the class size, otherwise exponential-map perturbations of
/// the projected class mean.
Dictionary init_dictionary(const std::vector<SpdMatrix>& projected, const LabeledDataset& data,
                           int atoms_per_class, Rng& rng);

struct TrainResult {
  JdrdlModel model;
  /// Full objective after initialization and after every half-step.
  std::vector<double> objective_trace;
  std::vector<std::string> warnings;
};

/// Alternating training: initialize U, atoms, and codes, then repeat
/// [dictionary half-step; coding half-step] for hyper.outer_rounds rounds or
/// until the relative objective change drops below hyper.rel_change_tol.
TrainResult train(const LabeledDataset& data, const HyperParams& hyper, std::uint64_t seed,
                  const RcgOptions& rcg_opts = {}, const SpgOptions& spg_opts = {});

}  // namespace jdrdl
