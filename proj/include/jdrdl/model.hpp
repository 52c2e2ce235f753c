// Data containers and objective terms of the joint dimensionality reduction
// and dictionary learning model: labeled SPD datasets, class-blocked
// dictionaries, nonnegative coefficient matrices, neighborhood graphs, and
// every term of the training objective.
#pragma once

#include <optional>
#include <vector>

#include "jdrdl/spd.hpp"
#include "jdrdl/stiefel.hpp"

namespace jdrdl {

/// Relative floor applied to conic combinations of atoms so that distances to
/// them stay defined even for sparse (or empty) codes.
inline constexpr double kConicFloorRel = 1e-10;

/// N samples of m x m SPD matrices with integer labels in 0..K-1. Every class
/// must own at least one sample.
class LabeledDataset {
 public:
  LabeledDataset(std::vector<SpdMatrix> samples, std::vector<int> labels, int num_classes);

  int size() const noexcept { return static_cast<int>(samples_.size()); }
  int dim() const noexcept { return samples_.front().dim(); }
  int num_classes() const noexcept { return num_classes_; }
  const SpdMatrix& sample(int n) const { return samples_.at(n); }
  int label(int n) const { return labels_.at(n); }
  const std::vector<int>& class_counts() const noexcept { return class_counts_; }
  std::vector<int> class_indices(int k) const;

 private:
  std::vector<SpdMatrix> samples_;
  std::vector<int> labels_;
  int num_classes_;
  std::vector<int> class_counts_;
};

/// K class sub-dictionaries of d x d SPD atoms, stored flat with class
/// offsets so that atom h and the rows of a coefficient matrix line up.
class Dictionary {
 public:
  explicit Dictionary(std::vector<std::vector<SpdMatrix>> sub_dicts);

  int num_classes() const noexcept { return static_cast<int>(counts_.size()); }
  int dim() const noexcept { return atoms_.front().dim(); }
  int total_atoms() const noexcept { return static_cast<int>(atoms_.size()); }
  int atoms_in_class(int k) const { return counts_.at(k); }
  int class_offset(int k) const { return offsets_.at(k); }
  int class_of_atom(int h) const;
  const SpdMatrix& atom(int h) const { return atoms_.at(h); }
  const std::vector<SpdMatrix>& atoms() const noexcept { return atoms_; }
  void set_atom(int h, SpdMatrix value);

 private:
  std::vector<SpdMatrix> atoms_;
  std::vector<int> counts_;
  std::vector<int> offsets_;
};

/// H x N nonnegative code matrix whose row blocks mirror a Dictionary.
class CoefficientMatrix {
 public:
  explicit CoefficientMatrix(Matrix entries);
  static CoefficientMatrix zero(int atoms, int samples) {
    return CoefficientMatrix(Matrix::Zero(atoms, samples));
  }

  const Matrix& mat() const noexcept { return entries_; }
  int atoms() const noexcept { return static_cast<int>(entries_.rows()); }
  int samples() const noexcept { return static_cast<int>(entries_.cols()); }
  Vector col(int n) const { return entries_.col(n); }
  void set_col(int n, const Vector& a);

 private:
  Matrix entries_;
};

/// Intra-class (g_w) and inter-class (g_b) nearest-neighbor graphs, their
/// signed difference g_bin, and the affinity g_rd used by the projection
/// alignment term.
struct GraphSet {
  Eigen::MatrixXi g_w;
  Eigen::MatrixXi g_b;
  Matrix g_bin;
  Matrix g_rd;
};

struct HyperParams {
  double lambda_1 = 1e-4;       // sparsity weight
  double lambda_2 = 1e-3;       // code ridge weight
  double lambda_a = 1e-4;       // code graph alignment weight
  double lambda_u = 1e-3;       // projection graph alignment weight
  double lambda_d_cross = 1e-3; // cross-class reconstruction suppression
  double lambda_d_reg = 1e-3;   // atom trace penalty weight
  double sigma = 1.0;           // classifier code-mean residual weight
  int v_w = 1;                  // intra-class neighbor count
  int v_b = 1;                  // inter-class neighbor count
  int d = 0;                    // reduced dimension
  int outer_rounds = 10;
  double rel_change_tol = 1e-5;

  enum class UInit { MeanEigvecs, Random };
  UInit u_init = UInit::MeanEigvecs;
  int atoms_per_class = 0;      // 0: one atom per training sample
  bool freeze_u = false;        // keep U fixed (plain dictionary learning)

  void validate(int ambient_dim) const;
};

/// The trained model: projection, dictionary, training codes, per-class mean
/// code vectors, and the hyperparameters that produced them.
struct JdrdlModel {
  StiefelPoint u;
  Dictionary dict;
  CoefficientMatrix a_train;
  std::vector<Vector> class_means;
  HyperParams hyper;
};

/// Plain weighted sum of atoms (no floor). class_restrict selects one class
/// block, in which case a has length H_k and pairs with that block.
Matrix conic_raw(const Dictionary& dict, const Vector& a, int class_restrict = -1);

struct ConicResult {
  SpdMatrix matrix;
  bool floored;      // eigenvalue floor was added
  bool degenerate;   // every coefficient in the selected block was zero
  double eps_floor;
};

/// Weighted sum of atoms, floored to stay strictly SPD: when the smallest
/// eigenvalue of the raw sum falls below eps = kConicFloorRel * trace (or the
/// sum is zero, where eps = kConicFloorRel), eps * I is added.
ConicResult conic_combine(const Dictionary& dict, const Vector& a, int class_restrict = -1);

/// Builds the intra/inter-class nearest-neighbor graphs under the ambient
/// AIRM distance. An edge appears when either endpoint ranks the other among
/// its v nearest (distance ties broken by sample index). v_w and v_b may be
/// zero for an empty graph; positive counts must leave enough same-class
/// (resp. other-class) partners for every sample.
GraphSet build_graphs(const LabeledDataset& data, int v_w, int v_b);

/// Discriminative reconstruction cost: for each sample, half the squared
/// distances of the projected sample to its full-dictionary and own-class
/// reconstructions, plus lambda_d times the squared Frobenius norm of every
/// foreign-class raw reconstruction.
double obj_Jd(const StiefelPoint& u, const Dictionary& dict, const CoefficientMatrix& a,
              const LabeledDataset& data, double lambda_d);

/// Code graph alignment: sum over ordered pairs of (1/2)||a_p - a_q||^2
/// weighted by the signed graph.
double obj_Ja(const CoefficientMatrix& a, const GraphSet& graphs);

/// Projection graph alignment: sum over ordered pairs of half the squared
/// reduced-space distance weighted by the affinity graph.
double obj_Ju(const StiefelPoint& u, const LabeledDataset& data, const GraphSet& graphs);

struct Regularizers {
  double r_s;  // sum of code entries
  double r_r;  // squared Frobenius norm of the codes
  double r_d;  // summed atom traces
};

Regularizers obj_regularizers(const CoefficientMatrix& a, const Dictionary& dict);

/// Full training objective.
double full_objective(const StiefelPoint& u, const Dictionary& dict, const CoefficientMatrix& a,
                      const LabeledDataset& data, const GraphSet& graphs,
                      const HyperParams& hyper);

/// Projects every sample into the reduced space: sym(U^T X_n U).
std::vector<SpdMatrix> project_dataset(const StiefelPoint& u, const LabeledDataset& data);

}  // namespace jdrdl
