#include "jdrdl/model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace jdrdl {

LabeledDataset::LabeledDataset(std::vector<SpdMatrix> samples, std::vector<int> labels,
                               int num_classes)
    : samples_(std::move(samples)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (samples_.empty() || samples_.size() != labels_.size()) {
    throw std::invalid_argument("LabeledDataset: need matching nonempty samples and labels");
  }
  if (num_classes_ < 1) {
    throw std::invalid_argument("LabeledDataset: need at least one class");
  }
  class_counts_.assign(num_classes_, 0);
  const int m = samples_.front().dim();
  for (std::size_t n = 0; n < samples_.size(); ++n) {
    if (samples_[n].dim() != m) {
      throw std::invalid_argument("LabeledDataset: mixed sample dimensions");
    }
    const int k = labels_[n];
    if (k < 0 || k >= num_classes_) {
      throw std::invalid_argument("LabeledDataset: label out of range");
    }
    ++class_counts_[k];
  }
  for (int k = 0; k < num_classes_; ++k) {
    if (class_counts_[k] == 0) {
      throw std::invalid_argument("LabeledDataset: class " + std::to_string(k) + " is empty");
    }
  }
}

std::vector<int> LabeledDataset::class_indices(int k) const {
  std::vector<int> out;
  for (int n = 0; n < size(); ++n) {
    if (labels_[n] == k) out.push_back(n);
  }
  return out;
}

Dictionary::Dictionary(std::vector<std::vector<SpdMatrix>> sub_dicts) {
  if (sub_dicts.empty()) throw std::invalid_argument("Dictionary: no classes");
  int offset = 0;
  for (auto& block : sub_dicts) {
    if (block.empty()) throw std::invalid_argument("Dictionary: empty class block");
    counts_.push_back(static_cast<int>(block.size()));
    offsets_.push_back(offset);
    offset += counts_.back();
    for (auto& atom : block) atoms_.push_back(std::move(atom));
  }
  const int d = atoms_.front().dim();
  for (const auto& atom : atoms_) {
    if (atom.dim() != d) throw std::invalid_argument("Dictionary: mixed atom dimensions");
  }
}

int Dictionary::class_of_atom(int h) const {
  if (h < 0 || h >= total_atoms()) throw std::out_of_range("Dictionary: atom index");
  int k = num_classes() - 1;
  while (offsets_[k] > h) --k;
  return k;
}

void Dictionary::set_atom(int h, SpdMatrix value) {
  if (value.dim() != dim()) throw std::invalid_argument("Dictionary: atom dimension mismatch");
  atoms_.at(h) = std::move(value);
}

CoefficientMatrix::CoefficientMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.size() == 0) throw std::invalid_argument("CoefficientMatrix: empty");
  if ((entries_.array() < 0.0).any()) {
    throw std::invalid_argument("CoefficientMatrix: negative entry");
  }
}

void CoefficientMatrix::set_col(int n, const Vector& a) {
  if (a.size() != entries_.rows()) {
    throw std::invalid_argument("CoefficientMatrix: column length mismatch");
  }
  if ((a.array() < 0.0).any()) {
    throw std::invalid_argument("CoefficientMatrix: negative entry");
  }
  entries_.col(n) = a;
}

void HyperParams::validate(int ambient_dim) const {
  if (lambda_1 < 0 || lambda_2 < 0 || lambda_a < 0 || lambda_u < 0 || lambda_d_cross < 0 ||
      lambda_d_reg < 0 || sigma < 0) {
    throw std::invalid_argument("HyperParams: negative weight");
  }
  if (v_w < 0 || v_b < 0 || outer_rounds < 1 || atoms_per_class < 0) {
    throw std::invalid_argument("HyperParams: negative count");
  }
  if (d < 1 || d > ambient_dim || (!freeze_u && d >= ambient_dim)) {
    throw std::invalid_argument("HyperParams: reduced dimension must satisfy 1 <= d < m");
  }
}

namespace {

struct BlockRange {
  int begin;
  int end;
};

BlockRange select_block(const Dictionary& dict, const Vector& a, int class_restrict,
                        const char* who) {
  if (class_restrict < 0) {
    if (a.size() != dict.total_atoms()) {
      throw std::invalid_argument(std::string(who) + ": code length mismatch");
    }
    return {0, dict.total_atoms()};
  }
  if (class_restrict >= dict.num_classes()) {
    throw std::invalid_argument(std::string(who) + ": class index out of range");
  }
  const int begin = dict.class_offset(class_restrict);
  const int count = dict.atoms_in_class(class_restrict);
  if (a.size() != count) {
    throw std::invalid_argument(std::string(who) + ": restricted code length mismatch");
  }
  return {begin, begin + count};
}

}  // namespace

Matrix conic_raw(const Dictionary& dict, const Vector& a, int class_restrict) {
  const BlockRange range = select_block(dict, a, class_restrict, "conic_raw");
  Matrix s = Matrix::Zero(dict.dim(), dict.dim());
  for (int h = range.begin; h < range.end; ++h) {
    const double w = a[h - range.begin];
    if (w != 0.0) s += w * dict.atom(h).mat();
  }
  return s;
}

ConicResult conic_combine(const Dictionary& dict, const Vector& a, int class_restrict) {
  const BlockRange range = select_block(dict, a, class_restrict, "conic_combine");
  if ((a.array() < 0.0).any()) {
    throw std::invalid_argument("conic_combine: negative coefficient");
  }
  const int d = dict.dim();
  Matrix s = Matrix::Zero(d, d);
  double weyl_min = 0.0;
  double weyl_max = 0.0;
  for (int h = range.begin; h < range.end; ++h) {
    const double w = a[h - range.begin];
    if (w != 0.0) {
      s += w * dict.atom(h).mat();
      weyl_min += w * dict.atom(h).eig_min();
      weyl_max += w * dict.atom(h).eig_max();
    }
  }
  const double trace = s.trace();
  const double eps = kConicFloorRel * (trace > 0.0 ? trace : 1.0);

  if (weyl_max == 0.0) {
    return {SpdMatrix(eps * Matrix::Identity(d, d)), true, true, eps};
  }
  s = symmetrize(s);
  // Weyl: the smallest eigenvalue of a nonnegative combination is at least
  // the combination of the smallest eigenvalues; skip the floor check when
  // that bound already clears it.
  if (weyl_min > eps && weyl_min > kEigFloorRel * weyl_max) {
    return {SpdMatrix(std::move(s)), false, false, eps};
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < eps) {
    return {SpdMatrix(s + eps * Matrix::Identity(d, d)), true, false, eps};
  }
  return {SpdMatrix(std::move(s)), false, false, eps};
}

GraphSet build_graphs(const LabeledDataset& data, int v_w, int v_b) {
  const int n = data.size();
  if (v_w < 0 || v_b < 0) throw std::invalid_argument("build_graphs: negative neighbor count");
  if (v_w > 0) {
    const int min_class = *std::min_element(data.class_counts().begin(),
                                            data.class_counts().end());
    if (v_w >= min_class) {
      throw std::invalid_argument("build_graphs: v_w leaves no same-class pool");
    }
  }
  if (v_b > 0) {
    const int max_class = *std::max_element(data.class_counts().begin(),
                                            data.class_counts().end());
    if (v_b >= n - max_class) {
      throw std::invalid_argument("build_graphs: v_b leaves no other-class pool");
    }
  }

  Matrix dist = Matrix::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      dist(p, q) = dist(q, p) = airm_dist_sq(data.sample(p), data.sample(q));
    }
  }

  Eigen::MatrixXi g_w = Eigen::MatrixXi::Zero(n, n);
  Eigen::MatrixXi g_b = Eigen::MatrixXi::Zero(n, n);
  auto mark_nearest = [&](int q, bool same_class, int count, Eigen::MatrixXi& g) {
    if (count == 0) return;
    std::vector<int> pool;
    for (int p = 0; p < n; ++p) {
      if (p != q && (data.label(p) == data.label(q)) == same_class) pool.push_back(p);
    }
    std::sort(pool.begin(), pool.end(), [&](int x, int y) {
      if (dist(x, q) != dist(y, q)) return dist(x, q) < dist(y, q);
      return x < y;
    });
    for (int i = 0; i < count; ++i) {
      g(pool[i], q) = 1;
      g(q, pool[i]) = 1;
    }
  };
  for (int q = 0; q < n; ++q) {
    mark_nearest(q, true, v_w, g_w);
    mark_nearest(q, false, v_b, g_b);
  }

  GraphSet out;
  out.g_bin = (g_w - g_b).cast<double>();
  out.g_rd = out.g_bin;
  out.g_w = std::move(g_w);
  out.g_b = std::move(g_b);
  return out;
}

std::vector<SpdMatrix> project_dataset(const StiefelPoint& u, const LabeledDataset& data) {
  std::vector<SpdMatrix> out;
  out.reserve(data.size());
  for (int n = 0; n < data.size(); ++n) {
    out.emplace_back(symmetrize(u.mat().transpose() * data.sample(n).mat() * u.mat()));
  }
  return out;
}

double obj_Jd(const StiefelPoint& u, const Dictionary& dict, const CoefficientMatrix& a,
              const LabeledDataset& data, double lambda_d) {
  if (a.atoms() != dict.total_atoms() || a.samples() != data.size()) {
    throw std::invalid_argument("obj_Jd: coefficient shape mismatch");
  }
  const std::vector<SpdMatrix> proj = project_dataset(u, data);
  double total = 0.0;
  for (int n = 0; n < data.size(); ++n) {
    const int k = data.label(n);
    const Vector an = a.col(n);
    const ConicResult full = conic_combine(dict, an);
    const Vector ank = an.segment(dict.class_offset(k), dict.atoms_in_class(k));
    const ConicResult own = conic_combine(dict, ank, k);
    total += 0.5 * (airm_dist_sq(proj[n], full.matrix) + airm_dist_sq(proj[n], own.matrix));
    if (lambda_d != 0.0) {
      for (int j = 0; j < dict.num_classes(); ++j) {
        if (j == k) continue;
        const Vector anj = an.segment(dict.class_offset(j), dict.atoms_in_class(j));
        total += lambda_d * conic_raw(dict, anj, j).squaredNorm();
      }
    }
  }
  return total;
}

double obj_Ja(const CoefficientMatrix& a, const GraphSet& graphs) {
  const int n = a.samples();
  if (graphs.g_bin.rows() != n) throw std::invalid_argument("obj_Ja: graph size mismatch");
  double total = 0.0;
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      const double w = graphs.g_bin(p, q);
      if (w != 0.0) total += 0.5 * w * (a.col(p) - a.col(q)).squaredNorm();
    }
  }
  return total;
}

double obj_Ju(const StiefelPoint& u, const LabeledDataset& data, const GraphSet& graphs) {
  const int n = data.size();
  if (graphs.g_rd.rows() != n) throw std::invalid_argument("obj_Ju: graph size mismatch");
  const std::vector<SpdMatrix> proj = project_dataset(u, data);
  double total = 0.0;
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      const double w = graphs.g_rd(p, q) + graphs.g_rd(q, p);
      if (w != 0.0) total += 0.5 * w * airm_dist_sq(proj[p], proj[q]);
    }
  }
  return total;
}

Regularizers obj_regularizers(const CoefficientMatrix& a, const Dictionary& dict) {
  Regularizers out;
  out.r_s = a.mat().sum();
  out.r_r = a.mat().squaredNorm();
  out.r_d = 0.0;
  for (const auto& atom : dict.atoms()) out.r_d += atom.mat().trace();
  return out;
}

double full_objective(const StiefelPoint& u, const Dictionary& dict, const CoefficientMatrix& a,
                      const LabeledDataset& data, const GraphSet& graphs,
                      const HyperParams& hyper) {
  const Regularizers reg = obj_regularizers(a, dict);
  return obj_Jd(u, dict, a, data, hyper.lambda_d_cross) + hyper.lambda_a * obj_Ja(a, graphs) +
         hyper.lambda_u * obj_Ju(u, data, graphs) + hyper.lambda_1 * reg.r_s +
         hyper.lambda_2 * reg.r_r + hyper.lambda_d_reg * reg.r_d;
}

}  // namespace jdrdl
