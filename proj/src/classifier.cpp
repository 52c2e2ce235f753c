#include "jdrdl/classifier.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "jdrdl/train.hpp"

namespace jdrdl {
namespace {

double obj_impl(const Dictionary& dict, const SpdEigen& m_eig, const Vector& a,
                double lambda_1) {
  const ConicResult res = conic_combine(dict, a);
  return 0.5 * dist_sq_grads(m_eig, res.matrix.mat(), false, false).d2 + lambda_1 * a.sum();
}

Vector grad_impl(const Dictionary& dict, const SpdEigen& m_eig, const Vector& a,
                 double lambda_1) {
  const int h = dict.total_atoms();
  Vector grad = Vector::Constant(h, lambda_1);
  const ConicResult res = conic_combine(dict, a);
  if (res.floored) return grad;  // the floor is locally constant in a
  const Matrix g_s = dist_sq_grads(m_eig, res.matrix.mat(), false, true).g_s;
  for (int i = 0; i < h; ++i) {
    grad[i] += 0.5 * g_s.cwiseProduct(dict.atom(i).mat()).sum();
  }
  return grad;
}

EncodeResult encode_impl(const Dictionary& dict, const SpdMatrix& m_x, double lambda_1,
                         const SpgOptions& opts) {
  const SpdEigen m_eig(m_x.mat());
  const int h = dict.total_atoms();
  const auto cost = [&](const Vector& a) { return obj_impl(dict, m_eig, a, lambda_1); };
  const auto grad = [&](const Vector& a) { return grad_impl(dict, m_eig, a, lambda_1); };

  const NonnegVector start{Vector::Constant(h, 1.0 / h)};
  const SpgResult solved = spg_solve(cost, grad, start, opts);

  // The all-zero code is a fixed point of the floored objective, so the
  // solver never reaches it; admit it as an explicit candidate.
  const Vector zero = Vector::Zero(h);
  if (cost(zero) < cost(solved.x.vec()) || solved.x.vec().maxCoeff() <= 0.0) {
    return EncodeResult{NonnegVector(zero), true};
  }
  return EncodeResult{solved.x, false};
}

SpdMatrix project_sample(const StiefelPoint& u, const SpdMatrix& x) {
  return SpdMatrix(symmetrize(u.mat().transpose() * x.mat() * u.mat()));
}

}  // namespace

double coding_objective(const Dictionary& dict, const SpdMatrix& m_x, const Vector& a,
                        double lambda_1) {
  return obj_impl(dict, SpdEigen(m_x.mat()), a, lambda_1);
}

Vector coding_gradient(const Dictionary& dict, const SpdMatrix& m_x, const Vector& a,
                       double lambda_1) {
  return grad_impl(dict, SpdEigen(m_x.mat()), a, lambda_1);
}

EncodeResult encode_over(const Dictionary& dict, const SpdMatrix& m_x, double lambda_1,
                         const SpgOptions& opts) {
  if (m_x.dim() != dict.dim()) {
    throw std::invalid_argument("encode_over: sample dimension does not match the dictionary");
  }
  return encode_impl(dict, m_x, lambda_1, opts);
}

EncodeResult encode_test(const JdrdlModel& model, const SpdMatrix& x, const SpgOptions& opts) {
  if (x.dim() != model.u.ambient_dim()) {
    throw std::invalid_argument("encode_test: sample dimension does not match the model");
  }
  return encode_impl(model.dict, project_sample(model.u, x), model.hyper.lambda_1, opts);
}

double residual(const JdrdlModel& model, const SpdMatrix& x, const Vector& code, int k) {
  if (k < 0 || k >= model.dict.num_classes()) {
    throw std::out_of_range("residual: class index out of range");
  }
  if (code.size() != model.dict.total_atoms()) {
    throw std::invalid_argument("residual: code length does not match the dictionary");
  }
  const SpdMatrix m_x = project_sample(model.u, x);
  const Vector block = code.segment(model.dict.class_offset(k), model.dict.atoms_in_class(k));
  const ConicResult recon = conic_combine(model.dict, block, k);
  const double dev = (code - model.class_means.at(k)).squaredNorm();
  return airm_dist_sq(m_x, recon.matrix) + model.hyper.sigma * dev;
}

Prediction predict(const JdrdlModel& model, const SpdMatrix& x, const SpgOptions& opts) {
  const EncodeResult enc = encode_test(model, x, opts);
  const int k = model.dict.num_classes();
  Vector residuals(k);
  for (int c = 0; c < k; ++c) residuals[c] = residual(model, x, enc.code.vec(), c);
  int label = 0;
  for (int c = 1; c < k; ++c) {
    if (residuals[c] < residuals[label]) label = c;
  }
  return Prediction{label, residuals, enc.code, enc.degenerate};
}

int nn_predict(const LabeledDataset& train, const SpdMatrix& x, NnMetric metric) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int n = 0; n < train.size(); ++n) {
    const double d = metric == NnMetric::Airm ? airm_dist_sq(train.sample(n), x)
                                              : stein_dist_sq(train.sample(n), x);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return train.label(best);
}

SrcModel make_src_model(const LabeledDataset& train) {
  std::vector<std::vector<SpdMatrix>> blocks(train.num_classes());
  for (int k = 0; k < train.num_classes(); ++k) {
    for (int idx : train.class_indices(k)) blocks[k].push_back(train.sample(idx));
  }
  return SrcModel{Dictionary(std::move(blocks))};
}

int src_predict(const SrcModel& src, const SpdMatrix& x, double lambda_1,
                const SpgOptions& opts) {
  const EncodeResult enc = encode_over(src.dict, x, lambda_1, opts);
  int label = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < src.dict.num_classes(); ++k) {
    const Vector block =
        enc.code.vec().segment(src.dict.class_offset(k), src.dict.atoms_in_class(k));
    const ConicResult recon = conic_combine(src.dict, block, k);
    const double e = airm_dist_sq(x, recon.matrix);
    if (e < best) {
      best = e;
      label = k;
    }
  }
  return label;
}

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions,
                           const std::vector<int>& true_labels) {
  if (predictions.size() != true_labels.size()) {
    throw std::invalid_argument("write_predictions_csv: row count mismatch");
  }
  const int k = predictions.empty() ? 0 : static_cast<int>(predictions.front().residuals.size());
  out << "sample_id,true_label,predicted_label";
  for (int c = 0; c < k; ++c) out << ",residual_" << c;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out << i << ',' << true_labels[i] << ',' << predictions[i].label;
    for (int c = 0; c < k; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", predictions[i].residuals[c]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace jdrdl
