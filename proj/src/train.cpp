#include "jdrdl/train.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace jdrdl {

DistGrads dist_sq_grads(const SpdEigen& m_eig, const Matrix& s, bool need_m, bool need_s) {
  const Matrix inv_half = m_eig.inv_sqrt();
  const Matrix w = symmetrize(inv_half * s * inv_half);
  auto [evals, q] = sym_eig(w);

  DistGrads out;
  out.d2 = 0.0;
  Vector log_l(evals.size());
  for (int i = 0; i < evals.size(); ++i) {
    if (!(evals[i] > 0.0)) {
      throw SingularityError("dist_sq_grads: nonpositive eigenvalue of the matrix pencil",
                             evals[i]);
    }
    log_l[i] = std::log(evals[i]);
    out.d2 += log_l[i] * log_l[i];
  }
  if (need_m) {
    out.g_m = symmetrize(-2.0 * inv_half * q * log_l.asDiagonal() * q.transpose() * inv_half);
  }
  if (need_s) {
    const Vector ratio = log_l.cwiseQuotient(evals);
    out.g_s = symmetrize(2.0 * inv_half * q * ratio.asDiagonal() * q.transpose() * inv_half);
  }
  return out;
}

namespace {

std::vector<SpdEigen> eigens_of(const std::vector<SpdMatrix>& mats) {
  std::vector<SpdEigen> out;
  out.reserve(mats.size());
  for (const auto& m : mats) out.emplace_back(m.mat());
  return out;
}

Dictionary dict_with_atoms(const Dictionary& proto, std::vector<SpdMatrix> atoms) {
  std::vector<std::vector<SpdMatrix>> blocks(proto.num_classes());
  int h = 0;
  for (int k = 0; k < proto.num_classes(); ++k) {
    blocks[k].reserve(proto.atoms_in_class(k));
    for (int i = 0; i < proto.atoms_in_class(k); ++i) blocks[k].push_back(std::move(atoms[h++]));
  }
  return Dictionary(std::move(blocks));
}

Vector class_segment(const Dictionary& dict, const Vector& a, int k) {
  return a.segment(dict.class_offset(k), dict.atoms_in_class(k));
}

}  // namespace

double dl_objective(const StiefelPoint& u, const Dictionary& dict, const CoefficientMatrix& a,
                    const LabeledDataset& data, const GraphSet& graphs,
                    const HyperParams& hyper) {
  double f = obj_Jd(u, dict, a, data, hyper.lambda_d_cross);
  if (hyper.lambda_u != 0.0) f += hyper.lambda_u * obj_Ju(u, data, graphs);
  if (hyper.lambda_d_reg != 0.0) {
    double traces = 0.0;
    for (const auto& atom : dict.atoms()) traces += atom.mat().trace();
    f += hyper.lambda_d_reg * traces;
  }
  return f;
}

DlGradient egrad_dl(const StiefelPoint& u, const Dictionary& dict, const LabeledDataset& data,
                    const CoefficientMatrix& a, const GraphSet& graphs,
                    const HyperParams& hyper) {
  const int n_samples = data.size();
  const int d = dict.dim();
  const int h_total = dict.total_atoms();
  const std::vector<SpdMatrix> proj = project_dataset(u, data);
  const std::vector<SpdEigen> proj_eig = eigens_of(proj);

  std::vector<Matrix> gbar(n_samples, Matrix::Zero(d, d));
  DlGradient out;
  out.egrad_atoms.assign(h_total, Matrix::Zero(d, d));

  for (int n = 0; n < n_samples; ++n) {
    const int k = data.label(n);
    const Vector an = a.col(n);

    const ConicResult full = conic_combine(dict, an);
    const DistGrads dg_full =
        dist_sq_grads(proj_eig[n], full.matrix.mat(), true, !full.floored);
    gbar[n] += 0.5 * dg_full.g_m;
    if (!full.floored) {
      for (int h = 0; h < h_total; ++h) {
        if (an[h] != 0.0) out.egrad_atoms[h] += (0.5 * an[h]) * dg_full.g_s;
      }
    }

    const Vector ank = class_segment(dict, an, k);
    const ConicResult own = conic_combine(dict, ank, k);
    const DistGrads dg_own = dist_sq_grads(proj_eig[n], own.matrix.mat(), true, !own.floored);
    gbar[n] += 0.5 * dg_own.g_m;
    if (!own.floored) {
      const int off = dict.class_offset(k);
      for (int i = 0; i < dict.atoms_in_class(k); ++i) {
        if (ank[i] != 0.0) out.egrad_atoms[off + i] += (0.5 * ank[i]) * dg_own.g_s;
      }
    }

    if (hyper.lambda_d_cross != 0.0) {
      for (int j = 0; j < dict.num_classes(); ++j) {
        if (j == k) continue;
        const Vector anj = class_segment(dict, an, j);
        if ((anj.array() == 0.0).all()) continue;
        const Matrix raw = conic_raw(dict, anj, j);
        const int off = dict.class_offset(j);
        for (int i = 0; i < dict.atoms_in_class(j); ++i) {
          if (anj[i] != 0.0) {
            out.egrad_atoms[off + i] += (2.0 * hyper.lambda_d_cross * anj[i]) * raw;
          }
        }
      }
    }
  }

  if (hyper.lambda_u != 0.0) {
    for (int r = 0; r < n_samples; ++r) {
      for (int q = 0; q < n_samples; ++q) {
        const double w = graphs.g_rd(r, q);
        if (w == 0.0) continue;
        const DistGrads dg = dist_sq_grads(proj_eig[r], proj[q].mat(), true, false);
        gbar[r] += (hyper.lambda_u * w) * dg.g_m;
      }
    }
  }

  if (hyper.lambda_d_reg != 0.0) {
    for (int h = 0; h < h_total; ++h) {
      out.egrad_atoms[h] += hyper.lambda_d_reg * Matrix::Identity(d, d);
    }
  }

  out.egrad_u = Matrix::Zero(u.ambient_dim(), u.reduced_dim());
  for (int n = 0; n < n_samples; ++n) {
    out.egrad_u += 2.0 * (data.sample(n).mat() * u.mat() * symmetrize(gbar[n]));
  }
  return out;
}

DlOutcome solve_dl_subproblem(const StiefelPoint& u, const Dictionary& dict,
                              const CoefficientMatrix& a, const LabeledDataset& data,
                              const GraphSet& graphs, const HyperParams& hyper,
                              const RcgOptions& opts) {
  auto as_dict = [&](const ProductPoint& x) { return dict_with_atoms(dict, x.spd); };

  ProductCostFn cost = [&](const ProductPoint& x) {
    return dl_objective(x.stiefel, as_dict(x), a, data, graphs, hyper);
  };
  ProductGradFn rgrad = [&](const ProductPoint& x) {
    const Dictionary cur = as_dict(x);
    const DlGradient eg = egrad_dl(x.stiefel, cur, data, a, graphs, hyper);
    ProductTangent g{hyper.freeze_u
                         ? StiefelTangent::zero(u.ambient_dim(), u.reduced_dim())
                         : project_tangent(x.stiefel, eg.egrad_u),
                     {}};
    g.spd.reserve(cur.total_atoms());
    for (int h = 0; h < cur.total_atoms(); ++h) {
      g.spd.push_back(egrad_to_rgrad_spd(cur.atom(h), SymTangent(symmetrize(eg.egrad_atoms[h]))));
    }
    return g;
  };

  const RcgResult res = rcg_minimize(cost, rgrad, ProductPoint{u, dict.atoms()}, opts);
  return DlOutcome{res.x.stiefel, dict_with_atoms(dict, res.x.spd), res.status, res.trace};
}

ScContext::ScContext(const StiefelPoint& u, const Dictionary& dict, const LabeledDataset& data,
                     const GraphSet& graphs, const HyperParams& hyper)
    : dict_(dict), data_(data), graphs_(graphs), hyper_(hyper),
      proj_(project_dataset(u, data)), proj_eig_(eigens_of(proj_)) {}

double ScContext::psi(int n, const Vector& a, const Matrix& a_all) const {
  const int k = data_.label(n);
  const ConicResult full = conic_combine(dict_, a);
  const ConicResult own = conic_combine(dict_, class_segment(dict_, a, k), k);
  double val = 0.5 * (airm_dist_sq(proj_[n], full.matrix) + airm_dist_sq(proj_[n], own.matrix));

  if (hyper_.lambda_d_cross != 0.0) {
    for (int j = 0; j < dict_.num_classes(); ++j) {
      if (j == k) continue;
      val += hyper_.lambda_d_cross * conic_raw(dict_, class_segment(dict_, a, j), j).squaredNorm();
    }
  }
  if (hyper_.lambda_a != 0.0) {
    for (int q = 0; q < data_.size(); ++q) {
      const double w = graphs_.g_bin(n, q);
      if (w != 0.0) val += hyper_.lambda_a * w * (a - a_all.col(q)).squaredNorm();
    }
  }
  return val + hyper_.lambda_1 * a.sum() + hyper_.lambda_2 * a.squaredNorm();
}

Vector ScContext::psi_grad(int n, const Vector& a, const Matrix& a_all) const {
  const int k = data_.label(n);
  const int h_total = dict_.total_atoms();
  Vector g = Vector::Constant(h_total, hyper_.lambda_1);
  g += 2.0 * hyper_.lambda_2 * a;

  const ConicResult full = conic_combine(dict_, a);
  if (!full.floored) {
    const DistGrads dg = dist_sq_grads(proj_eig_[n], full.matrix.mat(), false, true);
    for (int h = 0; h < h_total; ++h) {
      g[h] += 0.5 * dg.g_s.cwiseProduct(dict_.atom(h).mat()).sum();
    }
  }
  const Vector ak = class_segment(dict_, a, k);
  const ConicResult own = conic_combine(dict_, ak, k);
  if (!own.floored) {
    const DistGrads dg = dist_sq_grads(proj_eig_[n], own.matrix.mat(), false, true);
    const int off = dict_.class_offset(k);
    for (int i = 0; i < dict_.atoms_in_class(k); ++i) {
      g[off + i] += 0.5 * dg.g_s.cwiseProduct(dict_.atom(off + i).mat()).sum();
    }
  }
  if (hyper_.lambda_d_cross != 0.0) {
    for (int j = 0; j < dict_.num_classes(); ++j) {
      if (j == k) continue;
      const Matrix raw = conic_raw(dict_, class_segment(dict_, a, j), j);
      const int off = dict_.class_offset(j);
      for (int i = 0; i < dict_.atoms_in_class(j); ++i) {
        g[off + i] += 2.0 * hyper_.lambda_d_cross * raw.cwiseProduct(dict_.atom(off + i).mat()).sum();
      }
    }
  }
  if (hyper_.lambda_a != 0.0) {
    double degree = 0.0;
    Vector pull = Vector::Zero(h_total);
    for (int q = 0; q < data_.size(); ++q) {
      const double w = graphs_.g_bin(n, q);
      if (w != 0.0) {
        degree += w;
        pull += w * a_all.col(q);
      }
    }
    g += 2.0 * hyper_.lambda_a * (degree * a - pull);
  }
  return g;
}

CoefficientMatrix solve_sc_subproblem(const StiefelPoint& u, const Dictionary& dict,
                                      CoefficientMatrix a, const LabeledDataset& data,
                                      const GraphSet& graphs, const HyperParams& hyper,
                                      const SpgOptions& opts) {
  const ScContext ctx(u, dict, data, graphs, hyper);
  const int h_total = dict.total_atoms();
  for (int n = 0; n < data.size(); ++n) {
    const Vector current = a.col(n);
    const double psi_current = ctx.psi(n, current, a.mat());

    const Vector start = (current.array() == 0.0).all()
                             ? Vector::Constant(h_total, 1.0 / h_total)
                             : current;
    auto cost = [&](const Vector& x) { return ctx.psi(n, x, a.mat()); };
    auto grad = [&](const Vector& x) { return ctx.psi_grad(n, x, a.mat()); };
    const SpgResult res = spg_solve(cost, grad, NonnegVector(start), opts);

    if (ctx.psi(n, res.x.vec(), a.mat()) <= psi_current) {
      a.set_col(n, res.x.vec());
    }
  }
  return a;
}

StiefelPoint init_projection(const LabeledDataset& data, int d, HyperParams::UInit mode,
                             Rng& rng) {
  const int m = data.dim();
  if (mode == HyperParams::UInit::Random) {
    Matrix g(m, d);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < m; ++i) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(m, d);
    const Matrix r = qr.matrixQR().topLeftCorner(d, d).triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i) {
      if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    }
    return StiefelPoint(std::move(q));
  }

  Matrix mean = Matrix::Zero(m, m);
  for (int n = 0; n < data.size(); ++n) mean += data.sample(n).mat();
  mean /= data.size();
  auto [evals, evecs] = sym_eig(symmetrize(mean));
  Matrix u(m, d);
  for (int j = 0; j < d; ++j) {
    Vector col = evecs.col(m - 1 - j);  // descending eigenvalue order
    int imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    if (col[imax] < 0.0) col = -col;
    u.col(j) = col;
  }
  return StiefelPoint(std::move(u));
}

Dictionary init_dictionary(const std::vector<SpdMatrix>& projected, const LabeledDataset& data,
                           int atoms_per_class, Rng& rng) {
  const int d = projected.front().dim();
  std::vector<std::vector<SpdMatrix>> blocks;
  for (int k = 0; k < data.num_classes(); ++k) {
    const std::vector<int> members = data.class_indices(k);
    const int count = atoms_per_class > 0 ? atoms_per_class
                                          : static_cast<int>(members.size());
    std::vector<SpdMatrix> block;
    block.reserve(count);
    if (count == static_cast<int>(members.size())) {
      for (int idx : members) block.push_back(projected[idx]);
    } else {
      Matrix mean = Matrix::Zero(d, d);
      for (int idx : members) mean += projected[idx].mat();
      const SpdMatrix base(symmetrize(mean / members.size()));
      const double scale = 0.1 * base.mat().trace() / d;
      for (int i = 0; i < count; ++i) {
        Matrix w(d, d);
        for (int c = 0; c < d; ++c) {
          for (int r = 0; r < d; ++r) w(r, c) = rng.normal();
        }
        block.push_back(spd_retract(base, SymTangent(scale * symmetrize(w)), 1.0));
      }
    }
    blocks.push_back(std::move(block));
  }
  return Dictionary(std::move(blocks));
}

TrainResult train(const LabeledDataset& data, const HyperParams& hyper, std::uint64_t seed,
                  const RcgOptions& rcg_opts, const SpgOptions& spg_opts) {
  hyper.validate(data.dim());
  Rng rng(seed);

  const GraphSet graphs = build_graphs(data, hyper.v_w, hyper.v_b);
  // A frozen full-dimensional projection means "no reduction": the basis is
  // the identity rather than an arbitrary rotation of it.
  StiefelPoint u = hyper.freeze_u && hyper.d == data.dim()
                       ? StiefelPoint::identity(data.dim(), data.dim())
                       : init_projection(data, hyper.d, hyper.u_init, rng);
  Dictionary dict = init_dictionary(project_dataset(u, data), data, hyper.atoms_per_class, rng);
  CoefficientMatrix a = CoefficientMatrix::zero(dict.total_atoms(), data.size());

  TrainResult result{JdrdlModel{u, dict, a, {}, hyper}, {}, {}};
  a = solve_sc_subproblem(u, dict, std::move(a), data, graphs, hyper, spg_opts);
  result.objective_trace.push_back(full_objective(u, dict, a, data, graphs, hyper));

  for (int round = 0; round < hyper.outer_rounds; ++round) {
    const double before = result.objective_trace.back();

    DlOutcome dl = solve_dl_subproblem(u, dict, a, data, graphs, hyper, rcg_opts);
    u = std::move(dl.u);
    dict = std::move(dl.dict);
    if (dl.status == RcgStatus::Stalled) {
      result.warnings.push_back("dictionary step stalled in round " + std::to_string(round + 1));
    }
    result.objective_trace.push_back(full_objective(u, dict, a, data, graphs, hyper));

    a = solve_sc_subproblem(u, dict, std::move(a), data, graphs, hyper, spg_opts);
    result.objective_trace.push_back(full_objective(u, dict, a, data, graphs, hyper));

    const double after = result.objective_trace.back();
    if (std::abs(before - after) <= hyper.rel_change_tol * std::max(1.0, std::abs(before))) {
      break;
    }
  }

  std::vector<Vector> means(data.num_classes(), Vector::Zero(dict.total_atoms()));
  for (int k = 0; k < data.num_classes(); ++k) {
    const std::vector<int> members = data.class_indices(k);
    for (int idx : members) means[k] += a.col(idx);
    means[k] /= static_cast<double>(members.size());
  }

  result.model = JdrdlModel{std::move(u), std::move(dict), std::move(a), std::move(means), hyper};
  return result;
}

}  // namespace jdrdl
