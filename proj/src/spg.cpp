#include "jdrdl/spg.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace jdrdl {

NonnegVector::NonnegVector(Vector entries) : entries_(std::move(entries)) {
  if ((entries_.array() < 0.0).any()) {
    throw std::invalid_argument("NonnegVector: negative entry");
  }
}

NonnegVector project_nonneg(const Vector& x) {
  return NonnegVector(x.cwiseMax(0.0));
}

namespace {

void validate(const SpgOptions& opts) {
  if (!(opts.bb_step_min > 0.0 && opts.bb_step_min < opts.bb_step_max)) {
    throw std::invalid_argument("SpgOptions: need 0 < bb_step_min < bb_step_max");
  }
  if (opts.nonmonotone_memory < 1 || opts.max_iters < 0 ||
      !(opts.sufficient_decrease > 0.0 && opts.sufficient_decrease < 1.0)) {
    throw std::invalid_argument("SpgOptions: invalid controls");
  }
}

double kkt_residual(const Vector& x, const Vector& g) {
  return (x - (x - g).cwiseMax(0.0)).cwiseAbs().maxCoeff();
}

}  // namespace

SpgResult spg_solve(const SpgCostFn& cost, const SpgGradFn& grad, const NonnegVector& x0,
                    const SpgOptions& opts) {
  validate(opts);

  Vector x = x0.vec();
  double fx = cost(x);
  Vector g = grad(x);

  Vector best_x = x;
  double best_f = fx;

  std::deque<double> recent{fx};

  const double ginf = g.cwiseAbs().maxCoeff();
  double alpha = ginf > 0.0 ? 1.0 / ginf : 1.0;
  alpha = std::clamp(alpha, opts.bb_step_min, opts.bb_step_max);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (kkt_residual(x, g) < opts.kkt_tol) {
      return {NonnegVector(x), SpgStatus::Success, iter};
    }

    Vector d = (x - alpha * g).cwiseMax(0.0) - x;
    const double slope = g.dot(d);
    if (slope >= 0.0) break;  // numerically flat; fall through to best iterate

    const double f_ref = *std::max_element(recent.begin(), recent.end());
    double t = 1.0;
    Vector x_new;
    double f_new = fx;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      x_new = (x + t * d).cwiseMax(0.0);
      f_new = cost(x_new);
      if (f_new <= f_ref + opts.sufficient_decrease * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    Vector g_new = grad(x_new);
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    alpha = sy > 0.0 ? std::clamp(s.dot(s) / sy, opts.bb_step_min, opts.bb_step_max) : 1.0;

    x = std::move(x_new);
    fx = f_new;
    g = std::move(g_new);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    recent.push_back(fx);
    if (static_cast<int>(recent.size()) > opts.nonmonotone_memory) recent.pop_front();
  }

  if (kkt_residual(x, g) < opts.kkt_tol) {
    return {NonnegVector(x), SpgStatus::Success, opts.max_iters};
  }
  return {NonnegVector(best_x), SpgStatus::MaxIters, opts.max_iters};
}

}  // namespace jdrdl
