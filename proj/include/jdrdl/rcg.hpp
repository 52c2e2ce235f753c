// Riemannian conjugate gradient over the product manifold
// St(d,m) x SPD(d)^H: one Stiefel component plus a list of SPD components.
#pragma once

#include "jdrdl/spd.hpp"
#include "jdrdl/stiefel.hpp"

#include <functional>
#include <ostream>
#include <vector>

namespace jdrdl {

struct ProductPoint {
  StiefelPoint stiefel;
  std::vector<SpdMatrix> spd;
};

struct ProductTangent {
  StiefelTangent stiefel;
  std::vector<SymTangent> spd;
};

/// a*v + b*w, componentwise.
ProductTangent tangent_lincomb(double a, const ProductTangent& v, double b,
                               const ProductTangent& w);
ProductTangent tangent_scale(double a, const ProductTangent& v);

/// Product metric: Frobenius on the Stiefel component plus the AIRM at each
/// SPD component.
double product_inner(const ProductPoint& x, const ProductTangent& v, const ProductTangent& w);

/// Componentwise retraction: QR on the Stiefel slot, exponential map on each
/// SPD slot.
ProductPoint product_retract(const ProductPoint& x, const ProductTangent& v, double t);

/// Componentwise vector transport into the tangent space at x_new
/// (projection on the Stiefel slot, identity on the SPD slots).
ProductTangent product_transport(const ProductPoint& x_new, const ProductTangent& v);

enum class BetaRule { FletcherReeves, HestenesStiefelPlus };

struct RcgOptions {
  int max_iters = 100;
  double grad_norm_tol = 1e-6;
  double armijo_c1 = 1e-4;
  double armijo_shrink = 0.5;
  double initial_step = 1.0;
  BetaRule beta_rule = BetaRule::HestenesStiefelPlus;
  int max_backtracks = 50;
  /// When set, receives one "iter,cost,grad_norm" CSV row per iterate.
  std::ostream* trace_sink = nullptr;
};

enum class RcgStatus { GradTol, MaxIters, Stalled };

struct RcgTraceRow {
  int iter;
  double cost;
  double grad_norm;
};

struct RcgResult {
  ProductPoint x;
  RcgStatus status;
  std::vector<RcgTraceRow> trace;
};

using ProductCostFn = std::function<double(const ProductPoint&)>;
using ProductGradFn = std::function<ProductTangent(const ProductPoint&)>;

/// Minimizes cost by conjugate gradient with Armijo backtracking. The trace
/// is cost-nonincreasing; when a conjugate direction fails to make progress
/// the search restarts once along steepest descent before reporting Stalled.
RcgResult rcg_minimize(const ProductCostFn& cost, const ProductGradFn& rgrad,
                       const ProductPoint& x0, const RcgOptions& opts);

}  // namespace jdrdl
