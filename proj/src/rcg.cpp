#include "jdrdl/rcg.hpp"

#include <cmath>
#include <stdexcept>

namespace jdrdl {

namespace {

void validate(const RcgOptions& opts) {
  if (!(opts.armijo_c1 > 0.0 && opts.armijo_c1 < 1.0)) {
    throw std::invalid_argument("RcgOptions: armijo_c1 must lie in (0,1)");
  }
  if (!(opts.armijo_shrink > 0.0 && opts.armijo_shrink < 1.0)) {
    throw std::invalid_argument("RcgOptions: armijo_shrink must lie in (0,1)");
  }
  if (opts.max_iters < 0 || opts.max_backtracks < 1 || !(opts.initial_step > 0.0)) {
    throw std::invalid_argument("RcgOptions: invalid iteration controls");
  }
}

void require_matching(const ProductTangent& v, const ProductTangent& w) {
  if (v.spd.size() != w.spd.size()) {
    throw std::invalid_argument("product tangent: spd component count mismatch");
  }
}

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  double cost = 0.0;
  ProductPoint x;
};

LineSearchResult armijo_backtrack(const ProductCostFn& cost, const ProductPoint& x, double fx,
                                  const ProductTangent& dir, double slope,
                                  const RcgOptions& opts) {
  double t = opts.initial_step;
  for (int k = 0; k < opts.max_backtracks; ++k, t *= opts.armijo_shrink) {
    // A long trial step can leave the numerically representable SPD cone
    // (the exponential map under- or overflows); treat that like an
    // infinite cost and keep shrinking.
    try {
      ProductPoint cand = product_retract(x, dir, t);
      const double fc = cost(cand);
      if (fc <= fx + opts.armijo_c1 * t * slope) {
        return {true, t, fc, std::move(cand)};
      }
    } catch (const std::exception&) {
    }
  }
  return {false, 0.0, fx, x};
}

}  // namespace

ProductTangent tangent_lincomb(double a, const ProductTangent& v, double b,
                               const ProductTangent& w) {
  require_matching(v, w);
  ProductTangent out{StiefelTangent(a * v.stiefel.mat() + b * w.stiefel.mat()), {}};
  out.spd.reserve(v.spd.size());
  for (std::size_t i = 0; i < v.spd.size(); ++i) {
    out.spd.emplace_back(a * v.spd[i].mat() + b * w.spd[i].mat());
  }
  return out;
}

ProductTangent tangent_scale(double a, const ProductTangent& v) {
  ProductTangent out{StiefelTangent(a * v.stiefel.mat()), {}};
  out.spd.reserve(v.spd.size());
  for (const auto& s : v.spd) out.spd.emplace_back(a * s.mat());
  return out;
}

double product_inner(const ProductPoint& x, const ProductTangent& v, const ProductTangent& w) {
  require_matching(v, w);
  if (x.spd.size() != v.spd.size()) {
    throw std::invalid_argument("product_inner: point/tangent spd count mismatch");
  }
  double total = v.stiefel.mat().cwiseProduct(w.stiefel.mat()).sum();
  for (std::size_t i = 0; i < x.spd.size(); ++i) {
    total += airm_inner(x.spd[i], v.spd[i], w.spd[i]);
  }
  return total;
}

ProductPoint product_retract(const ProductPoint& x, const ProductTangent& v, double t) {
  if (x.spd.size() != v.spd.size()) {
    throw std::invalid_argument("product_retract: point/tangent spd count mismatch");
  }
  ProductPoint out{retract_qr(x.stiefel, v.stiefel, t), {}};
  out.spd.reserve(x.spd.size());
  for (std::size_t i = 0; i < x.spd.size(); ++i) {
    out.spd.push_back(spd_retract(x.spd[i], v.spd[i], t));
  }
  return out;
}

ProductTangent product_transport(const ProductPoint& x_new, const ProductTangent& v) {
  return ProductTangent{transport(x_new.stiefel, v.stiefel), v.spd};
}

RcgResult rcg_minimize(const ProductCostFn& cost, const ProductGradFn& rgrad,
                       const ProductPoint& x0, const RcgOptions& opts) {
  validate(opts);

  ProductPoint x = x0;
  double fx = cost(x);
  ProductTangent g = rgrad(x);
  double gn2 = product_inner(x, g, g);
  double gn = std::sqrt(gn2);

  RcgResult result{x, RcgStatus::MaxIters, {}};
  auto record = [&](int iter) {
    result.trace.push_back({iter, fx, gn});
    if (opts.trace_sink) {
      (*opts.trace_sink) << iter << ',' << fx << ',' << gn << '\n';
    }
  };
  record(0);

  ProductTangent dir = tangent_scale(-1.0, g);
  bool have_prev = false;

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    if (gn < opts.grad_norm_tol) {
      result.status = RcgStatus::GradTol;
      break;
    }

    double slope = product_inner(x, g, dir);
    bool steepest = !have_prev;
    if (slope >= 0.0) {
      dir = tangent_scale(-1.0, g);
      slope = -gn2;
      steepest = true;
    }

    LineSearchResult ls = armijo_backtrack(cost, x, fx, dir, slope, opts);
    if (!ls.accepted && !steepest) {
      dir = tangent_scale(-1.0, g);
      slope = -gn2;
      ls = armijo_backtrack(cost, x, fx, dir, slope, opts);
    }
    if (!ls.accepted) {
      result.status = RcgStatus::Stalled;
      break;
    }

    ProductTangent g_new = rgrad(ls.x);
    const double gn2_new = product_inner(ls.x, g_new, g_new);

    ProductTangent dir_t = product_transport(ls.x, dir);
    double beta = 0.0;
    switch (opts.beta_rule) {
      case BetaRule::FletcherReeves:
        beta = gn2 > 0.0 ? gn2_new / gn2 : 0.0;
        break;
      case BetaRule::HestenesStiefelPlus: {
        ProductTangent g_t = product_transport(ls.x, g);
        ProductTangent y = tangent_lincomb(1.0, g_new, -1.0, g_t);
        const double denom = product_inner(ls.x, dir_t, y);
        if (denom != 0.0) {
          beta = std::max(0.0, product_inner(ls.x, g_new, y) / denom);
        }
        break;
      }
    }

    dir = tangent_lincomb(-1.0, g_new, beta, dir_t);
    have_prev = true;
    x = std::move(ls.x);
    fx = ls.cost;
    g = std::move(g_new);
    gn2 = gn2_new;
    gn = std::sqrt(gn2);
    record(iter);
  }

  if (result.status == RcgStatus::MaxIters && gn < opts.grad_norm_tol) {
    result.status = RcgStatus::GradTol;
  }
  result.x = std::move(x);
  return result;
}

}  // namespace jdrdl
