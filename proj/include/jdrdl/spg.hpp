#pragma once

#include <functional>
#include <utility>

#include "jdrdl/spd.hpp"

namespace jdrdl {

// Vector with componentwise nonnegative entries, the feasible set of the
// coding sub-problem. Validated on construction.
class NonnegVector {
 public:
  explicit NonnegVector(Vector entries);
  static NonnegVector zero(int n) { return NonnegVector(Vector::Zero(n)); }

  const Vector& vec() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }

 private:
  Vector entries_;
};

// Euclidean projection onto the nonnegative orthant: entrywise max(x, 0).
NonnegVector project_nonneg(const Vector& x);

struct SpgOptions {
  int max_iters = 500;
  double kkt_tol = 1e-6;
  double bb_step_min = 1e-10;
  double bb_step_max = 1e10;
  int nonmonotone_memory = 10;
  double sufficient_decrease = 1e-4;
};

enum class SpgStatus { Success, MaxIters };

struct SpgResult {
  NonnegVector x;
  SpgStatus status;
  int iters;
};

using SpgCostFn = std::function<double(const Vector&)>;
using SpgGradFn = std::function<Vector(const Vector&)>;

// Spectral projected gradient over the nonnegative orthant (Birgin-style):
// Barzilai-Borwein steps clamped into [bb_step_min, bb_step_max] with a
// nonmonotone Armijo line search. Succeeds when the KKT residual
// ||x - project(x - grad)||_inf drops below kkt_tol; on iteration exhaustion
// the best iterate seen is returned with status MaxIters. The cost must be
// smooth on the orthant (the caller's coding objective is: its l1 penalty is
// linear there).
SpgResult spg_solve(const SpgCostFn& cost, const SpgGradFn& grad, const NonnegVector& x0,
                    const SpgOptions& opts = {});

}  // namespace jdrdl
