#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "jdrdl/train.hpp"
#include "test_helpers.hpp"

using namespace jdrdl;
using testing::random_spd;
using testing::random_sym;

namespace {

LabeledDataset random_dataset(Rng& rng, int k, int per_class, int m) {
  std::vector<SpdMatrix> samples;
  std::vector<int> labels;
  for (int c = 0; c < k; ++c) {
    const SpdMatrix center = random_spd(rng, m, 0.5, 4.0);
    for (int i = 0; i < per_class; ++i) {
      const SymTangent noise(0.2 * random_sym(rng, m));
      samples.push_back(spd_retract(center, noise, 1.0));
      labels.push_back(c);
    }
  }
  return LabeledDataset(std::move(samples), std::move(labels), k);
}

bool nonincreasing(const std::vector<double>& xs, double slack) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] > xs[i - 1] + slack) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_projection is deterministic and sits on the Stiefel manifold") {
  Rng rng(601);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);

  Rng r1(7), r2(7);
  const StiefelPoint mean1 = init_projection(data, 3, HyperParams::UInit::MeanEigvecs, r1);
  const StiefelPoint mean2 = init_projection(data, 3, HyperParams::UInit::MeanEigvecs, r2);
  CHECK((mean1.mat() - mean2.mat()).norm() == 0.0);

  // Columns are eigenvectors of the sample mean, leading eigenvalue first.
  Matrix mean = Matrix::Zero(5, 5);
  for (int n = 0; n < data.size(); ++n) mean += data.sample(n).mat();
  mean /= data.size();
  const auto [evals, evecs] = sym_eig(mean);
  for (int j = 0; j < 3; ++j) {
    const Vector col = mean1.mat().col(j);
    const double lam = evals[4 - j];
    CHECK((mean * col - lam * col).norm() < 1e-10);
  }

  Rng r3(9), r4(9), r5(10);
  const StiefelPoint a = init_projection(data, 3, HyperParams::UInit::Random, r3);
  const StiefelPoint b = init_projection(data, 3, HyperParams::UInit::Random, r4);
  const StiefelPoint c = init_projection(data, 3, HyperParams::UInit::Random, r5);
  CHECK((a.mat() - b.mat()).norm() == 0.0);
  CHECK((a.mat() - c.mat()).norm() > 1e-3);
}

TEST_CASE("init_dictionary copies samples or perturbs the class mean") {
  Rng rng(602);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);
  const StiefelPoint u = init_projection(data, 3, HyperParams::UInit::MeanEigvecs, rng);
  const std::vector<SpdMatrix> proj = project_dataset(u, data);

  Rng r1(11);
  const Dictionary exact = init_dictionary(proj, data, 3, r1);
  CHECK(exact.total_atoms() == 6);
  for (int h = 0; h < 6; ++h) {
    CHECK((exact.atom(h).mat() - proj[h].mat()).norm() == 0.0);
  }

  Rng r2(12);
  const Dictionary small = init_dictionary(proj, data, 2, r2);
  CHECK(small.total_atoms() == 4);
  for (int h = 0; h < 4; ++h) {
    CHECK(small.atom(h).dim() == 3);
    CHECK(small.atom(h).eig_min() > 0.0);
  }
  // Perturbed atoms stay near the class mean but are not all identical.
  CHECK((small.atom(0).mat() - small.atom(1).mat()).norm() > 1e-12);
}

TEST_CASE("solve_dl_subproblem leaves an exact configuration unchanged") {
  Rng rng(603);
  const LabeledDataset data = random_dataset(rng, 2, 1, 5);
  const GraphSet graphs = build_graphs(data, 0, 0);

  HyperParams hyper;
  hyper.d = 3;
  hyper.lambda_a = 0.0;
  hyper.lambda_u = 0.0;
  hyper.lambda_d_reg = 0.0;

  Rng init_rng(1);
  const StiefelPoint u = init_projection(data, 3, HyperParams::UInit::MeanEigvecs, init_rng);
  const std::vector<SpdMatrix> proj = project_dataset(u, data);
  std::vector<std::vector<SpdMatrix>> blocks(2);
  blocks[0].push_back(proj[0]);
  blocks[1].push_back(proj[1]);
  const Dictionary dict(std::move(blocks));
  const CoefficientMatrix a{Matrix(Matrix::Identity(2, 2))};

  const DlOutcome out = solve_dl_subproblem(u, dict, a, data, graphs, hyper, {});
  CHECK(out.status == RcgStatus::GradTol);
  CHECK(out.trace.size() == 1);
  CHECK((out.u.mat() - u.mat()).norm() == 0.0);
  for (int h = 0; h < 2; ++h) {
    CHECK((out.dict.atom(h).mat() - dict.atom(h).mat()).norm() == 0.0);
  }
}

TEST_CASE("solve_dl_subproblem decreases the objective from a generic start") {
  Rng rng(604);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);
  const GraphSet graphs = build_graphs(data, 1, 2);

  HyperParams hyper;
  hyper.d = 3;
  Rng init_rng(2);
  const StiefelPoint u = init_projection(data, 3, HyperParams::UInit::Random, init_rng);
  const Dictionary dict = init_dictionary(project_dataset(u, data), data, 2, init_rng);
  Matrix codes(4, 6);
  for (int i = 0; i < codes.size(); ++i) codes(i / 6, i % 6) = 0.1 + rng.uniform();
  const CoefficientMatrix a(codes);

  const double before = dl_objective(u, dict, a, data, graphs, hyper);
  RcgOptions opts;
  opts.max_iters = 40;
  const DlOutcome out = solve_dl_subproblem(u, dict, a, data, graphs, hyper, opts);
  const double after = dl_objective(out.u, out.dict, a, data, graphs, hyper);
  CHECK(after < before - 1e-6);

  std::vector<double> costs;
  for (const auto& row : out.trace) costs.push_back(row.cost);
  CHECK(nonincreasing(costs, 0.0));
  CHECK(costs.front() == doctest::Approx(before).epsilon(1e-12));
  CHECK(costs.back() == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("solve_dl_subproblem with frozen projection keeps U fixed") {
  Rng rng(605);
  const LabeledDataset data = random_dataset(rng, 2, 2, 4);
  const GraphSet graphs = build_graphs(data, 0, 0);

  HyperParams hyper;
  hyper.d = 4;          // full dimension is allowed when U is frozen
  hyper.freeze_u = true;
  hyper.lambda_a = 0.0;
  hyper.lambda_u = 0.0;

  const StiefelPoint u = StiefelPoint::identity(4, 4);
  Rng init_rng(3);
  const Dictionary dict = init_dictionary(project_dataset(u, data), data, 1, init_rng);
  Matrix codes(2, 4);
  for (int i = 0; i < codes.size(); ++i) codes(i / 4, i % 4) = 0.1 + rng.uniform();
  const CoefficientMatrix a(codes);

  RcgOptions opts;
  opts.max_iters = 20;
  const DlOutcome out = solve_dl_subproblem(u, dict, a, data, graphs, hyper, opts);
  CHECK((out.u.mat() - u.mat()).norm() == 0.0);
  CHECK(dl_objective(out.u, out.dict, a, data, graphs, hyper) <=
        dl_objective(u, dict, a, data, graphs, hyper));
}

TEST_CASE("solve_sc_subproblem matches a one-dimensional grid search") {
  // One class, one atom (the identity), one sample c*I: the column objective
  // reduces to dim*log(a/c)^2 + lambda_1*a + lambda_2*a^2 over a >= 0.
  const int dim = 3;
  const double c = 2.0;
  const LabeledDataset data({SpdMatrix(c * Matrix::Identity(dim, dim))}, {0}, 1);
  const GraphSet graphs = build_graphs(data, 0, 0);
  std::vector<std::vector<SpdMatrix>> blocks(1);
  blocks[0].push_back(SpdMatrix(Matrix::Identity(dim, dim)));
  const Dictionary dict(std::move(blocks));
  const StiefelPoint u = StiefelPoint::identity(dim, dim);

  HyperParams hyper;
  hyper.d = dim;
  hyper.freeze_u = true;
  hyper.lambda_1 = 0.3;
  hyper.lambda_2 = 0.1;
  hyper.lambda_a = 0.0;
  hyper.lambda_u = 0.0;

  SpgOptions opts;
  opts.kkt_tol = 1e-10;
  opts.max_iters = 2000;
  const CoefficientMatrix sol =
      solve_sc_subproblem(u, dict, CoefficientMatrix::zero(1, 1), data, graphs, hyper, opts);
  const double got = sol.mat()(0, 0);

  auto scalar_obj = [&](double v) {
    const double lr = std::log(v / c);
    return dim * lr * lr + hyper.lambda_1 * v + hyper.lambda_2 * v * v;
  };
  double best = 1e-4, best_val = scalar_obj(best);
  for (double v = 1e-4; v <= 4.0; v += 1e-4) {
    if (scalar_obj(v) < best_val) best = v, best_val = scalar_obj(v);
  }
  for (double v = best - 1e-4; v <= best + 1e-4; v += 1e-8) {
    if (v > 0.0 && scalar_obj(v) < best_val) best = v, best_val = scalar_obj(v);
  }
  CHECK(std::abs(got - best) < 1e-6);
}

TEST_CASE("solve_sc_subproblem never increases the full objective") {
  Rng rng(606);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);
  const GraphSet graphs = build_graphs(data, 1, 2);

  HyperParams hyper;
  hyper.d = 3;
  Rng init_rng(4);
  const StiefelPoint u = init_projection(data, 3, HyperParams::UInit::MeanEigvecs, init_rng);
  const Dictionary dict = init_dictionary(project_dataset(u, data), data, 2, init_rng);

  CoefficientMatrix a = CoefficientMatrix::zero(4, 6);
  double prev = full_objective(u, dict, a, data, graphs, hyper);
  for (int pass = 0; pass < 3; ++pass) {
    a = solve_sc_subproblem(u, dict, a, data, graphs, hyper, {});
    const double cur = full_objective(u, dict, a, data, graphs, hyper);
    CHECK(cur <= prev + 1e-8);
    prev = cur;
  }
  CHECK(a.mat().maxCoeff() > 0.0);

  // A converged coding pass is idempotent up to solver tolerance.
  const CoefficientMatrix again = solve_sc_subproblem(u, dict, a, data, graphs, hyper, {});
  CHECK((again.mat() - a.mat()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("train reconstructs a one-class dataset of identical samples") {
  Rng rng(607);
  const SpdMatrix x = random_spd(rng, 4, 0.5, 2.0);
  const LabeledDataset data({x, x, x}, {0, 0, 0}, 1);

  HyperParams hyper;
  hyper.d = 3;
  hyper.atoms_per_class = 1;
  hyper.lambda_1 = 1e-6;
  hyper.lambda_2 = 1e-6;
  hyper.lambda_a = 0.0;
  hyper.lambda_u = 0.0;
  hyper.lambda_d_cross = 0.0;
  hyper.lambda_d_reg = 0.0;
  hyper.v_w = 0;
  hyper.v_b = 0;

  const TrainResult res = train(data, hyper, 42);
  CHECK(obj_Jd(res.model.u, res.model.dict, res.model.a_train, data, 0.0) < 1e-4);
  CHECK(res.model.class_means.size() == 1);
  CHECK(res.model.class_means[0].size() == 1);
}

TEST_CASE("train produces a non-increasing objective trace") {
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    Rng rng(700 + seed);
    const LabeledDataset data = random_dataset(rng, 2, 4, 5);

    HyperParams hyper;
    hyper.d = 3;
    hyper.atoms_per_class = 2;
    hyper.outer_rounds = 4;
    hyper.v_w = 2;
    hyper.v_b = 2;

    RcgOptions rcg;
    rcg.max_iters = 25;
    const TrainResult res = train(data, hyper, seed, rcg);
    REQUIRE(res.objective_trace.size() >= 3);
    CHECK(nonincreasing(res.objective_trace, 1e-8));
  }
}

TEST_CASE("train is deterministic for a fixed seed") {
  Rng rng(608);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);

  HyperParams hyper;
  hyper.d = 3;
  hyper.atoms_per_class = 2;
  hyper.outer_rounds = 2;
  hyper.v_w = 1;
  hyper.v_b = 2;
  hyper.u_init = HyperParams::UInit::Random;

  RcgOptions rcg;
  rcg.max_iters = 15;
  const TrainResult r1 = train(data, hyper, 99, rcg);
  const TrainResult r2 = train(data, hyper, 99, rcg);
  CHECK((r1.model.u.mat() - r2.model.u.mat()).norm() == 0.0);
  CHECK((r1.model.a_train.mat() - r2.model.a_train.mat()).norm() == 0.0);
  for (int h = 0; h < r1.model.dict.total_atoms(); ++h) {
    CHECK((r1.model.dict.atom(h).mat() - r2.model.dict.atom(h).mat()).norm() == 0.0);
  }
  CHECK(r1.objective_trace == r2.objective_trace);

  const TrainResult r3 = train(data, hyper, 100, rcg);
  CHECK((r1.model.u.mat() - r3.model.u.mat()).norm() > 1e-8);
}

TEST_CASE("train with frozen projection keeps the initial basis") {
  Rng rng(609);
  const LabeledDataset data = random_dataset(rng, 2, 3, 4);

  HyperParams hyper;
  hyper.d = 4;
  hyper.freeze_u = true;
  hyper.atoms_per_class = 2;
  hyper.outer_rounds = 2;
  hyper.lambda_a = 0.0;
  hyper.lambda_u = 0.0;
  hyper.v_w = 0;
  hyper.v_b = 0;

  const TrainResult res = train(data, hyper, 5);
  CHECK((res.model.u.mat() - Matrix::Identity(4, 4)).norm() < 1e-12);
}
