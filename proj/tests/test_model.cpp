#include <cmath>

#include "doctest.h"
#include "jdrdl/model.hpp"
#include "test_helpers.hpp"

using namespace jdrdl;
using testing::random_gaussian;
using testing::random_spd;
using testing::random_stiefel;
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

Dictionary random_dictionary(Rng& rng, int k, int per_class, int d) {
  std::vector<std::vector<SpdMatrix>> blocks(k);
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i) blocks[c].push_back(random_spd(rng, d));
  }
  return Dictionary(std::move(blocks));
}

// Distance recomputed through matrix functions rather than the generalized
// eigenvalue path used by the library.
double naive_d2(const Matrix& a, const Matrix& b) {
  const Matrix ai = spd_fn(a, SpdFn::InvSqrt);
  return spd_fn(symmetrize(ai * b * ai), SpdFn::Log).squaredNorm();
}

}  // namespace

TEST_CASE("LabeledDataset validates its invariants") {
  Rng rng(401);
  std::vector<SpdMatrix> two{random_spd(rng, 3), random_spd(rng, 3)};
  const std::vector<int> empty_class{0, 0};
  const std::vector<int> out_of_range{0, 2};
  const std::vector<int> short_labels{0};
  CHECK_THROWS_AS(LabeledDataset(two, empty_class, 2), std::invalid_argument);
  CHECK_THROWS_AS(LabeledDataset(two, out_of_range, 2), std::invalid_argument);
  CHECK_THROWS_AS(LabeledDataset(two, short_labels, 1), std::invalid_argument);

  const LabeledDataset data = random_dataset(rng, 2, 3, 4);
  CHECK(data.size() == 6);
  CHECK(data.dim() == 4);
  const std::vector<int> want_counts{3, 3};
  const std::vector<int> want_indices{3, 4, 5};
  CHECK(data.class_counts() == want_counts);
  CHECK(data.class_indices(1) == want_indices);
}

TEST_CASE("Dictionary indexes class blocks") {
  Rng rng(402);
  const Dictionary dict = random_dictionary(rng, 3, 2, 3);
  CHECK(dict.total_atoms() == 6);
  CHECK(dict.class_offset(2) == 4);
  CHECK(dict.class_of_atom(0) == 0);
  CHECK(dict.class_of_atom(3) == 1);
  CHECK(dict.class_of_atom(5) == 2);
}

TEST_CASE("CoefficientMatrix enforces nonnegativity") {
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(CoefficientMatrix{bad}, std::invalid_argument);

  CoefficientMatrix a = CoefficientMatrix::zero(3, 2);
  Vector col(3);
  col << 1, 0, 2;
  a.set_col(1, col);
  CHECK(a.mat()(2, 1) == 2.0);
  col[0] = -1;
  CHECK_THROWS_AS(a.set_col(0, col), std::invalid_argument);
}

TEST_CASE("conic_combine reproduces single atoms and floors zero codes") {
  Rng rng(403);
  const Dictionary dict = random_dictionary(rng, 2, 2, 3);

  Vector onehot = Vector::Zero(4);
  onehot[2] = 1.0;
  const ConicResult single = conic_combine(dict, onehot);
  CHECK((single.matrix.mat() - dict.atom(2).mat()).norm() < 1e-12);
  CHECK_FALSE(single.floored);
  CHECK_FALSE(single.degenerate);

  const ConicResult zero = conic_combine(dict, Vector::Zero(4));
  CHECK(zero.degenerate);
  CHECK(zero.floored);
  CHECK(zero.eps_floor == kConicFloorRel);
  CHECK((zero.matrix.mat() - kConicFloorRel * Matrix::Identity(3, 3)).norm() == 0.0);

  Vector neg = Vector::Zero(4);
  neg[0] = -1.0;
  CHECK_THROWS_AS(conic_combine(dict, neg), std::invalid_argument);
}

TEST_CASE("conic_combine respects the eigenvalue lower bound of the sum") {
  Rng rng(404);
  const Dictionary dict = random_dictionary(rng, 2, 3, 4);
  for (int rep = 0; rep < 20; ++rep) {
    Vector a(6);
    for (int i = 0; i < 6; ++i) a[i] = rng.uniform();
    double bound = 0.0;
    for (int h = 0; h < 6; ++h) bound += a[h] * dict.atom(h).eig_min();
    const ConicResult res = conic_combine(dict, a);
    CHECK(res.matrix.eig_min() >= bound - 1e-10);
  }
}

TEST_CASE("conic_combine restricted to a class uses that block only") {
  Rng rng(405);
  const Dictionary dict = random_dictionary(rng, 2, 2, 3);
  Vector a(2);
  a << 0.5, 0.25;
  const ConicResult res = conic_combine(dict, a, 1);
  const Matrix want = 0.5 * dict.atom(2).mat() + 0.25 * dict.atom(3).mat();
  CHECK((res.matrix.mat() - want).norm() < 1e-12);
  CHECK((conic_raw(dict, a, 1) - want).norm() < 1e-12);
}

TEST_CASE("build_graphs pairs forced neighbors and keeps supports disjoint") {
  Rng rng(406);
  const LabeledDataset data = random_dataset(rng, 2, 2, 3);
  const GraphSet g = build_graphs(data, 1, 1);
  // Each sample's only classmate is its intra-class neighbor.
  CHECK(g.g_w(0, 1) == 1);
  CHECK(g.g_w(2, 3) == 1);
  CHECK(g.g_w(0, 2) == 0);
  for (int p = 0; p < 4; ++p) {
    CHECK(g.g_w(p, p) == 0);
    CHECK(g.g_b(p, p) == 0);
    for (int q = 0; q < 4; ++q) {
      CHECK_FALSE((g.g_w(p, q) == 1 && g.g_b(p, q) == 1));
      CHECK(g.g_w(p, q) == g.g_w(q, p));
      CHECK(g.g_b(p, q) == g.g_b(q, p));
    }
  }
  CHECK((g.g_bin - (g.g_w - g.g_b).cast<double>()).norm() == 0.0);
}

TEST_CASE("build_graphs matches a brute-force neighbor oracle") {
  Rng rng(407);
  const LabeledDataset data = random_dataset(rng, 3, 4, 4);
  const int n = data.size();
  const int v_w = 2, v_b = 3;
  const GraphSet g = build_graphs(data, v_w, v_b);

  Matrix dist(n, n);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      dist(p, q) = p == q ? 0.0 : airm_dist_sq(data.sample(p), data.sample(q));
    }
  }
  Eigen::MatrixXi want_w = Eigen::MatrixXi::Zero(n, n);
  Eigen::MatrixXi want_b = Eigen::MatrixXi::Zero(n, n);
  for (int q = 0; q < n; ++q) {
    std::vector<int> same, diff;
    for (int p = 0; p < n; ++p) {
      if (p == q) continue;
      (data.label(p) == data.label(q) ? same : diff).push_back(p);
    }
    auto by_dist = [&](int x, int y) {
      return dist(x, q) != dist(y, q) ? dist(x, q) < dist(y, q) : x < y;
    };
    std::sort(same.begin(), same.end(), by_dist);
    std::sort(diff.begin(), diff.end(), by_dist);
    for (int i = 0; i < v_w; ++i) want_w(same[i], q) = want_w(q, same[i]) = 1;
    for (int i = 0; i < v_b; ++i) want_b(diff[i], q) = want_b(q, diff[i]) = 1;
  }
  CHECK((g.g_w - want_w).cwiseAbs().sum() == 0);
  CHECK((g.g_b - want_b).cwiseAbs().sum() == 0);
}

TEST_CASE("build_graphs rejects neighbor counts that exceed the pool") {
  Rng rng(408);
  const LabeledDataset data = random_dataset(rng, 2, 2, 3);
  CHECK_THROWS_AS(build_graphs(data, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_graphs(data, 1, 2), std::invalid_argument);
  CHECK_NOTHROW(build_graphs(data, 0, 0));
}

TEST_CASE("obj_Jd vanishes at exact reconstructions") {
  Rng rng(409);
  const StiefelPoint u = StiefelPoint::identity(4, 3);
  const LabeledDataset data = random_dataset(rng, 2, 1, 4);
  // One atom per class, each exactly the projected sample of that class.
  const std::vector<SpdMatrix> proj = project_dataset(u, data);
  std::vector<std::vector<SpdMatrix>> blocks(2);
  blocks[0].push_back(proj[0]);
  blocks[1].push_back(proj[1]);
  const Dictionary dict(std::move(blocks));

  // Identity codes: every sample is its own atom, foreign blocks are zero,
  // so reconstruction and cross terms all vanish.
  const CoefficientMatrix a{Matrix(Matrix::Identity(2, 2))};
  CHECK(obj_Jd(u, dict, a, data, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("obj_Jd with all-zero codes measures distance to the floor matrix") {
  Rng rng(410);
  const StiefelPoint u = StiefelPoint::identity(4, 3);
  const LabeledDataset data = random_dataset(rng, 2, 2, 4);
  const Dictionary dict = random_dictionary(rng, 2, 2, 3);
  const CoefficientMatrix a = CoefficientMatrix::zero(4, 4);

  const SpdMatrix floor_mat(kConicFloorRel * Matrix::Identity(3, 3));
  double want = 0.0;
  for (const auto& m : project_dataset(u, data)) want += airm_dist_sq(m, floor_mat);
  CHECK(obj_Jd(u, dict, a, data, 0.7) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("obj_Jd matches a naive summation oracle") {
  Rng rng(411);
  const int m = 6, d = 4, k = 2, n_per = 3;
  const LabeledDataset data = random_dataset(rng, k, n_per, m);
  const Dictionary dict = random_dictionary(rng, k, 2, d);
  const StiefelPoint u = random_stiefel(rng, m, d);
  Matrix codes(4, 6);
  for (int j = 0; j < codes.size(); ++j) codes(j / 6, j % 6) = 0.1 + rng.uniform();
  const CoefficientMatrix a(codes);
  const double lambda_d = 0.3;

  double want = 0.0;
  for (int n = 0; n < 6; ++n) {
    const int label = data.label(n);
    const Matrix mn = symmetrize(u.mat().transpose() * data.sample(n).mat() * u.mat());
    Matrix full = Matrix::Zero(d, d);
    for (int h = 0; h < 4; ++h) full += codes(h, n) * dict.atom(h).mat();
    Matrix own = Matrix::Zero(d, d);
    for (int i = 0; i < 2; ++i) {
      own += codes(dict.class_offset(label) + i, n) * dict.atom(dict.class_offset(label) + i).mat();
    }
    want += 0.5 * (naive_d2(mn, full) + naive_d2(mn, own));
    for (int j = 0; j < k; ++j) {
      if (j == label) continue;
      Matrix cross = Matrix::Zero(d, d);
      for (int i = 0; i < 2; ++i) {
        cross += codes(dict.class_offset(j) + i, n) * dict.atom(dict.class_offset(j) + i).mat();
      }
      want += lambda_d * cross.squaredNorm();
    }
  }
  CHECK(obj_Jd(u, dict, a, data, lambda_d) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("obj_Ja agrees with the Laplacian trace form") {
  Rng rng(412);
  const LabeledDataset data = random_dataset(rng, 2, 3, 3);
  const GraphSet g = build_graphs(data, 1, 2);
  Matrix codes = random_gaussian(rng, 4, 6).cwiseAbs();
  const CoefficientMatrix a(codes);

  const Matrix lap = Matrix(g.g_bin.rowwise().sum().asDiagonal()) - g.g_bin;
  const double want = (codes * lap * codes.transpose()).trace();
  CHECK(obj_Ja(a, g) == doctest::Approx(want).epsilon(1e-10));

  const CoefficientMatrix same(Matrix::Ones(4, 6));
  CHECK(obj_Ja(same, g) == doctest::Approx(0.0));

  GraphSet empty = g;
  empty.g_bin.setZero();
  CHECK(obj_Ja(a, empty) == 0.0);
}

TEST_CASE("obj_Ju matches a naive double loop") {
  Rng rng(413);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);
  const GraphSet g = build_graphs(data, 2, 2);
  const StiefelPoint u = random_stiefel(rng, 5, 3);

  double want = 0.0;
  for (int p = 0; p < 6; ++p) {
    for (int q = 0; q < 6; ++q) {
      if (g.g_rd(p, q) == 0.0) continue;
      const Matrix mp = symmetrize(u.mat().transpose() * data.sample(p).mat() * u.mat());
      const Matrix mq = symmetrize(u.mat().transpose() * data.sample(q).mat() * u.mat());
      want += 0.5 * g.g_rd(p, q) * naive_d2(mp, mq);
    }
  }
  CHECK(obj_Ju(u, data, g) == doctest::Approx(want).epsilon(1e-10));

  GraphSet empty = g;
  empty.g_rd.setZero();
  CHECK(obj_Ju(u, data, empty) == 0.0);
}

TEST_CASE("obj_regularizers closed forms") {
  Rng rng(414);
  const Dictionary dict = random_dictionary(rng, 2, 2, 3);
  double traces = 0.0;
  for (int h = 0; h < 4; ++h) traces += dict.atom(h).mat().trace();

  const Regularizers at_zero = obj_regularizers(CoefficientMatrix::zero(4, 3), dict);
  CHECK(at_zero.r_s == 0.0);
  CHECK(at_zero.r_r == 0.0);
  CHECK(at_zero.r_d == doctest::Approx(traces));

  Matrix one = Matrix::Zero(4, 3);
  one(1, 2) = 2.0;
  const Regularizers single = obj_regularizers(CoefficientMatrix(one), dict);
  CHECK(single.r_s == 2.0);
  CHECK(single.r_r == 4.0);

  Matrix codes = random_gaussian(rng, 4, 3).cwiseAbs();
  const Regularizers reg = obj_regularizers(CoefficientMatrix(codes), dict);
  double rs = 0.0, rr = 0.0;
  for (int i = 0; i < codes.size(); ++i) {
    rs += codes(i / 3, i % 3);
    rr += codes(i / 3, i % 3) * codes(i / 3, i % 3);
  }
  CHECK(reg.r_s == doctest::Approx(rs).epsilon(1e-12));
  CHECK(reg.r_r == doctest::Approx(rr).epsilon(1e-12));
}

TEST_CASE("full_objective combines all terms with their weights") {
  Rng rng(415);
  const LabeledDataset data = random_dataset(rng, 2, 3, 5);
  const GraphSet g = build_graphs(data, 1, 1);
  const Dictionary dict = random_dictionary(rng, 2, 2, 3);
  const StiefelPoint u = random_stiefel(rng, 5, 3);
  const CoefficientMatrix a(random_gaussian(rng, 4, 6).cwiseAbs());

  HyperParams hp;
  hp.lambda_1 = 0.01;
  hp.lambda_2 = 0.02;
  hp.lambda_a = 0.03;
  hp.lambda_u = 0.04;
  hp.lambda_d_cross = 0.05;
  hp.lambda_d_reg = 0.06;

  const Regularizers reg = obj_regularizers(a, dict);
  const double want = obj_Jd(u, dict, a, data, hp.lambda_d_cross) + hp.lambda_a * obj_Ja(a, g) +
                      hp.lambda_u * obj_Ju(u, data, g) + hp.lambda_1 * reg.r_s +
                      hp.lambda_2 * reg.r_r + hp.lambda_d_reg * reg.r_d;
  CHECK(full_objective(u, dict, a, data, g, hp) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("HyperParams validation") {
  HyperParams hp;
  hp.d = 3;
  CHECK_NOTHROW(hp.validate(5));
  hp.d = 5;
  CHECK_THROWS_AS(hp.validate(5), std::invalid_argument);
  hp.freeze_u = true;
  CHECK_NOTHROW(hp.validate(5));
  hp.lambda_a = -1.0;
  CHECK_THROWS_AS(hp.validate(5), std::invalid_argument);
}
