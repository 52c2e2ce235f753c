#include <cmath>
#include <sstream>

#include "doctest.h"
#include "jdrdl/classifier.hpp"
#include "jdrdl/train.hpp"
#include "test_helpers.hpp"

using namespace jdrdl;
using testing::random_gaussian;
using testing::random_spd;
using testing::random_stiefel;
using testing::random_sym;

namespace {

Dictionary random_dictionary(Rng& rng, int k, int per_class, int d) {
  std::vector<std::vector<SpdMatrix>> blocks(k);
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i) blocks[c].push_back(random_spd(rng, d));
  }
  return Dictionary(std::move(blocks));
}

double naive_d2(const Matrix& a, const Matrix& b) {
  const Matrix ai = spd_fn(a, SpdFn::InvSqrt);
  return spd_fn(symmetrize(ai * b * ai), SpdFn::Log).squaredNorm();
}

/// Two classes that differ in shape: each center is the identity bumped
/// along its own axis. Pure rescalings would be conically representable by
/// either class; distinct directions are not.
LabeledDataset separated_dataset(Rng& rng, int per_class, int m, double bump) {
  std::vector<SpdMatrix> samples;
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c) {
    Matrix base = Matrix::Identity(m, m);
    base(2 * c, 2 * c) += bump;
    for (int i = 0; i < per_class; ++i) {
      const SymTangent noise(0.1 * random_sym(rng, m));
      samples.push_back(spd_retract(SpdMatrix(base), noise, 1.0));
      labels.push_back(c);
    }
  }
  return LabeledDataset(std::move(samples), std::move(labels), 2);
}

JdrdlModel handmade_model(Rng& rng, int m, int d, int k, int atoms_per, double sigma) {
  const StiefelPoint u = random_stiefel(rng, m, d);
  Dictionary dict = random_dictionary(rng, k, atoms_per, d);
  std::vector<Vector> means;
  for (int c = 0; c < k; ++c) {
    means.push_back(random_gaussian(rng, k * atoms_per, 1).col(0).cwiseAbs());
  }
  HyperParams hyper;
  hyper.d = d;
  hyper.sigma = sigma;
  return JdrdlModel{u, std::move(dict), CoefficientMatrix::zero(k * atoms_per, 1),
                    std::move(means), hyper};
}

}  // namespace

TEST_CASE("coding gradient matches finite differences") {
  Rng rng(801);
  const Dictionary dict = random_dictionary(rng, 2, 2, 4);
  const SpdMatrix m_x = random_spd(rng, 4, 0.5, 3.0);
  const double lambda_1 = 0.05, t = 1e-6;

  for (int rep = 0; rep < 20; ++rep) {
    Vector a(4);
    for (int i = 0; i < 4; ++i) a[i] = 0.1 + rng.uniform();
    const Vector grad = coding_gradient(dict, m_x, a, lambda_1);
    const Vector dir = random_gaussian(rng, 4, 1).col(0);
    const double fd = (coding_objective(dict, m_x, a + t * dir, lambda_1) -
                       coding_objective(dict, m_x, a - t * dir, lambda_1)) /
                      (2.0 * t);
    CHECK(std::abs(grad.dot(dir) - fd) / std::max(std::abs(fd), 1e-8) < 1e-5);
  }

  // On the floor the objective is locally the l1 term alone.
  const Vector zero = Vector::Zero(4);
  CHECK((coding_gradient(dict, m_x, zero, lambda_1) -
         Vector::Constant(4, lambda_1))
            .norm() == 0.0);
}

TEST_CASE("encode_over concentrates on an exactly matching atom") {
  Rng rng(802);
  const Dictionary dict = random_dictionary(rng, 2, 2, 3);
  for (int h = 0; h < 4; ++h) {
    const EncodeResult enc = encode_over(dict, dict.atom(h), 1e-8);
    REQUIRE_FALSE(enc.degenerate);
    const double mass = enc.code.vec().sum();
    CHECK(enc.code.vec()[h] > 0.99 * mass);
    CHECK(coding_objective(dict, dict.atom(h), enc.code.vec(), 1e-8) < 1e-6);
  }
}

TEST_CASE("encode_test concentrates through the projection") {
  Rng rng(803);
  JdrdlModel model = handmade_model(rng, 5, 3, 2, 2, 1.0);
  model.hyper.lambda_1 = 1e-8;
  const int h = 2;
  // Ambient sample whose projection is exactly atom h.
  const Matrix um = model.u.mat();
  const Matrix x = um * model.dict.atom(h).mat() * um.transpose() +
                   0.5 * (Matrix::Identity(5, 5) - um * um.transpose());
  const EncodeResult enc = encode_test(model, SpdMatrix(symmetrize(x)));
  REQUIRE_FALSE(enc.degenerate);
  CHECK(enc.code.vec()[h] > 0.99 * enc.code.vec().sum());
}

TEST_CASE("a dominating l1 weight yields the zero code with a degenerate flag") {
  Rng rng(804);
  JdrdlModel model = handmade_model(rng, 5, 3, 2, 2, 1.0);
  model.hyper.lambda_1 = 1e12;
  const SpdMatrix x = random_spd(rng, 5, 0.5, 3.0);
  const EncodeResult enc = encode_test(model, x);
  CHECK(enc.degenerate);
  CHECK(enc.code.vec().norm() == 0.0);

  const Prediction pred = predict(model, x);
  CHECK(pred.degenerate);
  CHECK(pred.label >= 0);
}

TEST_CASE("residual matches a naive recomputation") {
  Rng rng(805);
  const JdrdlModel model = handmade_model(rng, 5, 3, 2, 2, 0.7);
  const SpdMatrix x = random_spd(rng, 5, 0.5, 3.0);
  Vector code = random_gaussian(rng, 4, 1).col(0).cwiseAbs();
  code.array() += 0.05;

  for (int k = 0; k < 2; ++k) {
    const Matrix m_x =
        symmetrize(model.u.mat().transpose() * x.mat() * model.u.mat());
    Matrix recon = Matrix::Zero(3, 3);
    for (int i = 0; i < 2; ++i) {
      recon += code[model.dict.class_offset(k) + i] *
               model.dict.atom(model.dict.class_offset(k) + i).mat();
    }
    const double want =
        naive_d2(m_x, recon) + 0.7 * (code - model.class_means[k]).squaredNorm();
    CHECK(residual(model, x, code, k) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("residual is zero at an exact reconstruction with matching mean") {
  Rng rng(806);
  JdrdlModel model = handmade_model(rng, 5, 3, 2, 1, 1.0);
  Vector code(2);
  code << 1.0, 0.0;
  model.class_means[0] = code;
  const Matrix um = model.u.mat();
  const Matrix x = um * model.dict.atom(0).mat() * um.transpose() +
                   0.3 * (Matrix::Identity(5, 5) - um * um.transpose());
  CHECK(residual(model, SpdMatrix(symmetrize(x)), code, 0) ==
        doctest::Approx(0.0).epsilon(1e-10));

  // sigma = 0 removes the mean-deviation term entirely.
  model.hyper.sigma = 0.0;
  model.class_means[0].setZero();
  CHECK(residual(model, SpdMatrix(symmetrize(x)), code, 0) ==
        doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("predict ties resolve to the lowest class index") {
  Rng rng(807);
  JdrdlModel model = handmade_model(rng, 4, 3, 2, 2, 1.0);
  // Make class 1 an exact copy of class 0, with block-symmetric means:
  // the two residuals then coincide for every query.
  model.dict.set_atom(2, model.dict.atom(0));
  model.dict.set_atom(3, model.dict.atom(1));
  Vector mean(4);
  mean << 0.4, 0.1, 0.4, 0.1;
  model.class_means[0] = mean;
  model.class_means[1] = mean;

  const SpdMatrix x = random_spd(rng, 4, 0.5, 2.0);
  const Prediction pred = predict(model, x);
  CHECK(pred.residuals.size() == 2);
  // Identical class dictionaries and means cannot favor class 1.
  CHECK(pred.label == 0);
}

TEST_CASE("single-class models always predict class 0") {
  Rng rng(808);
  const JdrdlModel model = handmade_model(rng, 4, 3, 1, 2, 1.0);
  for (int rep = 0; rep < 3; ++rep) {
    CHECK(predict(model, random_spd(rng, 4, 0.5, 3.0)).label == 0);
  }
}

TEST_CASE("trained model classifies a separable training set perfectly") {
  Rng rng(809);
  const LabeledDataset data = separated_dataset(rng, 3, 4, 12.0);

  HyperParams hyper;
  hyper.d = 3;
  hyper.atoms_per_class = 3;
  hyper.outer_rounds = 3;
  hyper.v_w = 1;
  hyper.v_b = 1;

  RcgOptions rcg;
  rcg.max_iters = 30;
  const TrainResult res = train(data, hyper, 21, rcg);
  for (int n = 0; n < data.size(); ++n) {
    CHECK(predict(res.model, data.sample(n)).label == data.label(n));
  }
}

TEST_CASE("nn_predict returns the label of the nearest sample") {
  Rng rng(810);
  const LabeledDataset data = separated_dataset(rng, 3, 4, 8.0);

  // A training sample is its own nearest neighbor.
  CHECK(nn_predict(data, data.sample(0), NnMetric::Airm) == 0);
  CHECK(nn_predict(data, data.sample(4), NnMetric::Airm) == 1);
  CHECK(nn_predict(data, data.sample(4), NnMetric::Stein) == 1);

  // Independent exhaustive re-computation with the matrix-function distance.
  for (int rep = 0; rep < 5; ++rep) {
    const SpdMatrix q = random_spd(rng, 4, 0.5, 6.0);
    int best = 0;
    double best_d = naive_d2(data.sample(0).mat(), q.mat());
    for (int n = 1; n < data.size(); ++n) {
      const double d = naive_d2(data.sample(n).mat(), q.mat());
      if (d < best_d) {
        best_d = d;
        best = n;
      }
    }
    CHECK(nn_predict(data, q, NnMetric::Airm) == data.label(best));
  }

  const LabeledDataset solo({random_spd(rng, 3)}, {0}, 1);
  CHECK(nn_predict(solo, random_spd(rng, 3), NnMetric::Airm) == 0);
  CHECK(nn_predict(solo, random_spd(rng, 3), NnMetric::Stein) == 0);
}

TEST_CASE("nn_predict breaks exact ties by sample index") {
  Rng rng(811);
  const SpdMatrix s = random_spd(rng, 3);
  const LabeledDataset data({s, s}, {1, 0}, 2);
  CHECK(nn_predict(data, s, NnMetric::Airm) == 1);  // sample 0 carries label 1
}

TEST_CASE("src_predict recovers the class of a dictionary sample") {
  Rng rng(812);
  const LabeledDataset data = separated_dataset(rng, 3, 4, 10.0);
  const SrcModel src = make_src_model(data);
  for (int n = 0; n < data.size(); ++n) {
    CHECK(src_predict(src, data.sample(n), 1e-8) == data.label(n));
  }

  const LabeledDataset solo({random_spd(rng, 3)}, {0}, 1);
  CHECK(src_predict(make_src_model(solo), random_spd(rng, 3), 1e-4) == 0);

  // A dominating l1 weight floors every class residual equally.
  CHECK(src_predict(src, random_spd(rng, 4, 0.5, 2.0), 1e12) == 0);
}

TEST_CASE("write_predictions_csv emits one row per sample") {
  Vector r0(2), r1(2);
  r0 << 0.5, 1.5;
  r1 << 2.0, 0.25;
  const std::vector<Prediction> preds{
      Prediction{0, r0, NonnegVector::zero(3), false},
      Prediction{1, r1, NonnegVector::zero(3), true},
  };
  std::ostringstream out;
  write_predictions_csv(out, preds, {0, 0});
  CHECK(out.str() ==
        "sample_id,true_label,predicted_label,residual_0,residual_1\n"
        "0,0,0,0.5,1.5\n"
        "1,0,1,2,0.25\n");

  std::ostringstream empty;
  write_predictions_csv(empty, {}, {});
  CHECK(empty.str() == "sample_id,true_label,predicted_label\n");

  CHECK_THROWS_AS(write_predictions_csv(out, preds, {0}), std::invalid_argument);
}
