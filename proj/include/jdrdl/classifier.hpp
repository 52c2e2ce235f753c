#pragma once

#include <iosfwd>
#include <vector>

#include "jdrdl/model.hpp"
#include "jdrdl/spg.hpp"

namespace jdrdl {

/// Coding objective for a test sample: half the squared distance of m_x to
/// the floored dictionary combination plus the l1 penalty. m_x is the sample
/// already projected into the dictionary's space.
double coding_objective(const Dictionary& dict, const SpdMatrix& m_x, const Vector& a,
                        double lambda_1);

/// Gradient of coding_objective. A floored combination contributes only the
/// l1 term, matching the training-time convention.
Vector coding_gradient(const Dictionary& dict, const SpdMatrix& m_x, const Vector& a,
                       double lambda_1);

struct EncodeResult {
  NonnegVector code;
  bool degenerate;  // the zero code won (reconstruction sits on the floor)
};

/// Codes a projected sample over a dictionary: projected-gradient descent
/// from a uniform positive start, compared against the all-zero candidate.
EncodeResult encode_over(const Dictionary& dict, const SpdMatrix& m_x, double lambda_1,
                         const SpgOptions& opts = {});

/// Codes a raw test sample over a trained model's dictionary using the
/// model's l1 weight.
EncodeResult encode_test(const JdrdlModel& model, const SpdMatrix& x,
                         const SpgOptions& opts = {});

/// Class residual: squared distance of the projected sample to the floored
/// own-class reconstruction plus sigma times the squared deviation of the
/// full code from the class mean code.
double residual(const JdrdlModel& model, const SpdMatrix& x, const Vector& code, int k);

struct Prediction {
  int label;          // argmin of residuals, lowest index on ties
  Vector residuals;   // length K
  NonnegVector code;  // length H
  bool degenerate;
};

Prediction predict(const JdrdlModel& model, const SpdMatrix& x, const SpgOptions& opts = {});

enum class NnMetric { Airm, Stein };

/// Nearest-neighbor label under the chosen squared distance; distance ties
/// resolve to the lowest sample index.
int nn_predict(const LabeledDataset& train, const SpdMatrix& x, NnMetric metric);

/// Sparse-representation baseline: the training samples themselves form the
/// dictionary (grouped by class, no projection, no learned codes).
struct SrcModel {
  Dictionary dict;
};

SrcModel make_src_model(const LabeledDataset& train);

/// Class of the minimal reconstruction residual of x coded over the sample
/// dictionary (no class-mean term).
int src_predict(const SrcModel& src, const SpdMatrix& x, double lambda_1,
                const SpgOptions& opts = {});

/// Batch prediction rows: sample_id, true_label, predicted_label, and one
/// residual column per class.
void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions,
                           const std::vector<int>& true_labels);

}  // namespace jdrdl
