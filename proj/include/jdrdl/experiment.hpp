#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "jdrdl/model.hpp"
#include "jdrdl/rcg.hpp"
#include "jdrdl/rcm.hpp"
#include "jdrdl/rng.hpp"
#include "jdrdl/spg.hpp"

namespace jdrdl {

enum class Method { Jdrdl, NnAirm, NnStein, SrcAirm, Rdl };

Method parse_method(const std::string& name);
std::string method_name(Method m);

/// Where the experiment data comes from: a synthetic generator, raw MNIST
/// IDX files, or a previously extracted descriptor cache.
struct DatasetSpec {
  enum class Kind { Synthetic, MnistIdx, Cache };
  Kind kind = Kind::Synthetic;

  int synth_classes = 3;
  int synth_per_class = 20;
  int synth_dim = 5;
  double synth_separation = 1.0;
  double synth_noise = 0.1;
  std::uint64_t synth_seed = 0;

  std::string mnist_images;
  std::string mnist_labels;
  std::string cache_path;
};

struct SamplingSpec {
  int train_per_class = 10;
  int test_per_class = 10;
  int repeats = 1;
  std::uint64_t base_seed = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  SamplingSpec sampling;
  HyperParams hyper;
  std::vector<Method> methods{Method::Jdrdl, Method::NnAirm};
  CoordMode coords = CoordMode::Normalized;
  RcgOptions rcg;
  SpgOptions spg;
  std::string out_dir = ".";

  void validate() const;
};

/// Parses a flat key=value config file ('#' comments, blank lines ignored)
/// and applies each entry. Later keys override earlier ones.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Applies one dotted key (e.g. "hyper.lambda_1=0.01") to the config.
/// Throws std::invalid_argument for unknown keys or malformed values.
void apply_key_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Applies "key=value" strings, e.g. from command-line overrides.
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides);

/// Materializes the configured dataset (generates, extracts, or loads).
LabeledDataset load_dataset(const ExperimentConfig& config);

struct Split {
  std::vector<int> train_idx;
  std::vector<int> test_idx;
};

/// Per-class sampling without replacement: train_per_class + test_per_class
/// distinct indices are drawn per class, the first block forming the train
/// set. Draw order follows the documented generator, so splits reproduce
/// across runs and platforms.
Split sample_split(const LabeledDataset& data, int train_per_class, int test_per_class, Rng& rng);

struct RunRow {
  int repeat;
  std::uint64_t seed;
  Method method;
  double accuracy;  // NaN when failed
  bool failed;
  std::string error;
};

struct MethodSummary {
  Method method;
  double mean;
  double stddev;  // sample standard deviation; 0 for a single run
  int runs;       // successful runs entering the statistics
};

struct BenchmarkResult {
  std::vector<RunRow> rows;
  std::vector<MethodSummary> summaries;
};

/// Trains / evaluates one method on one split and returns its test accuracy.
double run_method(Method method, const LabeledDataset& data, const Split& split,
                  const ExperimentConfig& config, std::uint64_t seed);

/// Full protocol: repeats splits with seed = base_seed + r, runs every
/// configured method on each, and aggregates mean and sample standard
/// deviation per method. A method failure is recorded as a failed row and
/// the remaining work proceeds.
BenchmarkResult run_benchmark(const LabeledDataset& data, const ExperimentConfig& config);

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& summaries);

/// Machine-readable result document: configuration echo, per-run rows, and
/// summaries.
std::string results_json(const ExperimentConfig& config, const BenchmarkResult& result);

/// Writes a text file through a temporary sibling plus rename.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace jdrdl
