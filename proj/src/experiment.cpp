#include "jdrdl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "jdrdl/classifier.hpp"
#include "jdrdl/io.hpp"
#include "jdrdl/train.hpp"

namespace jdrdl {
namespace {

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("malformed number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::invalid_argument("malformed integer '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("malformed integer '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument("malformed boolean '" + s + "' (use true/false/1/0)");
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<int>& indices) {
  std::vector<SpdMatrix> samples;
  std::vector<int> labels;
  samples.reserve(indices.size());
  for (int idx : indices) {
    samples.push_back(data.sample(idx));
    labels.push_back(data.label(idx));
  }
  return LabeledDataset(std::move(samples), std::move(labels), data.num_classes());
}

LabeledDataset from_descriptors(std::vector<SpdMatrix> descriptors, std::vector<int> labels) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  return LabeledDataset(std::move(descriptors), std::move(labels), k);
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "jdrdl") return Method::Jdrdl;
  if (name == "nn_airm") return Method::NnAirm;
  if (name == "nn_stein") return Method::NnStein;
  if (name == "src_airm") return Method::SrcAirm;
  if (name == "rdl") return Method::Rdl;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Jdrdl: return "jdrdl";
    case Method::NnAirm: return "nn_airm";
    case Method::NnStein: return "nn_stein";
    case Method::SrcAirm: return "src_airm";
    case Method::Rdl: return "rdl";
  }
  throw std::logic_error("unreachable method tag");
}

void ExperimentConfig::validate() const {
  if (sampling.repeats < 1) throw std::invalid_argument("sampling.repeats must be >= 1");
  if (sampling.train_per_class < 1 || sampling.test_per_class < 1) {
    throw std::invalid_argument("sampling counts must be positive");
  }
  if (methods.empty()) throw std::invalid_argument("method list must not be empty");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      if (methods[i] == methods[j]) {
        throw std::invalid_argument("duplicate method '" + method_name(methods[i]) + "'");
      }
    }
  }
}

void apply_key_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "dataset.kind") {
    if (value == "synthetic") c.dataset.kind = DatasetSpec::Kind::Synthetic;
    else if (value == "mnist") c.dataset.kind = DatasetSpec::Kind::MnistIdx;
    else if (value == "cache") c.dataset.kind = DatasetSpec::Kind::Cache;
    else throw std::invalid_argument("dataset.kind must be synthetic|mnist|cache");
  } else if (key == "dataset.synth_classes") {
    c.dataset.synth_classes = parse_int(value);
  } else if (key == "dataset.synth_per_class") {
    c.dataset.synth_per_class = parse_int(value);
  } else if (key == "dataset.synth_dim") {
    c.dataset.synth_dim = parse_int(value);
  } else if (key == "dataset.synth_separation") {
    c.dataset.synth_separation = parse_double(value);
  } else if (key == "dataset.synth_noise") {
    c.dataset.synth_noise = parse_double(value);
  } else if (key == "dataset.synth_seed") {
    c.dataset.synth_seed = parse_u64(value);
  } else if (key == "dataset.mnist_images") {
    c.dataset.mnist_images = value;
  } else if (key == "dataset.mnist_labels") {
    c.dataset.mnist_labels = value;
  } else if (key == "dataset.cache_path") {
    c.dataset.cache_path = value;
  } else if (key == "sampling.train_per_class") {
    c.sampling.train_per_class = parse_int(value);
  } else if (key == "sampling.test_per_class") {
    c.sampling.test_per_class = parse_int(value);
  } else if (key == "sampling.repeats") {
    c.sampling.repeats = parse_int(value);
  } else if (key == "sampling.base_seed") {
    c.sampling.base_seed = parse_u64(value);
  } else if (key == "hyper.lambda_1") {
    c.hyper.lambda_1 = parse_double(value);
  } else if (key == "hyper.lambda_2") {
    c.hyper.lambda_2 = parse_double(value);
  } else if (key == "hyper.lambda_a") {
    c.hyper.lambda_a = parse_double(value);
  } else if (key == "hyper.lambda_u") {
    c.hyper.lambda_u = parse_double(value);
  } else if (key == "hyper.lambda_d_cross") {
    c.hyper.lambda_d_cross = parse_double(value);
  } else if (key == "hyper.lambda_d_reg") {
    c.hyper.lambda_d_reg = parse_double(value);
  } else if (key == "hyper.sigma") {
    c.hyper.sigma = parse_double(value);
  } else if (key == "hyper.v_w") {
    c.hyper.v_w = parse_int(value);
  } else if (key == "hyper.v_b") {
    c.hyper.v_b = parse_int(value);
  } else if (key == "hyper.d") {
    c.hyper.d = parse_int(value);
  } else if (key == "hyper.outer_rounds") {
    c.hyper.outer_rounds = parse_int(value);
  } else if (key == "hyper.rel_change_tol") {
    c.hyper.rel_change_tol = parse_double(value);
  } else if (key == "hyper.u_init") {
    if (value == "mean_eigvecs") c.hyper.u_init = HyperParams::UInit::MeanEigvecs;
    else if (value == "random") c.hyper.u_init = HyperParams::UInit::Random;
    else throw std::invalid_argument("hyper.u_init must be mean_eigvecs|random");
  } else if (key == "hyper.atoms_per_class") {
    c.hyper.atoms_per_class = parse_int(value);
  } else if (key == "hyper.freeze_u") {
    c.hyper.freeze_u = parse_bool(value);
  } else if (key == "methods") {
    c.methods.clear();
    std::istringstream list(value);
    std::string item;
    while (std::getline(list, item, ',')) {
      item = trim(item);
      if (!item.empty()) c.methods.push_back(parse_method(item));
    }
  } else if (key == "coords") {
    if (value == "raw") c.coords = CoordMode::Raw;
    else if (value == "normalized") c.coords = CoordMode::Normalized;
    else throw std::invalid_argument("coords must be raw|normalized");
  } else if (key == "rcg.max_iters") {
    c.rcg.max_iters = parse_int(value);
  } else if (key == "rcg.grad_norm_tol") {
    c.rcg.grad_norm_tol = parse_double(value);
  } else if (key == "spg.max_iters") {
    c.spg.max_iters = parse_int(value);
  } else if (key == "spg.kkt_tol") {
    c.spg.kkt_tol = parse_double(value);
  } else if (key == "out_dir") {
    c.out_dir = value;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value");
    }
    try {
      apply_key_value(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config");
  return parse_config(in);
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides) {
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("override '" + kv + "': expected key=value");
    }
    apply_key_value(config, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

LabeledDataset load_dataset(const ExperimentConfig& config) {
  switch (config.dataset.kind) {
    case DatasetSpec::Kind::Synthetic:
      return synthetic_spd_dataset(config.dataset.synth_classes, config.dataset.synth_per_class,
                                   config.dataset.synth_dim, config.dataset.synth_separation,
                                   config.dataset.synth_noise, config.dataset.synth_seed);
    case DatasetSpec::Kind::MnistIdx: {
      const MnistData mnist = load_mnist(config.dataset.mnist_images, config.dataset.mnist_labels);
      std::vector<SpdMatrix> descriptors;
      descriptors.reserve(mnist.images.size());
      for (const GrayImage& img : mnist.images) {
        descriptors.push_back(mnist_rcm(img, config.coords));
      }
      return from_descriptors(std::move(descriptors), mnist.labels);
    }
    case DatasetSpec::Kind::Cache: {
      DescriptorCache cache = load_descriptors(config.dataset.cache_path);
      return from_descriptors(std::move(cache.descriptors), std::move(cache.labels));
    }
  }
  throw std::logic_error("unreachable dataset kind");
}

Split sample_split(const LabeledDataset& data, int train_per_class, int test_per_class,
                   Rng& rng) {
  Split split;
  const int need = train_per_class + test_per_class;
  for (int k = 0; k < data.num_classes(); ++k) {
    const std::vector<int> pool = data.class_indices(k);
    if (static_cast<int>(pool.size()) < need) {
      throw std::invalid_argument("class " + std::to_string(k) + " has " +
                                  std::to_string(pool.size()) + " samples, needs " +
                                  std::to_string(need));
    }
    const std::vector<std::size_t> draw =
        rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(need));
    for (int i = 0; i < train_per_class; ++i) split.train_idx.push_back(pool[draw[i]]);
    for (int i = train_per_class; i < need; ++i) split.test_idx.push_back(pool[draw[i]]);
  }
  return split;
}

double run_method(Method method, const LabeledDataset& data, const Split& split,
                  const ExperimentConfig& config, std::uint64_t seed) {
  const LabeledDataset train_data = subset(data, split.train_idx);
  const LabeledDataset test_data = subset(data, split.test_idx);

  int correct = 0;
  switch (method) {
    case Method::Jdrdl:
    case Method::Rdl: {
      HyperParams hyper = config.hyper;
      if (method == Method::Rdl) {
        // Dictionary learning without the projection: full dimension, frozen
        // basis, and no graph terms (whose role is to shape the projection).
        hyper.freeze_u = true;
        hyper.d = data.dim();
        hyper.lambda_a = 0.0;
        hyper.lambda_u = 0.0;
        hyper.v_w = 0;
        hyper.v_b = 0;
      }
      const TrainResult trained = train(train_data, hyper, seed, config.rcg, config.spg);
      for (int n = 0; n < test_data.size(); ++n) {
        if (predict(trained.model, test_data.sample(n), config.spg).label == test_data.label(n)) {
          ++correct;
        }
      }
      break;
    }
    case Method::NnAirm:
    case Method::NnStein: {
      const NnMetric metric = method == Method::NnAirm ? NnMetric::Airm : NnMetric::Stein;
      for (int n = 0; n < test_data.size(); ++n) {
        if (nn_predict(train_data, test_data.sample(n), metric) == test_data.label(n)) {
          ++correct;
        }
      }
      break;
    }
    case Method::SrcAirm: {
      const SrcModel src = make_src_model(train_data);
      for (int n = 0; n < test_data.size(); ++n) {
        if (src_predict(src, test_data.sample(n), config.hyper.lambda_1, config.spg) ==
            test_data.label(n)) {
          ++correct;
        }
      }
      break;
    }
  }
  return static_cast<double>(correct) / test_data.size();
}

BenchmarkResult run_benchmark(const LabeledDataset& data, const ExperimentConfig& config) {
  config.validate();
  BenchmarkResult result;

  for (int r = 0; r < config.sampling.repeats; ++r) {
    const std::uint64_t seed = config.sampling.base_seed + static_cast<std::uint64_t>(r);
    Rng rng(seed);
    const Split split =
        sample_split(data, config.sampling.train_per_class, config.sampling.test_per_class, rng);
    for (Method method : config.methods) {
      RunRow row{r, seed, method, std::numeric_limits<double>::quiet_NaN(), false, ""};
      try {
        row.accuracy = run_method(method, data, split, config, seed);
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      result.rows.push_back(std::move(row));
    }
  }

  for (Method method : config.methods) {
    MethodSummary s{method, 0.0, 0.0, 0};
    for (const RunRow& row : result.rows) {
      if (row.method == method && !row.failed) {
        s.mean += row.accuracy;
        ++s.runs;
      }
    }
    if (s.runs > 0) {
      s.mean /= s.runs;
      if (s.runs > 1) {
        double ss = 0.0;
        for (const RunRow& row : result.rows) {
          if (row.method == method && !row.failed) {
            ss += (row.accuracy - s.mean) * (row.accuracy - s.mean);
          }
        }
        s.stddev = std::sqrt(ss / (s.runs - 1));
      }
    } else {
      s.mean = std::numeric_limits<double>::quiet_NaN();
      s.stddev = std::numeric_limits<double>::quiet_NaN();
    }
    result.summaries.push_back(s);
  }
  return result;
}

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows) {
  out << "repeat,seed,method,accuracy,failed,error\n";
  for (const RunRow& row : rows) {
    out << row.repeat << ',' << row.seed << ',' << method_name(row.method) << ','
        << (row.failed ? "" : fmt17(row.accuracy)) << ',' << (row.failed ? 1 : 0) << ','
        << csv_escape(row.error) << "\n";
  }
}

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& summaries) {
  out << "method,mean,stddev,runs\n";
  for (const MethodSummary& s : summaries) {
    out << method_name(s.method) << ',' << fmt17(s.mean) << ',' << fmt17(s.stddev) << ','
        << s.runs << "\n";
  }
}

std::string results_json(const ExperimentConfig& config, const BenchmarkResult& result) {
  nlohmann::json doc;

  nlohmann::json ds;
  switch (config.dataset.kind) {
    case DatasetSpec::Kind::Synthetic:
      ds["kind"] = "synthetic";
      ds["classes"] = config.dataset.synth_classes;
      ds["per_class"] = config.dataset.synth_per_class;
      ds["dim"] = config.dataset.synth_dim;
      ds["separation"] = config.dataset.synth_separation;
      ds["noise"] = config.dataset.synth_noise;
      ds["seed"] = config.dataset.synth_seed;
      break;
    case DatasetSpec::Kind::MnistIdx:
      ds["kind"] = "mnist";
      ds["images"] = config.dataset.mnist_images;
      ds["labels"] = config.dataset.mnist_labels;
      break;
    case DatasetSpec::Kind::Cache:
      ds["kind"] = "cache";
      ds["path"] = config.dataset.cache_path;
      break;
  }
  doc["dataset"] = ds;

  doc["sampling"] = {{"train_per_class", config.sampling.train_per_class},
                     {"test_per_class", config.sampling.test_per_class},
                     {"repeats", config.sampling.repeats},
                     {"base_seed", config.sampling.base_seed}};

  const HyperParams& hp = config.hyper;
  doc["hyper"] = {{"lambda_1", hp.lambda_1},
                  {"lambda_2", hp.lambda_2},
                  {"lambda_a", hp.lambda_a},
                  {"lambda_u", hp.lambda_u},
                  {"lambda_d_cross", hp.lambda_d_cross},
                  {"lambda_d_reg", hp.lambda_d_reg},
                  {"sigma", hp.sigma},
                  {"v_w", hp.v_w},
                  {"v_b", hp.v_b},
                  {"d", hp.d},
                  {"outer_rounds", hp.outer_rounds},
                  {"rel_change_tol", hp.rel_change_tol},
                  {"u_init", hp.u_init == HyperParams::UInit::MeanEigvecs ? "mean_eigvecs"
                                                                          : "random"},
                  {"atoms_per_class", hp.atoms_per_class},
                  {"freeze_u", hp.freeze_u}};

  std::vector<std::string> names;
  for (Method m : config.methods) names.push_back(method_name(m));
  doc["methods"] = names;

  doc["runs"] = nlohmann::json::array();
  for (const RunRow& row : result.rows) {
    nlohmann::json jr{{"repeat", row.repeat},
                      {"seed", row.seed},
                      {"method", method_name(row.method)},
                      {"failed", row.failed}};
    if (row.failed) {
      jr["error"] = row.error;
    } else {
      jr["accuracy"] = row.accuracy;
    }
    doc["runs"].push_back(jr);
  }

  doc["summary"] = nlohmann::json::array();
  for (const MethodSummary& s : result.summaries) {
    doc["summary"].push_back({{"method", method_name(s.method)},
                              {"mean", s.mean},
                              {"stddev", s.stddev},
                              {"runs", s.runs}});
  }
  return doc.dump(2) + "\n";
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace jdrdl
