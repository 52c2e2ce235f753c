// Command-line driver: descriptor extraction, training, prediction,
// benchmarking, and a finite-difference gradient self-check.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or runtime
// error, 3 self-check failure.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "jdrdl/classifier.hpp"
#include "jdrdl/experiment.hpp"
#include "jdrdl/io.hpp"
#include "jdrdl/rcm.hpp"
#include "jdrdl/train.hpp"

namespace {

using namespace jdrdl;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheckFailed = 3;

ExperimentConfig resolve_config(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  if (!config_path.empty()) config = load_config(config_path);
  apply_overrides(config, overrides);
  return config;
}

int cmd_extract(const ExperimentConfig& config, const std::string& out_path) {
  DescriptorCache cache;
  if (config.dataset.kind == DatasetSpec::Kind::MnistIdx) {
    // Read the IDX pair directly instead of through load_dataset so that an
    // empty or single-class input can still be cached.
    const MnistData mnist = load_mnist(config.dataset.mnist_images, config.dataset.mnist_labels);
    cache.descriptors.reserve(mnist.images.size());
    for (std::size_t i = 0; i < mnist.images.size(); ++i) {
      cache.descriptors.push_back(mnist_rcm(mnist.images[i], config.coords));
      cache.labels.push_back(mnist.labels[i]);
    }
  } else {
    const LabeledDataset data = load_dataset(config);
    cache.descriptors.reserve(data.size());
    for (int n = 0; n < data.size(); ++n) {
      cache.descriptors.push_back(data.sample(n));
      cache.labels.push_back(data.label(n));
    }
  }
  save_descriptors(cache, out_path);
  const int dim = cache.descriptors.empty() ? 0 : cache.descriptors.front().dim();
  std::cout << "wrote " << cache.descriptors.size() << " descriptors (dim " << dim << ") to "
            << out_path << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& config, std::uint64_t seed, const std::string& out_path) {
  const LabeledDataset data = load_dataset(config);
  const TrainResult result = train(data, config.hyper, seed, config.rcg, config.spg);
  save_model(result.model, out_path);
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "trained on " << data.size() << " samples (" << data.num_classes()
            << " classes), objective " << result.objective_trace.front() << " -> "
            << result.objective_trace.back() << ", model written to " << out_path << "\n";
  return 0;
}

int cmd_predict(const ExperimentConfig& config, const std::string& model_path,
                const std::string& out_path) {
  const JdrdlModel model = load_model(model_path);
  const LabeledDataset data = load_dataset(config);
  std::vector<Prediction> predictions;
  std::vector<int> true_labels;
  predictions.reserve(data.size());
  int correct = 0;
  for (int n = 0; n < data.size(); ++n) {
    predictions.push_back(predict(model, data.sample(n), config.spg));
    true_labels.push_back(data.label(n));
    if (predictions.back().label == data.label(n)) ++correct;
  }
  std::ostringstream csv;
  write_predictions_csv(csv, predictions, true_labels);
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    write_text_atomic(out_path, csv.str());
    std::cout << "predicted " << data.size() << " samples, accuracy "
              << static_cast<double>(correct) / data.size() << ", rows written to " << out_path
              << "\n";
  }
  return 0;
}

int cmd_benchmark(const ExperimentConfig& config, const std::string& out_dir) {
  const LabeledDataset data = load_dataset(config);
  const BenchmarkResult result = run_benchmark(data, config);

  std::filesystem::create_directories(out_dir);
  const auto in_dir = [&out_dir](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  std::ostringstream runs, summary;
  write_runs_csv(runs, result.rows);
  write_summary_csv(summary, result.summaries);
  write_text_atomic(in_dir("runs.csv"), runs.str());
  write_text_atomic(in_dir("summary.csv"), summary.str());
  write_text_atomic(in_dir("results.json"), results_json(config, result));

  std::cout << "method        mean      stddev    runs\n";
  for (const MethodSummary& s : result.summaries) {
    std::printf("%-12s  %.6f  %.6f  %d\n", method_name(s.method).c_str(), s.mean, s.stddev,
                s.runs);
  }
  std::cout << "results in " << out_dir << " (runs.csv, summary.csv, results.json)\n";
  bool any_failed = false;
  for (const RunRow& row : result.rows) {
    if (row.failed) {
      std::cerr << "failed: repeat " << row.repeat << " " << method_name(row.method) << ": "
                << row.error << "\n";
      any_failed = true;
    }
  }
  return any_failed ? kExitData : 0;
}

// ---------------------------------------------------------------------------
// gradcheck: finite-difference validation of every analytic gradient at a
// seeded small instance (ambient 6, reduced 4, 2 classes, 4 atoms, 8 samples).

constexpr double kFdStep = 1e-6;
constexpr double kFdTol = 1e-5;

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-8);
}

Matrix random_sym(int dim, Rng& rng) {
  Matrix z(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) z(i, j) = rng.normal();
  }
  return symmetrize(z);
}

Dictionary dict_with(const Dictionary& proto, const std::vector<SpdMatrix>& atoms) {
  Dictionary d = proto;
  for (int h = 0; h < d.total_atoms(); ++h) d.set_atom(h, atoms.at(h));
  return d;
}

struct CheckReport {
  std::string name;
  double worst = 0.0;
};

struct GradcheckInstance {
  LabeledDataset data;
  StiefelPoint u;
  Dictionary dict;
  CoefficientMatrix codes;
  GraphSet graphs;
  HyperParams hyper;
};

GradcheckInstance make_instance(std::uint64_t seed) {
  const LabeledDataset data = synthetic_spd_dataset(2, 4, 6, 1.0, 0.3, seed);
  Rng rng(seed + 1);
  HyperParams hyper;
  hyper.lambda_1 = 0.01;
  hyper.lambda_2 = 0.02;
  hyper.lambda_a = 0.03;
  hyper.lambda_u = 0.05;
  hyper.lambda_d_cross = 0.04;
  hyper.lambda_d_reg = 0.01;
  hyper.v_w = 1;
  hyper.v_b = 1;
  hyper.d = 4;
  StiefelPoint u = init_projection(data, hyper.d, HyperParams::UInit::MeanEigvecs, rng);
  Dictionary dict = init_dictionary(project_dataset(u, data), data, 2, rng);
  Matrix entries(dict.total_atoms(), data.size());
  for (int h = 0; h < entries.rows(); ++h) {
    for (int n = 0; n < entries.cols(); ++n) entries(h, n) = 0.1 + 0.4 * rng.uniform();
  }
  return GradcheckInstance{data,
                           std::move(u),
                           std::move(dict),
                           CoefficientMatrix(std::move(entries)),
                           build_graphs(data, hyper.v_w, hyper.v_b),
                           hyper};
}

// Distance-gradient check: both arguments of the squared AIRM distance,
// probed on well-conditioned matrices so the finite-difference truncation
// error stays far below the tolerance.
CheckReport check_distance(Rng& rng, double perturb) {
  CheckReport report{"airm_distance_gradient"};
  constexpr int dim = 6;
  const auto d2_of = [](const Matrix& m, const Matrix& s) {
    return dist_sq_grads(SpdEigen(m), s, false, false).d2;
  };
  const auto draw_spd = [&rng] { return spd_fn(0.3 * random_sym(dim, rng), SpdFn::ExpOfSym); };
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix m = draw_spd();
    const Matrix s = draw_spd();
    const DistGrads grads = dist_sq_grads(SpdEigen(m), s, true, true);
    const Matrix vm = random_sym(dim, rng) / std::sqrt(static_cast<double>(dim));
    const Matrix vs = random_sym(dim, rng) / std::sqrt(static_cast<double>(dim));
    const double fd_m = (d2_of(m + kFdStep * vm, s) - d2_of(m - kFdStep * vm, s)) / (2 * kFdStep);
    const double fd_s = (d2_of(m, s + kFdStep * vs) - d2_of(m, s - kFdStep * vs)) / (2 * kFdStep);
    const double got_m = (grads.g_m.array() * vm.array()).sum() + perturb;
    const double got_s = (grads.g_s.array() * vs.array()).sum() + perturb;
    report.worst = std::max({report.worst, rel_err(got_m, fd_m), rel_err(got_s, fd_s)});
  }
  return report;
}

// Dictionary sub-problem: Riemannian gradient at (U, atoms) against finite
// differences through the product retraction.
CheckReport check_dl_gradient(const GradcheckInstance& inst, Rng& rng, double perturb) {
  CheckReport report{"dictionary_objective_gradient"};
  const ProductPoint x{inst.u, inst.dict.atoms()};
  const auto cost = [&inst](const ProductPoint& p) {
    return dl_objective(StiefelPoint(p.stiefel.mat()), dict_with(inst.dict, p.spd), inst.codes,
                        inst.data, inst.graphs, inst.hyper);
  };
  const DlGradient egrad =
      egrad_dl(inst.u, inst.dict, inst.data, inst.codes, inst.graphs, inst.hyper);
  ProductTangent rgrad{project_tangent(inst.u, egrad.egrad_u), {}};
  for (int h = 0; h < inst.dict.total_atoms(); ++h) {
    rgrad.spd.push_back(
        egrad_to_rgrad_spd(inst.dict.atom(h), SymTangent(symmetrize(egrad.egrad_atoms[h]))));
  }
  const int m = inst.u.ambient_dim();
  const int d = inst.u.reduced_dim();
  for (int rep = 0; rep < 20; ++rep) {
    Matrix z(m, d);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
    }
    ProductTangent dir{project_tangent(inst.u, z), {}};
    for (int h = 0; h < inst.dict.total_atoms(); ++h) {
      dir.spd.push_back(SymTangent(random_sym(d, rng)));
    }
    const double norm = std::sqrt(product_inner(x, dir, dir));
    dir = tangent_scale(1.0 / norm, dir);
    const double fd =
        (cost(product_retract(x, dir, kFdStep)) - cost(product_retract(x, dir, -kFdStep))) /
        (2 * kFdStep);
    const double got = product_inner(x, rgrad, dir) + perturb;
    report.worst = std::max(report.worst, rel_err(got, fd));
  }
  return report;
}

// Sparse-coding column objective: gradient in the code vector.
CheckReport check_sc_gradient(const GradcheckInstance& inst, Rng& rng, double perturb) {
  CheckReport report{"coding_column_gradient"};
  const ScContext ctx(inst.u, inst.dict, inst.data, inst.graphs, inst.hyper);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = static_cast<int>(rng.index(inst.data.size()));
    const Vector a = inst.codes.col(n);
    Vector dir(a.size());
    for (int h = 0; h < dir.size(); ++h) dir[h] = rng.normal();
    dir.normalize();
    const double fd = (ctx.psi(n, a + kFdStep * dir, inst.codes.mat()) -
                       ctx.psi(n, a - kFdStep * dir, inst.codes.mat())) /
                      (2 * kFdStep);
    const double got = ctx.psi_grad(n, a, inst.codes.mat()).dot(dir) + perturb;
    report.worst = std::max(report.worst, rel_err(got, fd));
  }
  return report;
}

// Test-time coding objective: gradient in the code vector.
CheckReport check_encode_gradient(const GradcheckInstance& inst, Rng& rng, double perturb) {
  CheckReport report{"test_coding_gradient"};
  const std::vector<SpdMatrix> projected = project_dataset(inst.u, inst.data);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = static_cast<int>(rng.index(projected.size()));
    const SpdMatrix& m_x = projected[n];
    Vector a(inst.dict.total_atoms());
    for (int h = 0; h < a.size(); ++h) a[h] = 0.1 + 0.4 * rng.uniform();
    Vector dir(a.size());
    for (int h = 0; h < dir.size(); ++h) dir[h] = rng.normal();
    dir.normalize();
    const double lambda_1 = inst.hyper.lambda_1;
    const double fd = (coding_objective(inst.dict, m_x, a + kFdStep * dir, lambda_1) -
                       coding_objective(inst.dict, m_x, a - kFdStep * dir, lambda_1)) /
                      (2 * kFdStep);
    const double got = coding_gradient(inst.dict, m_x, a, lambda_1).dot(dir) + perturb;
    report.worst = std::max(report.worst, rel_err(got, fd));
  }
  return report;
}

int cmd_gradcheck(std::uint64_t seed, double perturb) {
  const GradcheckInstance inst = make_instance(seed);
  Rng rng(seed + 2);
  const std::vector<CheckReport> reports{
      check_distance(rng, perturb),
      check_dl_gradient(inst, rng, perturb),
      check_sc_gradient(inst, rng, perturb),
      check_encode_gradient(inst, rng, perturb),
  };
  bool all_pass = true;
  std::printf("%-32s  %-12s  %-8s  %s\n", "check", "worst_rel_err", "tol", "status");
  for (const CheckReport& r : reports) {
    const bool pass = r.worst < kFdTol;
    all_pass = all_pass && pass;
    std::printf("%-32s  %-12.3e  %-8.0e  %s\n", r.name.c_str(), r.worst, kFdTol,
                pass ? "PASS" : "FAIL");
  }
  std::printf("gradcheck: %s (seed %llu)\n", all_pass ? "PASS" : "FAIL",
              static_cast<unsigned long long>(seed));
  return all_pass ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian joint dimensionality reduction and dictionary learning on SPD data"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_path;
  std::string model_path;
  std::string method_list;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int repeats = 0;
  double perturb = 0.0;

  const auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file (key=value lines)");
    sub->add_option("--set", overrides, "override a config key, e.g. --set hyper.lambda_1=0.01");
  };

  CLI::App* extract = app.add_subcommand("extract", "extract descriptors into a cache file");
  add_config_flags(extract);
  extract->add_option("--out", out_path, "cache file to write")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on the configured dataset");
  add_config_flags(train_cmd);
  train_cmd->add_option("--seed", seed, "training seed (default: sampling.base_seed)")
      ->each([&seed_given](const std::string&) { seed_given = true; });
  train_cmd->add_option("--out", out_path, "model file to write")->required();

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "classify the configured dataset with a trained model");
  add_config_flags(predict_cmd);
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--out", out_path, "prediction CSV (default: stdout)");

  CLI::App* benchmark_cmd =
      app.add_subcommand("benchmark", "run the repeated split/train/evaluate protocol");
  add_config_flags(benchmark_cmd);
  benchmark_cmd->add_option("--seed", seed, "override sampling.base_seed")
      ->each([&seed_given](const std::string&) { seed_given = true; });
  benchmark_cmd->add_option("--repeats", repeats, "override sampling.repeats");
  benchmark_cmd->add_option("--method", method_list,
                            "override method list (comma separated: jdrdl, nn_airm, nn_stein, "
                            "src_airm, rdl)");
  benchmark_cmd->add_option("--out", out_path, "output directory (default: config out_dir)");

  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  gradcheck_cmd->add_option("--seed", seed, "instance seed");
  gradcheck_cmd->add_option("--perturb", perturb, "bias added to every analytic derivative")
      ->group("");  // negative-control hook, hidden from help

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  ExperimentConfig config;
  try {
    if (!app.got_subcommand(gradcheck_cmd)) {
      config = resolve_config(config_path, overrides);
      if (seed_given) config.sampling.base_seed = seed;
      if (repeats > 0) config.sampling.repeats = repeats;
      if (!method_list.empty()) {
        config.methods.clear();
        std::istringstream in(method_list);
        std::string token;
        while (std::getline(in, token, ',')) {
          const auto begin = token.find_first_not_of(" \t");
          const auto end = token.find_last_not_of(" \t");
          if (begin == std::string::npos) continue;
          config.methods.push_back(parse_method(token.substr(begin, end - begin + 1)));
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(extract)) return cmd_extract(config, out_path);
    if (app.got_subcommand(train_cmd)) {
      return cmd_train(config, seed_given ? seed : config.sampling.base_seed, out_path);
    }
    if (app.got_subcommand(predict_cmd)) return cmd_predict(config, model_path, out_path);
    if (app.got_subcommand(benchmark_cmd)) {
      return cmd_benchmark(config, out_path.empty() ? config.out_dir : out_path);
    }
    if (app.got_subcommand(gradcheck_cmd)) return cmd_gradcheck(seed, perturb);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
