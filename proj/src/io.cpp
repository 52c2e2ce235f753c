#include "jdrdl/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace jdrdl {
namespace {

constexpr std::uint32_t kModelMagic = 0x4a44524dU;  // "JDRM"
constexpr std::uint32_t kCacheMagic = 0x4a445243U;  // "JDRC"

class Writer {
 public:
  explicit Writer(const std::string& path)
      : final_path_(path), tmp_path_(path + ".tmp"), out_(tmp_path_, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error(tmp_path_ + ": cannot open for writing");
  }

  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void matrix(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error(tmp_path_ + ": write failed");
    out_.close();
    std::filesystem::rename(tmp_path_, final_path_);
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

  std::string final_path_;
  std::string tmp_path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error(path + ": cannot open");
  }

  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
  }

  void expect_eof() {
    char c;
    if (in_.read(&c, 1)) throw std::runtime_error(path_ + ": trailing bytes after payload");
  }

 private:
  void raw(void* p, std::size_t n) {
    if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
      throw std::runtime_error(path_ + ": truncated file");
    }
  }

  std::string path_;
  std::ifstream in_;
};

std::int32_t checked_count(std::int32_t v, const char* what, const std::string& path) {
  if (v < 0 || v > (1 << 24)) {
    throw std::runtime_error(path + ": implausible " + what + " count");
  }
  return v;
}

}  // namespace

void save_model(const JdrdlModel& model, const std::string& path) {
  Writer w(path);
  w.u32(kModelMagic);
  w.u32(kModelFormatVersion);

  const int m = model.u.ambient_dim(), d = model.u.reduced_dim();
  const int k = model.dict.num_classes();
  w.i32(m);
  w.i32(d);
  w.i32(k);
  for (int c = 0; c < k; ++c) w.i32(model.dict.atoms_in_class(c));

  w.matrix(model.u.mat());
  for (int h = 0; h < model.dict.total_atoms(); ++h) w.matrix(model.dict.atom(h).mat());

  w.i32(model.a_train.atoms());
  w.i32(model.a_train.samples());
  w.matrix(model.a_train.mat());

  for (int c = 0; c < k; ++c) {
    const Vector& mean = model.class_means.at(c);
    w.i32(static_cast<std::int32_t>(mean.size()));
    for (Eigen::Index i = 0; i < mean.size(); ++i) w.f64(mean[i]);
  }

  const HyperParams& hp = model.hyper;
  w.f64(hp.lambda_1);
  w.f64(hp.lambda_2);
  w.f64(hp.lambda_a);
  w.f64(hp.lambda_u);
  w.f64(hp.lambda_d_cross);
  w.f64(hp.lambda_d_reg);
  w.f64(hp.sigma);
  w.i32(hp.v_w);
  w.i32(hp.v_b);
  w.i32(hp.d);
  w.i32(hp.outer_rounds);
  w.f64(hp.rel_change_tol);
  w.i32(hp.u_init == HyperParams::UInit::MeanEigvecs ? 0 : 1);
  w.i32(hp.atoms_per_class);
  w.i32(hp.freeze_u ? 1 : 0);

  w.commit();
}

JdrdlModel load_model(const std::string& path) {
  Reader r(path);
  if (r.u32() != kModelMagic) throw std::runtime_error(path + ": not a model file");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw std::runtime_error(path + ": unsupported model format version " +
                             std::to_string(version));
  }

  const std::int32_t m = checked_count(r.i32(), "ambient dimension", path);
  const std::int32_t d = checked_count(r.i32(), "reduced dimension", path);
  const std::int32_t k = checked_count(r.i32(), "class", path);
  std::vector<std::int32_t> counts(k);
  for (auto& c : counts) c = checked_count(r.i32(), "atom", path);

  StiefelPoint u{r.matrix(m, d)};
  std::vector<std::vector<SpdMatrix>> blocks(k);
  for (std::int32_t c = 0; c < k; ++c) {
    for (std::int32_t i = 0; i < counts[c]; ++i) blocks[c].emplace_back(r.matrix(d, d));
  }
  Dictionary dict(std::move(blocks));

  const std::int32_t rows = checked_count(r.i32(), "code row", path);
  const std::int32_t cols = checked_count(r.i32(), "code column", path);
  CoefficientMatrix a{r.matrix(rows, cols)};

  std::vector<Vector> means;
  for (std::int32_t c = 0; c < k; ++c) {
    const std::int32_t len = checked_count(r.i32(), "mean length", path);
    Vector mean(len);
    for (std::int32_t i = 0; i < len; ++i) mean[i] = r.f64();
    means.push_back(std::move(mean));
  }

  HyperParams hp;
  hp.lambda_1 = r.f64();
  hp.lambda_2 = r.f64();
  hp.lambda_a = r.f64();
  hp.lambda_u = r.f64();
  hp.lambda_d_cross = r.f64();
  hp.lambda_d_reg = r.f64();
  hp.sigma = r.f64();
  hp.v_w = r.i32();
  hp.v_b = r.i32();
  hp.d = r.i32();
  hp.outer_rounds = r.i32();
  hp.rel_change_tol = r.f64();
  hp.u_init = r.i32() == 0 ? HyperParams::UInit::MeanEigvecs : HyperParams::UInit::Random;
  hp.atoms_per_class = r.i32();
  hp.freeze_u = r.i32() != 0;

  r.expect_eof();
  return JdrdlModel{std::move(u), std::move(dict), std::move(a), std::move(means), hp};
}

void save_descriptors(const DescriptorCache& cache, const std::string& path) {
  if (cache.descriptors.size() != cache.labels.size()) {
    throw std::invalid_argument("save_descriptors: descriptor and label counts differ");
  }
  Writer w(path);
  w.u32(kCacheMagic);
  w.u32(kCacheFormatVersion);
  w.i32(static_cast<std::int32_t>(cache.descriptors.size()));
  w.i32(cache.descriptors.empty() ? 0 : cache.descriptors.front().dim());
  for (const SpdMatrix& s : cache.descriptors) w.matrix(s.mat());
  for (int label : cache.labels) w.i32(label);
  w.commit();
}

DescriptorCache load_descriptors(const std::string& path) {
  Reader r(path);
  if (r.u32() != kCacheMagic) throw std::runtime_error(path + ": not a descriptor cache");
  const std::uint32_t version = r.u32();
  if (version != kCacheFormatVersion) {
    throw std::runtime_error(path + ": unsupported cache format version " +
                             std::to_string(version));
  }
  const std::int32_t count = checked_count(r.i32(), "descriptor", path);
  const std::int32_t dim = checked_count(r.i32(), "descriptor dimension", path);

  DescriptorCache cache;
  for (std::int32_t i = 0; i < count; ++i) cache.descriptors.emplace_back(r.matrix(dim, dim));
  for (std::int32_t i = 0; i < count; ++i) cache.labels.push_back(r.i32());
  r.expect_eof();
  return cache;
}

}  // namespace jdrdl
