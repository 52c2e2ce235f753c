#include "jdrdl/rcm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "jdrdl/rng.hpp"

namespace jdrdl {

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width_ <= 0 || height_ <= 0) {
    throw std::invalid_argument("GrayImage: dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width_) * height_) {
    throw std::invalid_argument("GrayImage: pixel count does not match dimensions");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("GrayImage: intensity outside [0,1]");
    }
  }
}

FeatureField::FeatureField(int width, int height, Matrix features)
    : width_(width), height_(height), features_(std::move(features)) {
  if (width_ <= 0 || height_ <= 0) {
    throw std::invalid_argument("FeatureField: dimensions must be positive");
  }
  if (features_.rows() != 8 ||
      features_.cols() != static_cast<Eigen::Index>(width_) * height_) {
    throw std::invalid_argument("FeatureField: expected 8 x (width*height) features");
  }
  if (!features_.allFinite()) {
    throw std::invalid_argument("FeatureField: non-finite feature entry");
  }
  static constexpr double kHalfPi = 1.5707963267948966;
  for (Eigen::Index i = 0; i < features_.cols(); ++i) {
    const double theta = features_(7, i);
    if (theta < 0.0 || theta > kHalfPi) {
      throw std::invalid_argument("FeatureField: gradient angle outside [0, pi/2]");
    }
  }
}

FeatureField feature_field(const GrayImage& img, CoordMode mode) {
  const int w = img.width(), h = img.height();
  if (w < 3 || h < 3) {
    throw std::invalid_argument("feature_field: image too small for derivative stencils");
  }
  const auto clamped = [&](int x, int y) {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  Matrix f(8, static_cast<Eigen::Index>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ix = 0.5 * (clamped(x + 1, y) - clamped(x - 1, y));
      const double iy = 0.5 * (clamped(x, y + 1) - clamped(x, y - 1));
      const double ixx = clamped(x + 1, y) - 2.0 * img.at(x, y) + clamped(x - 1, y);
      const double iyy = clamped(x, y + 1) - 2.0 * img.at(x, y) + clamped(x, y - 1);
      const double ax = std::abs(ix), ay = std::abs(iy);
      double theta = 0.0;
      if (ax > 0.0) {
        theta = std::atan(ay / ax);
      } else if (ay > 0.0) {
        theta = 1.5707963267948966;
      }
      const Eigen::Index i = static_cast<Eigen::Index>(y) * w + x;
      f(0, i) = mode == CoordMode::Normalized ? static_cast<double>(x) / (w - 1) : x;
      f(1, i) = mode == CoordMode::Normalized ? static_cast<double>(y) / (h - 1) : y;
      f(2, i) = img.at(x, y);
      f(3, i) = ax;
      f(4, i) = ay;
      f(5, i) = std::abs(ixx);
      f(6, i) = std::abs(iyy);
      f(7, i) = theta;
    }
  }
  return FeatureField(w, h, std::move(f));
}

RegionCov region_covariance(const FeatureField& ff, const Rect& region) {
  if (region.x0 < 0 || region.y0 < 0 || region.w <= 0 || region.h <= 0 ||
      region.x0 + region.w > ff.width() || region.y0 + region.h > ff.height()) {
    throw std::invalid_argument("region_covariance: rectangle outside the field");
  }
  const int n = region.w * region.h;
  if (n < 9) {
    throw std::invalid_argument("region_covariance: region smaller than 9 pixels");
  }

  Vector mean = Vector::Zero(8);
  for (int y = region.y0; y < region.y0 + region.h; ++y) {
    for (int x = region.x0; x < region.x0 + region.w; ++x) {
      mean += ff.at(x, y);
    }
  }
  mean /= n;

  Matrix c = Matrix::Zero(8, 8);
  for (int y = region.y0; y < region.y0 + region.h; ++y) {
    for (int x = region.x0; x < region.x0 + region.w; ++x) {
      const Vector dev = ff.at(x, y) - mean;
      c.noalias() += dev * dev.transpose();
    }
  }
  c /= n - 1;

  // An effectively constant region leaves only accumulated rounding noise in
  // c (at most ~1e-30 for unit-scale features); the relative regularizer
  // cannot rescue that, so fall back to the bare regularizer matrix.
  const double tr = c.trace();
  if (tr <= 1e-18) {
    return RegionCov{SpdMatrix(kCovReg * Matrix::Identity(8, 8)), true};
  }
  c += kCovReg * tr / 8.0 * Matrix::Identity(8, 8);
  return RegionCov{SpdMatrix(symmetrize(c)), false};
}

SpdMatrix mnist_rcm(const GrayImage& img, CoordMode mode) {
  if (img.width() != 28 || img.height() != 28) {
    throw std::invalid_argument("mnist_rcm: expected a 28x28 image");
  }
  const FeatureField ff = feature_field(img, mode);
  const SpdMatrix full = region_covariance(ff, Rect{0, 0, 28, 28}).cov;
  const SpdMatrix left = region_covariance(ff, Rect{0, 0, 14, 28}).cov;
  const SpdMatrix right = region_covariance(ff, Rect{14, 0, 14, 28}).cov;

  Matrix out = Matrix::Zero(24, 24);
  out.block(0, 0, 8, 8) = full.mat();
  out.block(8, 8, 8, 8) = left.mat();
  out.block(16, 16, 8, 8) = right.mat();
  return SpdMatrix(out);
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(path + ": truncated header");
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  return in;
}

}  // namespace

std::vector<GrayImage> read_idx_images(const std::string& path) {
  std::ifstream in = open_binary(path);
  const std::uint32_t magic = read_u32_be(in, path);
  if (magic != 0x00000803u) {
    throw std::runtime_error(path + ": bad image magic number");
  }
  const std::uint32_t count = read_u32_be(in, path);
  const std::uint32_t rows = read_u32_be(in, path);
  const std::uint32_t cols = read_u32_be(in, path);
  if (rows == 0 || cols == 0) throw std::runtime_error(path + ": zero image dimensions");

  std::vector<GrayImage> images;
  images.reserve(count);
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw std::runtime_error(path + ": truncated at image " + std::to_string(i));
    }
    std::vector<double> pixels(raw.size());
    for (std::size_t p = 0; p < raw.size(); ++p) pixels[p] = raw[p] / 255.0;
    images.emplace_back(static_cast<int>(cols), static_cast<int>(rows), std::move(pixels));
  }
  return images;
}

std::vector<int> read_idx_labels(const std::string& path) {
  std::ifstream in = open_binary(path);
  const std::uint32_t magic = read_u32_be(in, path);
  if (magic != 0x00000801u) {
    throw std::runtime_error(path + ": bad label magic number");
  }
  const std::uint32_t count = read_u32_be(in, path);
  std::vector<unsigned char> raw(count);
  if (count > 0 &&
      !in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count))) {
    throw std::runtime_error(path + ": truncated label data");
  }
  return std::vector<int>(raw.begin(), raw.end());
}

MnistData load_mnist(const std::string& images_path, const std::string& labels_path) {
  MnistData data{read_idx_images(images_path), read_idx_labels(labels_path)};
  if (data.images.size() != data.labels.size()) {
    throw std::runtime_error("load_mnist: image and label counts differ");
  }
  return data;
}

namespace {

Matrix random_sym(Rng& rng, int m) {
  Matrix g(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) g(r, c) = rng.normal();
  }
  return symmetrize(g);
}

// Random symmetric direction of unit Frobenius norm.
Matrix random_sym_unit(Rng& rng, int m) {
  Matrix s = random_sym(rng, m);
  const double norm = s.norm();
  if (norm < 1e-300) return Matrix::Identity(m, m) / std::sqrt(static_cast<double>(m));
  return s / norm;
}

// Random unit-norm symmetric direction supported on the leading r x r block.
Matrix random_sym_unit_block(Rng& rng, int m, int r) {
  Matrix s = Matrix::Zero(m, m);
  s.topLeftCorner(r, r) = random_sym_unit(rng, r);
  return s;
}

// Strength of the shared nuisance mode relative to the noise scale: samples
// slide along one fixed trailing-block direction with this amplification, so
// the dominant part of the within-class scatter is rejectable by a
// projection onto the signal block.
constexpr double kNuisanceScale = 3.0;

// Random unit-norm symmetric direction supported on the trailing block.
Matrix random_sym_unit_trailing(Rng& rng, int m, int r) {
  if (m - r <= 0) return Matrix::Zero(m, m);
  Matrix s = Matrix::Zero(m, m);
  s.bottomRightCorner(m - r, m - r) = random_sym_unit(rng, m - r);
  return s;
}

}  // namespace

LabeledDataset synthetic_spd_dataset(int num_classes, int per_class, int m, double separation,
                                     double noise, std::uint64_t seed) {
  if (num_classes <= 0 || per_class <= 0 || m <= 0) {
    throw std::invalid_argument("synthetic_spd_dataset: counts must be positive");
  }
  if (!(separation > 0.0)) {
    throw std::invalid_argument("synthetic_spd_dataset: separation must be positive");
  }
  if (noise < 0.0) {
    throw std::invalid_argument("synthetic_spd_dataset: noise must be nonnegative");
  }

  Rng rng(seed);
  std::vector<SpdMatrix> samples;
  std::vector<int> labels;
  samples.reserve(static_cast<std::size_t>(num_classes) * per_class);
  const int signal_dims = (m + 1) / 2;
  const Matrix nuisance_dir = random_sym_unit_trailing(rng, m, signal_dims);
  for (int k = 0; k < num_classes; ++k) {
    const SpdMatrix center{
        spd_fn(separation * random_sym_unit_block(rng, m, signal_dims), SpdFn::ExpOfSym)};
    const Matrix c_sqrt = spd_fn(center.mat(), SpdFn::Sqrt);
    for (int i = 0; i < per_class; ++i) {
      if (noise == 0.0) {
        samples.push_back(center);
      } else {
        // Isotropic jitter of half-normal length (scale = noise) plus a slide
        // along the shared nuisance mode.
        const double jitter_len = noise * std::abs(rng.normal());
        const double slide = kNuisanceScale * noise * rng.normal();
        const Matrix w = jitter_len * random_sym_unit(rng, m) + slide * nuisance_dir;
        samples.emplace_back(symmetrize(c_sqrt * spd_fn(w, SpdFn::ExpOfSym) * c_sqrt));
      }
      labels.push_back(k);
    }
  }
  return LabeledDataset(std::move(samples), std::move(labels), num_classes);
}

}  // namespace jdrdl
