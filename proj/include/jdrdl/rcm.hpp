#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jdrdl/model.hpp"

namespace jdrdl {

/// Grayscale image with intensities in [0,1], row-major storage.
class GrayImage {
 public:
  GrayImage(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& pixels() const noexcept { return pixels_; }

 private:
  int width_;
  int height_;
  std::vector<double> pixels_;
};

enum class CoordMode { Raw, Normalized };

/// Per-pixel 8-vectors [x, y, I, |I_x|, |I_y|, |I_xx|, |I_yy|, theta], one
/// column per pixel in row-major order.
class FeatureField {
 public:
  FeatureField(int width, int height, Matrix features);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Matrix& features() const noexcept { return features_; }
  Vector at(int x, int y) const {
    return features_.col(static_cast<Eigen::Index>(y) * width_ + x);
  }

 private:
  int width_;
  int height_;
  Matrix features_;  // 8 x (width*height)
};

/// Image feature channels: first derivatives by the central-difference
/// stencil [-1/2, 0, 1/2], second derivatives by [1, -2, 1], borders
/// replicated. theta = arctan(|I_y| / |I_x|), with pi/2 when only |I_y| is
/// nonzero and 0 when both derivatives vanish. Coordinates are divided by
/// (extent - 1) in Normalized mode. Requires width, height >= 3.
FeatureField feature_field(const GrayImage& img, CoordMode mode = CoordMode::Normalized);

struct Rect {
  int x0;
  int y0;
  int w;
  int h;
};

struct RegionCov {
  SpdMatrix cov;
  bool degenerate;  // covariance had zero trace; absolute regularizer used
};

constexpr double kCovReg = 1e-5;

/// Sample covariance (divisor n-1) of the feature vectors in the rectangle,
/// regularized by kCovReg * trace/8 * I so the output is strictly positive
/// definite. A zero-trace covariance (identical feature vectors) falls back
/// to kCovReg * I and is flagged. Requires at least 9 pixels.
RegionCov region_covariance(const FeatureField& ff, const Rect& region);

/// 24x24 descriptor of a 28x28 image: the 8x8 covariances of the full image,
/// the left half (columns 0..13), and the right half (columns 14..27) on the
/// diagonal, exact zeros elsewhere.
SpdMatrix mnist_rcm(const GrayImage& img, CoordMode mode = CoordMode::Normalized);

/// IDX image file (magic 0x00000803, big-endian dimensions, byte pixels
/// scaled to [0,1]). Throws on bad magic or truncation.
std::vector<GrayImage> read_idx_images(const std::string& path);

/// IDX label file (magic 0x00000801).
std::vector<int> read_idx_labels(const std::string& path);

struct MnistData {
  std::vector<GrayImage> images;
  std::vector<int> labels;
};

/// Reads a matching image/label pair and checks the counts agree.
MnistData load_mnist(const std::string& images_path, const std::string& labels_path);

/// Desk-scale ground truth with a planted reduced structure: class centers
/// exp(separation * S_k) for random unit-norm symmetric S_k supported on the
/// leading half of the dimensions (the signal block), so classes do not
/// differ elsewhere. Each sample takes a geodesic step made of isotropic
/// jitter of half-normal length (scale = noise) plus a Gaussian slide along
/// one shared trailing-block nuisance direction amplified threefold. The
/// separation / noise ratio controls class overlap, and a projection onto
/// the signal block rejects the dominant nuisance scatter. Deterministic in
/// the seed.
LabeledDataset synthetic_spd_dataset(int num_classes, int per_class, int m, double separation,
                                     double noise, std::uint64_t seed);

}  // namespace jdrdl
