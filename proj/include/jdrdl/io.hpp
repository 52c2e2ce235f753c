#pragma once

#include <string>
#include <vector>

#include "jdrdl/model.hpp"

namespace jdrdl {

/// Binary container formats. Both carry a magic number and a format version;
/// numeric payloads are little-endian IEEE-754 doubles and 32-bit integers,
/// so round-trips are bit-exact and re-writes byte-identical. Files are
/// written to a temporary sibling and renamed into place.

constexpr std::uint32_t kModelFormatVersion = 1;
constexpr std::uint32_t kCacheFormatVersion = 1;

/// Serializes projection, dictionary, training codes, class means, and
/// hyperparameters. Throws on I/O failure.
void save_model(const JdrdlModel& model, const std::string& path);

/// Loads a model container. Throws std::runtime_error on a foreign magic
/// number, an unsupported version, truncation, or trailing bytes.
JdrdlModel load_model(const std::string& path);

struct DescriptorCache {
  std::vector<SpdMatrix> descriptors;  // uniform dimension
  std::vector<int> labels;             // same length as descriptors
};

/// Writes extracted descriptors plus labels. An empty cache is valid.
void save_descriptors(const DescriptorCache& cache, const std::string& path);

DescriptorCache load_descriptors(const std::string& path);

}  // namespace jdrdl
