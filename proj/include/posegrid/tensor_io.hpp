#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace posegrid {

/// Flat binary tensor container used to exchange feature maps, confidence
/// planes and scorer parameters with external pipelines.
///
/// Layout, little-endian throughout:
///   bytes 0..5   magic "MFI2P\0"
///   u32          number of dimensions
///   u32 * ndims  dimension sizes
///   f32 * prod   payload, row-major
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::string& path, const Tensor& tensor);
Tensor load_tensor(const std::string& path);

}  // namespace posegrid
