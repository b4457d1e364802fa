#include "posegrid/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace posegrid {

namespace {

constexpr char kMagic[6] = {'M', 'F', 'I', '2', 'P', '\0'};

void write_u32(std::ostream& out, std::uint32_t value) {
  unsigned char bytes[4];
  bytes[0] = static_cast<unsigned char>(value & 0xffu);
  bytes[1] = static_cast<unsigned char>((value >> 8) & 0xffu);
  bytes[2] = static_cast<unsigned char>((value >> 16) & 0xffu);
  bytes[3] = static_cast<unsigned char>((value >> 24) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) {
    throw std::runtime_error("tensor: truncated header");
  }
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f32(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in) {
  const std::uint32_t bits = read_u32(in);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) {
    n *= d;
  }
  return dims.empty() ? 0 : n;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.dims.empty()) {
    throw std::invalid_argument("tensor: at least one dimension required");
  }
  if (tensor.data.size() != tensor.element_count()) {
    throw std::invalid_argument("tensor: payload size does not match dims");
  }
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) {
    write_u32(out, d);
  }
  for (float value : tensor.data) {
    write_f32(out, value);
  }
  if (!out) {
    throw std::runtime_error("tensor: write failed");
  }
}

Tensor read_tensor(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("tensor: bad magic");
  }
  const std::uint32_t ndims = read_u32(in);
  if (ndims == 0 || ndims > 8) {
    throw std::runtime_error("tensor: implausible dimension count");
  }
  Tensor tensor;
  tensor.dims.resize(ndims);
  for (auto& d : tensor.dims) {
    d = read_u32(in);
  }
  const std::size_t count = tensor.element_count();
  tensor.data.resize(count);
  for (auto& value : tensor.data) {
    value = read_f32(in);
  }
  if (!in) {
    throw std::runtime_error("tensor: truncated payload");
  }
  return tensor;
}

void save_tensor(const std::string& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("tensor: cannot open " + path + " for writing");
  }
  write_tensor(out, tensor);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("tensor: cannot open " + path);
  }
  return read_tensor(in);
}

}  // namespace posegrid
