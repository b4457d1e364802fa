#include <cstdio>
#include <doctest.h>
#include <filesystem>
#include <sstream>

#include "posegrid/tensor_io.hpp"

using namespace posegrid;

namespace {

Tensor sample_tensor() {
  Tensor t;
  t.dims = {2, 3, 4};
  t.data.resize(24);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    t.data[i] = 0.25f * static_cast<float>(i) - 1.5f;
  }
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("tensor_io");

TEST_CASE("stream round trip preserves dims and payload") {
  const Tensor t = sample_tensor();
  std::stringstream buf;
  write_tensor(buf, t);
  const Tensor back = read_tensor(buf);
  CHECK(back.dims == t.dims);
  CHECK(back.data == t.data);
}

TEST_CASE("serialized layout matches the documented header") {
  Tensor t;
  t.dims = {1, 2};
  t.data = {1.0f, -2.0f};
  std::stringstream buf;
  write_tensor(buf, t);
  const std::string bytes = buf.str();
  // magic(6) + ndims(4) + 2 dims(8) + 2 floats(8)
  REQUIRE(bytes.size() == 26);
  CHECK(bytes.compare(0, 6, "MFI2P\0", 6) == 0);
  CHECK(static_cast<unsigned char>(bytes[6]) == 2);  // ndims, little-endian
  CHECK(static_cast<unsigned char>(bytes[10]) == 1);
  CHECK(static_cast<unsigned char>(bytes[14]) == 2);
  // 1.0f = 0x3f800000 little-endian.
  CHECK(static_cast<unsigned char>(bytes[18]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[21]) == 0x3f);
}

TEST_CASE("file round trip") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "posegrid_tensor_rt.bin";
  const Tensor t = sample_tensor();
  save_tensor(path.string(), t);
  const Tensor back = load_tensor(path.string());
  CHECK(back.dims == t.dims);
  CHECK(back.data == t.data);
  std::remove(path.string().c_str());
  CHECK_THROWS_AS(load_tensor(path.string()), std::runtime_error);
}

TEST_CASE("write rejects inconsistent tensors") {
  Tensor t;
  std::stringstream buf;
  CHECK_THROWS_AS(write_tensor(buf, t), std::invalid_argument);
  t.dims = {3};
  t.data = {1.0f, 2.0f};
  CHECK_THROWS_AS(write_tensor(buf, t), std::invalid_argument);
}

TEST_CASE("read rejects corrupted streams") {
  const Tensor t = sample_tensor();
  std::stringstream good;
  write_tensor(good, t);
  const std::string bytes = good.str();

  {
    std::stringstream bad(std::string("XYZ") + bytes.substr(3));
    CHECK_THROWS_WITH_AS(read_tensor(bad), "tensor: bad magic",
                         std::runtime_error);
  }
  {
    std::stringstream truncated(bytes.substr(0, 8));
    CHECK_THROWS_AS(read_tensor(truncated), std::runtime_error);
  }
  {
    std::stringstream truncated(bytes.substr(0, bytes.size() - 2));
    CHECK_THROWS_AS(read_tensor(truncated), std::runtime_error);
  }
  {
    // Zero-dimensional tensors cannot be represented.
    std::string zero = bytes;
    zero[6] = '\0';
    std::stringstream bad(zero);
    CHECK_THROWS_WITH_AS(read_tensor(bad), "tensor: implausible dimension count",
                         std::runtime_error);
  }
}

TEST_SUITE_END();
