#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "monomm/tensor.hpp"

namespace monomm {

// Raw little-endian tensor container ("MMTR"): magic, version, dtype code
// (1 = f32, 2 = f64), rank, int64 extents, then the flat payload. This is
// the only image/tensor interchange format the tools understand.
namespace raw_io_detail {

constexpr char kMagic[4] = {'M', 'M', 'T', 'R'};
constexpr uint32_t kVersion = 1;

template <typename T>
constexpr uint32_t dtype_code() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "raw tensors hold f32 or f64");
  return std::is_same_v<T, float> ? 1u : 2u;
}

}  // namespace raw_io_detail

template <typename T>
void save_raw_tensor(const std::string& path, const Shape& shape,
                     const std::vector<T>& data) {
  if (data.size() != size_t(shape_numel(shape)))
    throw std::runtime_error("save_raw_tensor: payload does not match shape");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(raw_io_detail::kMagic, 4);
  uint32_t ver = raw_io_detail::kVersion;
  uint32_t dt = raw_io_detail::dtype_code<T>();
  uint32_t rank = uint32_t(shape.size());
  f.write(reinterpret_cast<const char*>(&ver), 4);
  f.write(reinterpret_cast<const char*>(&dt), 4);
  f.write(reinterpret_cast<const char*>(&rank), 4);
  for (int d : shape) {
    int64_t e = d;
    f.write(reinterpret_cast<const char*>(&e), 8);
  }
  f.write(reinterpret_cast<const char*>(data.data()),
          std::streamsize(data.size() * sizeof(T)));
  if (!f) throw std::runtime_error("write failed: " + path);
}

template <typename T>
std::pair<Shape, std::vector<T>> load_raw_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, raw_io_detail::kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a raw tensor file");
  uint32_t ver = 0, dt = 0, rank = 0;
  f.read(reinterpret_cast<char*>(&ver), 4);
  f.read(reinterpret_cast<char*>(&dt), 4);
  f.read(reinterpret_cast<char*>(&rank), 4);
  if (!f || ver != raw_io_detail::kVersion)
    throw std::runtime_error(path + ": unsupported raw tensor version");
  if (dt != raw_io_detail::dtype_code<T>())
    throw std::runtime_error(path + ": dtype mismatch");
  if (rank > 8) throw std::runtime_error(path + ": implausible rank");
  Shape shape(rank);
  long numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    int64_t e = 0;
    f.read(reinterpret_cast<char*>(&e), 8);
    if (!f || e <= 0 || e > (1 << 30))
      throw std::runtime_error(path + ": bad extent");
    shape[i] = int(e);
    numel *= e;
  }
  std::vector<T> data(static_cast<size_t>(numel));
  f.read(reinterpret_cast<char*>(data.data()),
         std::streamsize(data.size() * sizeof(T)));
  if (!f) throw std::runtime_error(path + ": truncated payload");
  return {std::move(shape), std::move(data)};
}

}  // namespace monomm
