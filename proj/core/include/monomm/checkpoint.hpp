#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "monomm/anchors.hpp"
#include "monomm/nn.hpp"
#include "monomm/raw_io.hpp"

namespace monomm {

// Checkpoint layout (little-endian):
//   "MMCK" | u32 version | u8 dtype (1=f32, 2=f64) | u32 n_params
//   per param: u32 name_len | name | u32 rank | i64 extents[rank] | payload
//   u32 n_stats | per stat: 8 f64 moments | i64 count
// Loading validates dtype, then names and shapes against the live store,
// so a checkpoint written under a different architecture config fails with
// the first mismatching parameter named.

namespace ckdetail {

template <typename U>
void put(std::ostream& os, const U& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U take(std::istream& is, const std::string& what) {
  U v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  check(bool(is), "checkpoint truncated reading " + what);
  return v;
}

}  // namespace ckdetail

template <typename T>
struct Checkpoint {
  std::vector<std::pair<std::string, std::vector<T>>> params;
  std::vector<Shape> shapes;
  std::vector<TemplateStats> stats;
};

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& ps,
                     const std::vector<TemplateStats>& stats) {
  std::ofstream os(path, std::ios::binary);
  check(bool(os), "cannot open '" + path + "' for writing");
  os.write("MMCK", 4);
  ckdetail::put<uint32_t>(os, 1);
  ckdetail::put<uint8_t>(os, uint8_t(raw_io_detail::dtype_code<T>()));
  ckdetail::put<uint32_t>(os, uint32_t(ps.size()));
  for (size_t i = 0; i < ps.size(); ++i) {
    const std::string& name = ps.names()[i];
    const Tensor<T>& t = ps.tensor(i);
    ckdetail::put<uint32_t>(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    ckdetail::put<uint32_t>(os, uint32_t(t.ndim()));
    for (int d : t.shape()) ckdetail::put<int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             std::streamsize(size_t(t.numel()) * sizeof(T)));
  }
  ckdetail::put<uint32_t>(os, uint32_t(stats.size()));
  for (const auto& s : stats) {
    for (double v : {s.mean_z, s.var_z, s.mean_w, s.var_w, s.mean_h, s.var_h,
                     s.mean_l, s.var_l})
      ckdetail::put<double>(os, v);
    ckdetail::put<int64_t>(os, s.count);
  }
  os.flush();
  check(bool(os), "write to '" + path + "' failed");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(bool(is), "cannot open checkpoint '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  check(bool(is) && std::string(magic, 4) == "MMCK",
        "'" + path + "' is not a checkpoint");
  uint32_t version = ckdetail::take<uint32_t>(is, "version");
  check(version == 1, "unsupported checkpoint version " +
                          std::to_string(version));
  uint8_t dtype = ckdetail::take<uint8_t>(is, "dtype");
  check(dtype == uint8_t(raw_io_detail::dtype_code<T>()),
        "checkpoint precision does not match the configured precision");
  Checkpoint<T> ck;
  uint32_t n = ckdetail::take<uint32_t>(is, "parameter count");
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t len = ckdetail::take<uint32_t>(is, "name length");
    check(len > 0 && len < 4096, "corrupt parameter name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    check(bool(is), "checkpoint truncated reading a name");
    uint32_t rank = ckdetail::take<uint32_t>(is, "rank");
    check(rank <= 8, "corrupt parameter rank");
    Shape s;
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      int64_t e = ckdetail::take<int64_t>(is, "extent");
      check(e > 0 && e <= (int64_t(1) << 30), "corrupt parameter extent");
      s.push_back(int(e));
      numel *= e;
    }
    std::vector<T> data(size_t(numel), T(0));
    is.read(reinterpret_cast<char*>(data.data()),
            std::streamsize(size_t(numel) * sizeof(T)));
    check(bool(is), "checkpoint truncated reading '" + name + "'");
    ck.params.emplace_back(std::move(name), std::move(data));
    ck.shapes.push_back(std::move(s));
  }
  uint32_t ns = ckdetail::take<uint32_t>(is, "stats count");
  for (uint32_t i = 0; i < ns; ++i) {
    TemplateStats s;
    s.mean_z = ckdetail::take<double>(is, "stats");
    s.var_z = ckdetail::take<double>(is, "stats");
    s.mean_w = ckdetail::take<double>(is, "stats");
    s.var_w = ckdetail::take<double>(is, "stats");
    s.mean_h = ckdetail::take<double>(is, "stats");
    s.var_h = ckdetail::take<double>(is, "stats");
    s.mean_l = ckdetail::take<double>(is, "stats");
    s.var_l = ckdetail::take<double>(is, "stats");
    s.count = ckdetail::take<int64_t>(is, "stats");
    ck.stats.push_back(s);
  }
  return ck;
}

// strict name/shape restore in registration order
template <typename T>
void restore_params(ParamStore<T>& ps, const Checkpoint<T>& ck) {
  check(ck.params.size() == ps.size(),
        "checkpoint holds " + std::to_string(ck.params.size()) +
            " parameters, model has " + std::to_string(ps.size()));
  for (size_t i = 0; i < ps.size(); ++i) {
    const auto& [name, data] = ck.params[i];
    check(name == ps.names()[i],
          "checkpoint/config mismatch at parameter '" + name +
              "' (model expects '" + ps.names()[i] + "')");
    Tensor<T>& t = ps.tensor(i);
    check(ck.shapes[i] == t.shape(),
          "checkpoint/config mismatch: '" + name + "' has shape " +
              shape_str(ck.shapes[i]) + ", model expects " +
              shape_str(t.shape()));
    std::copy(data.begin(), data.end(), t.data());
  }
}

}  // namespace monomm
