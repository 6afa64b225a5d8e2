#pragma once

// Binary checkpoint: named float64 tensors with shape headers plus a JSON
// metadata string.
//
//   "CDSGNCKP" | u32 version | u32 meta length | meta bytes | u32 tensor count |
//   per tensor: u32 name length | name | u32 rank | i64 dims[rank] | f64 data[prod(dims)]
//
// Integers and doubles are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "codesign/error.hpp"

namespace codesign {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline constexpr char kCheckpointMagic[8] = {'C', 'D', 'S', 'G', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  static Tensor from(std::string name, const Eigen::MatrixXd& m) {
    Tensor t;
    t.name = std::move(name);
    t.shape = {m.rows(), m.cols()};
    t.data.assign(m.data(), m.data() + m.size());
    return t;
  }
  static Tensor from(std::string name, const Eigen::VectorXd& v) {
    Tensor t;
    t.name = std::move(name);
    t.shape = {v.size()};
    t.data.assign(v.data(), v.data() + v.size());
    return t;
  }
  Eigen::VectorXd vector() const {
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
  }
  bool operator==(const Tensor&) const = default;
};

struct Checkpoint {
  std::string meta;  // JSON text
  std::vector<Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw Error(ErrorCode::CheckpointFormat, "checkpoint has no tensor '" + name + "'");
  }
  bool operator==(const Checkpoint&) const = default;
};

namespace ckpt_detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::CheckpointFormat, "truncated checkpoint");
  return v;
}

inline std::string get_string(std::istream& in, std::uint32_t n) {
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(ErrorCode::CheckpointFormat, "truncated checkpoint");
  return s;
}

}  // namespace ckpt_detail

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  using namespace ckpt_detail;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.meta.size()));
    out.write(ck.meta.data(), static_cast<std::streamsize>(ck.meta.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& t : ck.tensors) {
      std::int64_t count = 1;
      for (auto d : t.shape) count *= d;
      if (count != static_cast<std::int64_t>(t.data.size())) {
        throw Error(ErrorCode::ShapeMismatch, "tensor '" + t.name + "' shape does not match its data");
      }
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) put<std::int64_t>(out, d);
      out.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  using namespace ckpt_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::CheckpointFormat, path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::CheckpointFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.meta = get_string(in, get<std::uint32_t>(in));
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    Tensor t;
    t.name = get_string(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    std::int64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get<std::int64_t>(in));
      if (t.shape.back() < 0) throw Error(ErrorCode::CheckpointFormat, "negative dimension");
      n *= t.shape.back();
    }
    t.data.resize(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw Error(ErrorCode::CheckpointFormat, "truncated tensor '" + t.name + "'");
    ck.tensors.push_back(std::move(t));
  }
  in.peek();
  if (!in.eof()) throw Error(ErrorCode::CheckpointFormat, "trailing bytes in checkpoint");
  return ck;
}

}  // namespace codesign
