#pragma once

// Binary tensor container.
//
//   offset  size      field
//   0       4         magic "ULTD"
//   4       4         version, u32 little-endian, = 1
//   8       1         dtype, u8 (0 = f32)
//   9       1         ndim, u8
//   10      8*ndim    dims, u64 little-endian each
//   ...     4*prod    payload, row-major f32 little-endian
//
// Nothing may follow the payload.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ulsd/error.hpp"
#include "ulsd/planes.hpp"

namespace ulsd {

inline constexpr char kTensorMagic[4] = {'U', 'L', 'T', 'D'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::size_t tensor_header_size(std::size_t ndim) { return 10 + 8 * ndim; }

namespace detail {

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(value >> (8 * i)));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_tensor(const Tensor& t) {
  detail::require(!t.dims.empty() && t.dims.size() <= 255, "tensor must have between 1 and 255 dims");
  detail::require(t.element_count() == t.data.size(), "tensor payload does not match its dims");
  std::vector<unsigned char> out;
  out.reserve(tensor_header_size(t.dims.size()) + 4 * t.data.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  detail::put_le(out, kTensorVersion);
  out.push_back(kDtypeF32);
  out.push_back(static_cast<unsigned char>(t.dims.size()));
  for (auto d : t.dims) detail::put_le(out, d);
  for (float f : t.data) detail::put_le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Tensor decode_tensor(const std::vector<unsigned char>& bytes) {
  detail::require(bytes.size() >= 10, "tensor file truncated before header end");
  detail::require(std::equal(std::begin(kTensorMagic), std::end(kTensorMagic), bytes.begin(),
                             [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; }),
                  "bad tensor magic");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  detail::require(version == kTensorVersion, "unsupported tensor version " + std::to_string(version));
  detail::require(bytes[8] == kDtypeF32, "unsupported tensor dtype " + std::to_string(bytes[8]));
  const std::size_t ndim = bytes[9];
  detail::require(ndim >= 1, "tensor has no dimensions");
  detail::require(bytes.size() >= tensor_header_size(ndim), "tensor file truncated in dims");
  Tensor t;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const auto d = detail::get_le<std::uint64_t>(bytes.data() + 10 + 8 * i);
    detail::require(d == 0 || count <= UINT64_MAX / 4 / d, "tensor dims overflow");
    count *= d;
    t.dims.push_back(d);
  }
  const std::size_t header = tensor_header_size(ndim);
  detail::require(bytes.size() - header == 4 * count, "tensor payload length does not match dims");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes.data() + header + 4 * i));
  }
  return t;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_bytes_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw ValidationError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_bytes(path)); }

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  write_bytes_atomic(path, bytes.data(), bytes.size());
}

template <typename T>
Tensor to_tensor(const Planes<T>& p) {
  Tensor t{{p.channels(), p.height(), p.width()}, {}};
  t.data.reserve(p.size());
  for (const auto& v : p.data()) t.data.push_back(static_cast<float>(v));
  return t;
}

template <typename T>
Planes<T> to_planes(const Tensor& t) {
  detail::require(t.dims.size() == 3 || t.dims.size() == 2, "expected a 2-D or 3-D tensor");
  const std::size_t c = t.dims.size() == 3 ? t.dims[0] : 1;
  const std::size_t h = t.dims[t.dims.size() - 2];
  const std::size_t w = t.dims.back();
  return Planes<T>(c, h, w, std::vector<T>(t.data.begin(), t.data.end()));
}

}  // namespace ulsd
