#pragma once

// GRV volume files: "GRV1", little-endian header {u32 dtype, u32 nx, u32 ny, u32 nz, f64 spacing},
// then the payload in x-fastest order. No compression.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "gliorank/core_fields.hpp"

namespace gliorank {

enum class GrvDtype : std::uint32_t { u8 = 1, f32 = 2, f64 = 3, tensor6_f32 = 4 };

template <class T>
struct grv_dtype;
template <>
struct grv_dtype<std::uint8_t> {
  static constexpr GrvDtype value = GrvDtype::u8;
};
template <>
struct grv_dtype<float> {
  static constexpr GrvDtype value = GrvDtype::f32;
};
template <>
struct grv_dtype<double> {
  static constexpr GrvDtype value = GrvDtype::f64;
};
template <>
struct grv_dtype<Tensor6f> {
  static constexpr GrvDtype value = GrvDtype::tensor6_f32;
};

struct GrvHeader {
  GrvDtype dtype{};
  Geometry geometry;
};

inline constexpr std::size_t grv_header_bytes = 4 + 4 * 4 + 8;

namespace detail {

template <class U>
void put_le(std::ostream& os, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <class U>
U get_le(const unsigned char* bytes) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void put_value(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
inline void put_value(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_value(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline void put_value(std::ostream& os, const Tensor6f& t) {
  for (float c : {t.xx, t.xy, t.xz, t.yy, t.yz, t.zz}) put_value(os, c);
}

template <class T>
constexpr std::size_t payload_bytes() {
  if constexpr (std::is_same_v<T, Tensor6f>)
    return 6 * sizeof(float);
  else
    return sizeof(T);
}

template <class T>
T get_value(const unsigned char* p) {
  if constexpr (std::is_same_v<T, std::uint8_t>) {
    return *p;
  } else if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<float>(get_le<std::uint32_t>(p));
  } else if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(get_le<std::uint64_t>(p));
  } else {
    Tensor6f t;
    float* parts[6] = {&t.xx, &t.xy, &t.xz, &t.yy, &t.yz, &t.zz};
    for (int k = 0; k < 6; ++k) *parts[k] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * k));
    return t;
  }
}

template <class T>
bool has_nan(const T& v) {
  if constexpr (std::is_same_v<T, std::uint8_t>)
    return false;
  else if constexpr (std::is_same_v<T, Tensor6f>)
    return std::isnan(v.xx) || std::isnan(v.xy) || std::isnan(v.xz) || std::isnan(v.yy) ||
           std::isnan(v.yz) || std::isnan(v.zz);
  else
    return std::isnan(v);
}

inline std::vector<unsigned char> read_exact_or_less(std::istream& is, std::size_t n) {
  std::vector<unsigned char> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  buf.resize(static_cast<std::size_t>(is.gcount()));
  return buf;
}

}  // namespace detail

inline GrvHeader read_grv_header(std::istream& is) {
  const auto buf = detail::read_exact_or_less(is, grv_header_bytes);
  require(buf.size() >= 4 && std::memcmp(buf.data(), "GRV1", 4) == 0, errc::bad_magic,
          "bad magic bytes");
  require(buf.size() == grv_header_bytes, errc::malformed_header, "truncated header");
  const auto tag = detail::get_le<std::uint32_t>(buf.data() + 4);
  require(tag >= 1 && tag <= 4, errc::malformed_header, "unknown dtype tag " + std::to_string(tag));
  GrvHeader h;
  h.dtype = static_cast<GrvDtype>(tag);
  h.geometry.dims = {detail::get_le<std::uint32_t>(buf.data() + 8), detail::get_le<std::uint32_t>(buf.data() + 12),
                     detail::get_le<std::uint32_t>(buf.data() + 16)};
  h.geometry.spacing_mm = std::bit_cast<double>(detail::get_le<std::uint64_t>(buf.data() + 20));
  require(h.geometry.dims.count() > 0, errc::invalid_dims, "invalid dims");
  require(std::isfinite(h.geometry.spacing_mm) && h.geometry.spacing_mm > 0.0, errc::malformed_header,
          "invalid spacing");
  return h;
}

template <class T>
Volume<T> read_grv_payload(std::istream& is, const GrvHeader& h) {
  require(h.dtype == grv_dtype<T>::value, errc::dtype_mismatch, "dtype mismatch");
  const std::size_t n = h.geometry.size();
  constexpr std::size_t bytes = detail::payload_bytes<T>();
  const auto buf = detail::read_exact_or_less(is, n * bytes);
  require(buf.size() == n * bytes, errc::truncated_payload, "truncated payload");
  require(is.peek() == std::char_traits<char>::eof(), errc::malformed_header, "trailing bytes after payload");
  std::vector<T> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = detail::get_value<T>(buf.data() + i * bytes);
    require(!detail::has_nan(values[i]), errc::nan_in_payload, "NaN in payload");
  }
  return Volume<T>(h.geometry, std::move(values));
}

template <class T>
Volume<T> read_volume(std::istream& is) {
  return read_grv_payload<T>(is, read_grv_header(is));
}

template <class T>
void write_volume(const Volume<T>& v, std::ostream& os) {
  os.write("GRV1", 4);
  detail::put_le(os, static_cast<std::uint32_t>(grv_dtype<T>::value));
  detail::put_le(os, v.dims().nx);
  detail::put_le(os, v.dims().ny);
  detail::put_le(os, v.dims().nz);
  detail::put_le(os, std::bit_cast<std::uint64_t>(v.spacing()));
  for (const auto& x : v) detail::put_value(os, x);
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), errc::input_not_found, "input not found: " + path.string());
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), errc::io_failure, "cannot open " + path.string());
  return is;
}

template <class T>
Volume<T> read_volume(const std::filesystem::path& path) {
  auto is = open_for_read(path);
  return read_volume<T>(is);
}

template <class T>
void write_volume(const Volume<T>& v, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), errc::io_failure, "cannot open for writing: " + path.string());
  write_volume(v, os);
  os.flush();
  require(static_cast<bool>(os), errc::io_failure, "write failed: " + path.string());
}

using AnyVolume = std::variant<Volume<std::uint8_t>, Volume<float>, Volume<double>, TensorField>;

inline AnyVolume read_any_volume(const std::filesystem::path& path) {
  auto is = open_for_read(path);
  const auto h = read_grv_header(is);
  switch (h.dtype) {
    case GrvDtype::u8: return read_grv_payload<std::uint8_t>(is, h);
    case GrvDtype::f32: return read_grv_payload<float>(is, h);
    case GrvDtype::f64: return read_grv_payload<double>(is, h);
    case GrvDtype::tensor6_f32: return read_grv_payload<Tensor6f>(is, h);
  }
  fail(errc::malformed_header, "unknown dtype");
}

/// uint8 volume whose values must be 0 or 1.
inline Segmentation read_segmentation(const std::filesystem::path& path) {
  auto m = read_volume<std::uint8_t>(path);
  for (auto v : m) require(v <= 1, errc::invalid_argument, "segmentation values must be 0 or 1");
  return m;
}

inline ScalarField read_scalar_field(const std::filesystem::path& path) { return read_volume<double>(path); }

inline InvasionMap read_invasion_map(const std::filesystem::path& path) {
  auto v = read_volume<double>(path);
  for (double t : v)
    require(t >= 0.0, errc::invalid_argument, "invasion times must be non-negative");
  return InvasionMap(std::move(v));
}

inline void write_invasion_map(const InvasionMap& t, const std::filesystem::path& path) {
  write_volume(static_cast<const Volume<double>&>(t), path);
}

/// Tissue directory layout: labels.grv (u8), fa.grv (f64), tensor.grv (tensor6).
inline TissueModel read_tissue(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), errc::input_not_found, "input not found: " + dir.string());
  return TissueModel(read_volume<std::uint8_t>(dir / "labels.grv"), read_volume<double>(dir / "fa.grv"),
                     read_volume<Tensor6f>(dir / "tensor.grv"));
}

inline void write_tissue(const TissueModel& tissue, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_volume(tissue.labels(), dir / "labels.grv");
  write_volume(tissue.fa(), dir / "fa.grv");
  write_volume(tissue.tensor(), dir / "tensor.grv");
}

}  // namespace gliorank
