#pragma once

// MAEC binary raster format:
//   "MAEC" | u32 version (=1) | u32 d | d x u32 extents | n x f64 values
// All integers and doubles little-endian, values row-major.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "maec/errors.hpp"
#include "maec/field.hpp"

namespace maec {

inline constexpr char kMaecMagic[4] = {'M', 'A', 'E', 'C'};
inline constexpr std::uint32_t kMaecVersion = 1;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

inline void put_f64(std::vector<unsigned char>& out, double x) {
  auto v = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& buf) : buf_(buf) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * b);
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * b);
    return std::bit_cast<double>(v);
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t k) const {
    if (buf_.size() - pos_ < k) throw FormatError("MAEC file truncated");
  }

  const std::vector<unsigned char>& buf_;
  std::size_t pos_ = 4;
};

}  // namespace detail

inline std::vector<unsigned char> encode_field(const ScalarField& field) {
  std::vector<unsigned char> out(std::begin(kMaecMagic), std::end(kMaecMagic));
  out.reserve(12 + 4 * field.ndim() + 8 * field.size());
  detail::put_u32(out, kMaecVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(field.ndim()));
  for (auto e : field.dims()) detail::put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : field.values()) detail::put_f64(out, v);
  return out;
}

inline ScalarField decode_field(const std::vector<unsigned char>& buf) {
  if (buf.size() < 4 || std::memcmp(buf.data(), kMaecMagic, 4) != 0)
    throw FormatError("not a MAEC file (bad magic)");
  detail::ByteReader in(buf);
  if (auto version = in.u32(); version != kMaecVersion)
    throw FormatError("unsupported MAEC version " + std::to_string(version));
  const auto d = in.u32();
  if (d < 1 || d > 3) throw FormatError("MAEC dimension must be 1..3, got " + std::to_string(d));
  Dims dims(d);
  std::size_t n = 1;
  for (auto& e : dims) {
    e = in.u32();
    if (e == 0) throw FormatError("MAEC extent is zero");
    n *= e;
  }
  if (in.remaining() != 8 * n)
    throw FormatError("MAEC payload holds " + std::to_string(in.remaining()) + " bytes, expected " +
                      std::to_string(8 * n));
  std::vector<double> data(n);
  for (auto& v : data) v = in.f64();
  return ScalarField(std::move(dims), std::move(data));
}

inline ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_field(buf);
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_field(const ScalarField& field, const std::filesystem::path& path) {
  write_bytes(path, encode_field(field));
}

/// 16-bit binary PGM; value v maps to round-half-up(clamp((v-lo)/(hi-lo)) * 65535).
inline std::vector<unsigned char> encode_pgm(const ScalarField& field, double lo, double hi) {
  if (field.ndim() != 2) throw ValidationError("PGM export needs a 2D field");
  if (!(lo < hi)) throw ValidationError("PGM export needs lo < hi");
  const auto height = field.dims()[0];
  const auto width = field.dims()[1];
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + 2 * field.size());
  for (double v : field.values()) {
    double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    if (std::isnan(t)) t = 0.0;
    const auto q = static_cast<std::uint16_t>(std::floor(t * 65535.0 + 0.5));
    out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xff));
  }
  return out;
}

inline void export_pgm(const ScalarField& field, const std::filesystem::path& path, double lo, double hi) {
  write_bytes(path, encode_pgm(field, lo, hi));
}

}  // namespace maec
