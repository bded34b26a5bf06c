#pragma once

// Binary snapshot files and CSV writers.
//
// Snapshot layout (all little-endian):
//   "DMNLS1"          6 bytes magic
//   n                 u32
//   length            f64
//   t                 f64
//   n x (re, im)      f64 pairs

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "dmnls/errors.hpp"
#include "dmnls/grid_spectral.hpp"

namespace dmnls {

inline constexpr std::array<char, 6> snapshot_magic = {'D', 'M', 'N', 'L', 'S', '1'};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

inline void put_f64(std::vector<unsigned char>& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

inline double get_f64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(v);
}

inline constexpr std::size_t snapshot_header_size = 6 + 4 + 8 + 8;

}  // namespace detail

inline std::vector<unsigned char> encode_snapshot(const ComplexField& field, double t) {
  std::vector<unsigned char> out;
  out.reserve(detail::snapshot_header_size + 16 * field.size());
  out.insert(out.end(), snapshot_magic.begin(), snapshot_magic.end());
  detail::put_u32(out, static_cast<std::uint32_t>(field.size()));
  detail::put_f64(out, field.grid().length());
  detail::put_f64(out, t);
  for (const auto& z : field.values()) {
    detail::put_f64(out, z.real());
    detail::put_f64(out, z.imag());
  }
  return out;
}

inline std::pair<ComplexField, double> decode_snapshot(const std::vector<unsigned char>& bytes) {
  using Kind = SnapshotError::Kind;
  if (bytes.size() < snapshot_magic.size() ||
      !std::equal(snapshot_magic.begin(), snapshot_magic.end(), bytes.begin())) {
    throw SnapshotError(Kind::bad_magic, "snapshot does not start with magic DMNLS1");
  }
  if (bytes.size() < detail::snapshot_header_size) {
    throw SnapshotError(Kind::length_mismatch, "snapshot header truncated");
  }
  const unsigned char* p = bytes.data() + snapshot_magic.size();
  const std::uint32_t n = detail::get_u32(p);
  const double length = detail::get_f64(p + 4);
  const double t = detail::get_f64(p + 12);
  const std::size_t expected = detail::snapshot_header_size + 16 * static_cast<std::size_t>(n);
  if (bytes.size() != expected) {
    throw SnapshotError(Kind::length_mismatch,
                        "snapshot holds " + std::to_string(bytes.size()) + " bytes, header implies " +
                            std::to_string(expected));
  }
  GridPtr grid;
  try {
    grid = SpatialGrid::make(n, length);
  } catch (const std::invalid_argument& e) {
    throw SnapshotError(Kind::bad_grid, std::string("snapshot grid invalid: ") + e.what());
  }
  if (!std::isfinite(t)) throw SnapshotError(Kind::non_finite, "snapshot time is not finite");
  std::vector<Complex> values(n);
  const unsigned char* q = bytes.data() + detail::snapshot_header_size;
  for (std::size_t j = 0; j < n; ++j, q += 16) {
    const double re = detail::get_f64(q);
    const double im = detail::get_f64(q + 8);
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw SnapshotError(Kind::non_finite, "non-finite sample at index " + std::to_string(j));
    }
    values[j] = {re, im};
  }
  return {ComplexField(std::move(grid), std::move(values)), t};
}

inline void snapshot_write(const ComplexField& field, double t, const std::string& path) {
  const auto bytes = encode_snapshot(field, t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SnapshotError(SnapshotError::Kind::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SnapshotError(SnapshotError::Kind::io, "write failed: " + path);
}

inline std::pair<ComplexField, double> snapshot_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError(SnapshotError::Kind::io, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

/// %.17g round-trips every double.
inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_diagnostics_csv(const Trajectory& tr, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "t,mass,h1,energy\n";
  for (const auto& d : tr.diagnostics) {
    out << format_real(d.t) << ',' << format_real(d.mass) << ',' << format_real(d.h1) << ','
        << format_real(d.energy) << '\n';
  }
}

}  // namespace dmnls
