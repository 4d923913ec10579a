#pragma once

// ROM1 matrix files: "ROM1", u32 rows, u32 cols, rows*cols f64 values,
// row-major, everything little-endian.

#include "romrec/matcore.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace romrec {

inline constexpr std::array<char, 4> kRom1Magic{'R', 'O', 'M', '1'};

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
  }
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("ROM1: truncated file");
  return to_little(v);
}

}  // namespace detail

inline void write_rom1(std::ostream& out, const SymMatrix& a) {
  const Index n = a.dim();
  if (n > static_cast<Index>(std::numeric_limits<std::uint32_t>::max()))
    throw FormatError("ROM1: matrix too large");
  out.write(kRom1Magic.data(), kRom1Magic.size());
  detail::put(out, static_cast<std::uint32_t>(n));
  detail::put(out, static_cast<std::uint32_t>(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) detail::put(out, a(i, j));
  if (!out) throw FormatError("ROM1: write failed");
}

/// Reads a ROM1 payload and checks that it is square and symmetric to within
/// 1e-9 * max|entry|.
inline SymMatrix read_rom1(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kRom1Magic) throw FormatError("ROM1: bad magic");
  const auto rows = detail::get<std::uint32_t>(in);
  const auto cols = detail::get<std::uint32_t>(in);
  if (rows == 0 || rows != cols) throw FormatError("ROM1: matrix must be square and non-empty");
  Matrix a(rows, cols);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) a(i, j) = detail::get<double>(in);
  if (!a.allFinite()) throw FormatError("ROM1: non-finite entry");
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale) throw FormatError("ROM1: payload is not symmetric");
  return symmetrize(a);
}

inline void write_rom1(const std::string& path, const SymMatrix& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("ROM1: cannot open " + path + " for writing");
  write_rom1(out, a);
}

inline SymMatrix read_rom1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("ROM1: cannot open " + path);
  return read_rom1(in);
}

}  // namespace romrec
