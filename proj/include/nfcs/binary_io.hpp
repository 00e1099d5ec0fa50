#pragma once

// Little-endian primitives for the NFCS* artifact files.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "nfcs/errors.hpp"
#include "nfcs/numerics.hpp"

namespace nfcs::binio {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xFF));
    }
    return out;
  }
}

template <typename U>
void put_uint(std::ostream& out, U v) {
  const U le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof(U));
}

template <typename U>
U get_uint(std::istream& in) {
  U v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!in) throw FormatError("unexpected end of file");
  return to_little(v);
}

inline void put_u8(std::ostream& out, std::uint8_t v) { put_uint(out, v); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put_uint(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_uint(out, v); }
inline std::uint8_t get_u8(std::istream& in) { return get_uint<std::uint8_t>(in); }
inline std::uint32_t get_u32(std::istream& in) { return get_uint<std::uint32_t>(in); }
inline std::uint64_t get_u64(std::istream& in) { return get_uint<std::uint64_t>(in); }

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_c128(std::ostream& out, cplx v) {
  put_f64(out, v.real());
  put_f64(out, v.imag());
}
inline cplx get_c128(std::istream& in) {
  const double re = get_f64(in);
  const double im = get_f64(in);
  return {re, im};
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) {
    throw FormatError("bad magic, expected " + std::string(magic));
  }
}

inline void put_cvec(std::ostream& out, const CVec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_c128(out, v[i]);
}
inline CVec get_cvec(std::istream& in, Eigen::Index n) {
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = get_c128(in);
  return v;
}

// Row-major element order.
inline void put_cmat(std::ostream& out, const CMat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_c128(out, m(r, c));
  }
}
inline CMat get_cmat(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  CMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_c128(in);
  }
  return m;
}

}  // namespace nfcs::binio
