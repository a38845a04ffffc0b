#pragma once

// Little-endian primitives shared by the embedding and checkpoint formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "tane/error.hpp"

namespace tane::detail {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xffu));
    }
    return out;
  }
}

template <typename U>
void write_uint(std::ostream& out, U v) {
  const U le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof(U));
}

template <typename U>
U read_uint(std::istream& in, const char* what) {
  U raw = 0;
  in.read(reinterpret_cast<char*>(&raw), sizeof(U));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(U))) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return to_little(raw);
}

inline void write_f32(std::ostream& out, float v) {
  write_uint(out, std::bit_cast<std::uint32_t>(v));
}
inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_uint<std::uint32_t>(in, what));
}
inline void write_f64(std::ostream& out, double v) {
  write_uint(out, std::bit_cast<std::uint64_t>(v));
}
inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_uint<std::uint64_t>(in, what));
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4] = {};
  in.read(buf, 4);
  if (in.gcount() != 4) throw FormatError("truncated header");
  if (std::string(buf, 4) != std::string(magic, 4)) {
    throw FormatError("bad magic '" + std::string(buf, 4) + "'");
  }
}

}  // namespace tane::detail
