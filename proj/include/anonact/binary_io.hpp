#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "anonact/errors.hpp"

// Little-endian primitives shared by the checkpoint and steering-vector files.
namespace anonact::binary {

template <typename U>
void write_le(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const char* what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline void write_floats(std::ostream& out, const std::vector<float>& values) {
  for (float v : values) write_f32(out, v);
}
inline std::vector<float> read_floats(std::istream& in, std::size_t count, const char* what) {
  std::vector<float> values(count);
  for (auto& v : values) v = read_f32(in, what);
  return values;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_string(std::istream& in, std::size_t max_len, const char* what) {
  const auto len = read_le<std::uint32_t>(in, what);
  if (len > max_len) throw FormatError(std::string("implausible string length in ") + what);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw FormatError(std::string("truncated ") + what);
  return s;
}

}  // namespace anonact::binary
