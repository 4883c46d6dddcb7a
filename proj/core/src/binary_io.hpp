#pragma once

// Little-endian primitive I/O shared by the binary containers.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "connear/error.hpp"

namespace connear::detail {

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_f32_array(std::ostream& out, const float* v, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put_f32(out, v[i]);
  }
}

// Reader that tracks the byte offset so errors can say where they happened.
class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::uint64_t offset() const { return offset_; }

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      fail("unexpected end of data (wanted " + std::to_string(n) + " bytes)");
    offset_ += n;
  }

  template <typename U>
  U le() {
    std::array<unsigned char, sizeof(U)> b;
    bytes(reinterpret_cast<char*>(b.data()), b.size());
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
  }

  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  void f32_array(float* dst, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(reinterpret_cast<char*>(dst), n * sizeof(float));
    } else {
      for (std::size_t i = 0; i < n; ++i) dst[i] = f32();
    }
  }

  // Continue counting from a position reached by seeking.
  void set_offset(std::uint64_t offset) { offset_ = offset; }

  void expect_magic(const char (&magic)[5]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) {
      offset_ -= 4;
      fail(std::string("bad magic, expected '") + magic + "'");
    }
  }

  // True when nothing follows the current position.
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(what_ + ": " + msg + " at byte offset " + std::to_string(offset_));
  }

 private:
  std::istream& in_;
  std::string what_;
  std::uint64_t offset_ = 0;
};

}  // namespace connear::detail
