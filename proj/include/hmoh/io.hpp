#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hmoh/errors.hpp"

// Little-endian binary I/O primitives shared by all file formats.

namespace hmoh::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; byte-swapping is not implemented");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail(Errc::truncated_file, "unexpected end of file");
  return v;
}

template <typename T>
void write_span(std::ostream& os, const T* data, std::size_t count) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_span(std::istream& is, T* data, std::size_t count) {
  static_assert(std::is_trivially_copyable_v<T>);
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!is) fail(Errc::truncated_file, "unexpected end of file");
}

inline void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
  std::array<char, 4> buf{};
  is.read(buf.data(), 4);
  if (!is || std::memcmp(buf.data(), magic, 4) != 0)
    fail(Errc::bad_magic, "bad magic, expected " + what);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(Errc::io_error, "cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::io_error, "cannot open for reading: " + path);
  return is;
}

// Big-endian u32 for the IDX format.
inline std::uint32_t read_u32_be(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) fail(Errc::truncated_file, "unexpected end of IDX file");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace hmoh::io
