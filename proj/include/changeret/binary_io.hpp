#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "changeret/error.hpp"

namespace changeret::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void read_magic(std::istream& is, std::string_view magic, const std::string& what) {
  std::array<char, 8> buf{};
  is.read(buf.data(), static_cast<std::streamsize>(magic.size()));
  if (!is || std::string_view(buf.data(), magic.size()) != magic) {
    throw Error(Errc::kParse, what + ": bad magic, expected \"" + std::string(magic) + "\"");
  }
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f32(std::ostream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error(Errc::kParse, what + ": truncated file");
  return v;
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  return read_pod<std::uint32_t>(is, what);
}

inline float read_f32(std::istream& is, const std::string& what) {
  return read_pod<float>(is, what);
}

inline std::uint8_t read_u8(std::istream& is, const std::string& what) {
  return read_pod<std::uint8_t>(is, what);
}

/// Requires the stream to be exhausted; trailing bytes are a format error.
inline void expect_eof(std::istream& is, const std::string& what) {
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::kParse, what + ": trailing bytes after payload");
  }
}

}  // namespace changeret::binio
