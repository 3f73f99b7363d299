// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "relmatch/error.hpp"

namespace relmatch::io {

/// Little-endian primitive writer, independent of host byte order.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError(source_ + ": truncated file");
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw DataError(source_ + ": implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void expect_eof() {
    if (in_.peek() != std::char_traits<char>::eof()) throw DataError(source_ + ": trailing bytes");
  }

 private:
  std::uint64_t le(int n) {
    unsigned char buf[8];
    bytes(reinterpret_cast<char*>(buf), static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string source_;
};

}  // namespace relmatch::io
