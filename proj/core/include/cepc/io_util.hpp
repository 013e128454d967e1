// Copyright 2026 The cepc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small file, byte and text helpers shared by the on-disk formats.

#ifndef CEPC_IO_UTIL_HPP_
#define CEPC_IO_UTIL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cepc {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; key order is the json's own.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Shortest representation that round-trips the float exactly.
std::string format_float(float v);
/// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

std::string csv_field(std::string_view s);
/// Minimal RFC 4180 reader (quoted fields, doubled quotes).
std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& path);

std::uint32_t checked_u32(std::size_t v, const char* what);

/// FNV-1a of the bytes, as 16 lowercase hex digits.
std::string hash_hex(std::string_view bytes);

/// Little-endian serializer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void i8(std::int8_t v) { buf_.push_back(static_cast<std::uint8_t>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s);

  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian deserializer; every read past the end is a FormatError.
class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  std::uint8_t u8();
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string bytes(std::size_t n);

  void require(std::uint64_t n, const char* part) const;
  bool at_end() const noexcept { return pos_ == buf_.size(); }
  std::size_t position() const noexcept { return pos_; }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace cepc

#endif  // CEPC_IO_UTIL_HPP_
