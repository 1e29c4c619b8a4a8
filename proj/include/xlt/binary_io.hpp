/*
 * Copyright 2026 The xlt-subnet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "xlt/error.hpp"

namespace xlt::binary {

// Little-endian primitive writer over an ostream that tracks the number of
// bytes emitted so far, so failures can name their offset.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  std::uint64_t offset() const { return offset_; }

  void Bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) {
      throw Error(ErrorKind::kIo, "write of " + std::to_string(n) +
                                      " bytes failed", offset_);
    }
    offset_ += n;
  }

  template <typename T>
  void Le(T value) {
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(value);
    std::array<unsigned char, sizeof(T)> buf;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf[i] = static_cast<unsigned char>(u >> (8 * i));
    }
    Bytes(buf.data(), buf.size());
  }

  void U8(std::uint8_t v) { Le(v); }
  void U16(std::uint16_t v) { Le(v); }
  void U32(std::uint32_t v) { Le(v); }
  void U64(std::uint64_t v) { Le(v); }
  void I32(std::int32_t v) { Le(v); }
  void F32(float v) { Le(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { Le(std::bit_cast<std::uint64_t>(v)); }

  void String32(std::string_view s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }

  // Fixed-width ASCII field, zero padded.
  void Padded(std::string_view s, std::size_t width) {
    std::string buf(width, '\0');
    std::memcpy(buf.data(), s.data(), std::min(width, s.size()));
    Bytes(buf.data(), width);
  }

 private:
  std::ostream& out_;
  std::uint64_t offset_ = 0;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const { return offset_; }

  // Reads exactly n bytes or throws kTruncated naming what was being read.
  void Bytes(void* data, std::size_t n, std::string_view what) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw Error(ErrorKind::kTruncated,
                  std::string(what) + ": expected " + std::to_string(n) +
                      " bytes, got " + std::to_string(got),
                  offset_ + got);
    }
    offset_ += n;
  }

  // Returns how many bytes were actually read (0..n) without throwing.
  std::size_t TryBytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    offset_ += got;
    return got;
  }

  bool AtEnd() {
    return in_.peek() == std::char_traits<char>::eof();
  }

  template <typename T>
  T Le(std::string_view what) {
    std::array<unsigned char, sizeof(T)> buf;
    Bytes(buf.data(), buf.size(), what);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    }
    return static_cast<T>(u);
  }

  std::uint8_t U8(std::string_view w) { return Le<std::uint8_t>(w); }
  std::uint16_t U16(std::string_view w) { return Le<std::uint16_t>(w); }
  std::uint32_t U32(std::string_view w) { return Le<std::uint32_t>(w); }
  std::uint64_t U64(std::string_view w) { return Le<std::uint64_t>(w); }
  std::int32_t I32(std::string_view w) { return Le<std::int32_t>(w); }
  float F32(std::string_view w) { return std::bit_cast<float>(U32(w)); }
  double F64(std::string_view w) { return std::bit_cast<double>(U64(w)); }

  std::string String32(std::string_view what, std::uint32_t max_len) {
    const std::uint64_t at = offset_;
    const std::uint32_t len = U32(what);
    if (len > max_len) {
      throw Error(ErrorKind::kInvalid,
                  std::string(what) + " length " + std::to_string(len) +
                      " exceeds limit " + std::to_string(max_len),
                  at);
    }
    std::string s(len, '\0');
    Bytes(s.data(), len, what);
    return s;
  }

  std::string Padded(std::size_t width, std::string_view what) {
    const std::uint64_t at = offset_;
    std::string s(width, '\0');
    Bytes(s.data(), width, what);
    const std::size_t len = std::strlen(s.c_str());
    for (std::size_t i = len; i < width; ++i) {
      if (s[i] != '\0') {
        throw Error(ErrorKind::kInvalid, std::string(what) + " padding is not zero", at + i);
      }
    }
    s.resize(len);
    return s;
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace xlt::binary
