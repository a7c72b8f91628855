// Copyright 2026 The DQAD Authors. All rights reserved.
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

#ifndef DQAD_BINARY_IO_HPP_
#define DQAD_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include "dqad/error.hpp"

namespace dqad::io {

// Little-endian byte sink.
class ByteWriter {
 public:
  void Bytes(std::string_view bytes) { buffer_.append(bytes); }

  template <typename T>
  void Scalar(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
        std::swap(raw[i], raw[sizeof(T) - 1 - i]);
      }
    }
    buffer_.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }

  template <typename T>
  void Array(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      buffer_.append(reinterpret_cast<const char*>(values.data()),
                     values.size_bytes());
    } else {
      for (const T& v : values) Scalar(v);
    }
  }

  const std::string& buffer() const { return buffer_; }

 private:
  std::string buffer_;
};

// Little-endian byte source. Every failure reports the source name and the
// byte offset at which decoding stopped.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string source)
      : data_(data), source_(std::move(source)) {}

  void ExpectMagic(std::string_view magic) {
    Need(magic.size(), "magic");
    if (data_.substr(offset_, magic.size()) != magic) {
      FailAt("bad magic, expected \"" + std::string(magic) + "\"");
    }
    offset_ += magic.size();
  }

  template <typename T>
  T Scalar(const char* what) {
    Need(sizeof(T), what);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, data_.data() + offset_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
        std::swap(raw[i], raw[sizeof(T) - 1 - i]);
      }
    }
    offset_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  template <typename T>
  void Array(std::span<T> out, const char* what) {
    Need(out.size_bytes(), what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + offset_, out.size_bytes());
      offset_ += out.size_bytes();
    } else {
      for (T& v : out) v = Scalar<T>(what);
    }
  }

  void ExpectEnd() {
    if (offset_ != data_.size()) FailAt("trailing bytes after payload");
  }

  std::size_t offset() const { return offset_; }

  [[noreturn]] void FailAt(const std::string& message) const {
    Fail(ErrorKind::kParse, source_ + ": " + message + " at offset " +
                                std::to_string(offset_));
  }

 private:
  void Need(std::size_t n, const char* what) {
    if (data_.size() - offset_ < n) {
      FailAt(std::string("truncated while reading ") + what);
    }
  }

  std::string_view data_;
  std::string source_;
  std::size_t offset_ = 0;
};

std::string ReadFile(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dqad::io

#endif  // DQAD_BINARY_IO_HPP_
