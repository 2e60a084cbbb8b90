// ======================================================================== //
// Copyright 2026 The ExaBricks-CPU Authors                                 //
//                                                                          //
// Licensed under the Apache License, Version 2.0 (the "License");          //
// you may not use this file except in compliance with the License.         //
// You may obtain a copy of the License at                                  //
//                                                                          //
//     http://www.apache.org/licenses/LICENSE-2.0                           //
//                                                                          //
// Unless required by applicable law or agreed to in writing, software      //
// distributed under the License is distributed on an "AS IS" BASIS,        //
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. //
// See the License for the specific language governing permissions and      //
// limitations under the License.                                           //
// ======================================================================== //

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace exa::io {

  static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

  /// Parse failure with the byte offset where it was detected.
  struct FormatError : std::runtime_error {
    uint64_t offset;
    FormatError(const std::string &msg, uint64_t offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
  };

  class ByteWriter {
  public:
    template <typename T>
    void put(T v)
    {
      static_assert(std::is_trivially_copyable_v<T>);
      const auto *p = reinterpret_cast<const char *>(&v);
      buf_.append(p, sizeof(T));
    }
    template <typename T>
    void putArray(const T *data, size_t n)
    {
      buf_.append(reinterpret_cast<const char *>(data), n * sizeof(T));
    }
    void putBytes(std::string_view s) { buf_.append(s); }
    void putString(std::string_view s)
    {
      put<uint32_t>(uint32_t(s.size()));
      buf_.append(s);
    }
    const std::string &bytes() const { return buf_; }

  private:
    std::string buf_;
  };

  class ByteReader {
  public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    uint64_t offset() const { return pos_; }
    uint64_t remaining() const { return data_.size() - pos_; }
    bool atEnd() const { return pos_ == data_.size(); }

    void need(uint64_t n, std::string_view what) const
    {
      if (remaining() < n)
        throw FormatError("truncated file: missing " + std::string(what) + " (need " + std::to_string(n)
                              + " bytes, have " + std::to_string(remaining()) + ")",
                          pos_);
    }

    template <typename T>
    T get(std::string_view what)
    {
      need(sizeof(T), what);
      T v;
      std::memcpy(&v, data_.data() + pos_, sizeof(T));
      pos_ += sizeof(T);
      return v;
    }

    template <typename T>
    void getArray(T *out, uint64_t n, std::string_view what)
    {
      if (n > remaining() / sizeof(T)) need(n * sizeof(T), what);
      std::memcpy(out, data_.data() + pos_, n * sizeof(T));
      pos_ += n * sizeof(T);
    }

    std::string_view getBytes(uint64_t n, std::string_view what)
    {
      need(n, what);
      auto s = data_.substr(pos_, n);
      pos_ += n;
      return s;
    }

    std::string getString(std::string_view what)
    {
      const uint32_t len = get<uint32_t>(what);
      return std::string(getBytes(len, what));
    }

  private:
    std::string_view data_;
    uint64_t pos_ = 0;
  };

  inline std::string read_file(const std::string &path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  inline void write_file(const std::string &path, std::string_view bytes)
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
  }

} // ::exa::io
