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

#include "exa/io/binary.hpp"

#include <png.h>

namespace exa::io {

  struct Image {
    int width = 0, height = 0;
    std::vector<uint8_t> rgba;
  };

  /// RGBA8 pixels (top row first) to an in-memory PNG.
  inline std::string encode_png(int width, int height, const std::vector<uint8_t> &rgba)
  {
    if (width <= 0 || height <= 0 || rgba.size() != size_t(width) * size_t(height) * 4)
      throw std::invalid_argument("encode_png: size mismatch");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(width);
    image.height = png_uint_32(height);
    image.format = PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgba.data(), 0, nullptr))
      throw std::runtime_error(std::string("png encode failed: ") + image.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgba.data(), 0, nullptr))
      throw std::runtime_error(std::string("png encode failed: ") + image.message);
    out.resize(size);
    return out;
  }

  inline Image decode_png(std::string_view bytes)
  {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
      throw std::runtime_error(std::string("png decode failed: ") + image.message);
    image.format = PNG_FORMAT_RGBA;
    Image out;
    out.width = int(image.width);
    out.height = int(image.height);
    out.rgba.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.rgba.data(), 0, nullptr)) {
      png_image_free(&image);
      throw std::runtime_error(std::string("png decode failed: ") + image.message);
    }
    return out;
  }

  inline void write_png(const std::string &path, int width, int height, const std::vector<uint8_t> &rgba)
  {
    write_file(path, encode_png(width, height, rgba));
  }

  /// headerless RGBA8, top row first
  inline void write_raw_rgba(const std::string &path, const std::vector<uint8_t> &rgba)
  {
    write_file(path, std::string_view(reinterpret_cast<const char *>(rgba.data()), rgba.size()));
  }

} // ::exa::io
