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

#include "exa/amr_model.hpp"
#include "exa/io/binary.hpp"

namespace exa::io {

  // .exacells layout, all little-endian:
  //   "EXAC" | u32 version | u32 fieldCount | fieldCount x (u32 len, utf-8 bytes)
  //   | u64 cellCount | i32 i[] | i32 j[] | i32 k[] | u8 level[] | fieldCount x f32 value[]
  inline constexpr char kCellsMagic[4] = {'E', 'X', 'A', 'C'};
  inline constexpr uint32_t kCellsVersion = 1;

  inline std::string encode_cells(const CellSet &cells)
  {
    if (cells.values.size() != cells.fieldNames.size()) throw std::invalid_argument("field names and value arrays differ");
    const uint64_t n = cells.size();
    for (const auto &v : cells.values)
      if (v.size() != n) throw std::invalid_argument("field value array length differs from cell count");

    ByteWriter w;
    w.putBytes(std::string_view(kCellsMagic, 4));
    w.put<uint32_t>(kCellsVersion);
    w.put<uint32_t>(uint32_t(cells.fieldNames.size()));
    for (const auto &name : cells.fieldNames) w.putString(name);
    w.put<uint64_t>(n);
    std::vector<int32_t> column(n);
    for (int axis = 0; axis < 3; ++axis) {
      for (uint64_t c = 0; c < n; ++c) column[c] = cells.coords[c].lower()[axis];
      w.putArray(column.data(), n);
    }
    std::vector<uint8_t> levels(n);
    for (uint64_t c = 0; c < n; ++c) {
      const int32_t l = cells.coords[c].level;
      if (l < 0 || l > 255) throw std::invalid_argument("cell level out of the u8 range");
      levels[c] = uint8_t(l);
    }
    w.putArray(levels.data(), n);
    for (const auto &v : cells.values) w.putArray(v.data(), n);
    return w.bytes();
  }

  /// Parses a complete .exacells image. Throws FormatError; never returns a
  /// partial cell set.
  inline CellSet decode_cells(std::string_view bytes)
  {
    ByteReader r(bytes);
    const std::string_view magic = r.getBytes(4, "magic");
    if (magic != std::string_view(kCellsMagic, 4)) throw FormatError("bad magic, not an .exacells file", 0);
    const uint32_t version = r.get<uint32_t>("version");
    if (version != kCellsVersion) throw FormatError("unsupported version " + std::to_string(version), 4);
    const uint32_t numFields = r.get<uint32_t>("field count");
    if (numFields == 0) throw FormatError("field count must be at least 1", r.offset() - 4);
    if (numFields > r.remaining() / 4) throw FormatError("field count exceeds file size", r.offset() - 4);

    std::vector<std::string> names;
    for (uint32_t f = 0; f < numFields; ++f) names.push_back(r.getString("field name " + std::to_string(f)));
    CellSet cells(names);

    const uint64_t n = r.get<uint64_t>("cell count");
    const char *axisNames[3] = {"i[] array", "j[] array", "k[] array"};
    // validate the size up front so a bogus count can not trigger a huge allocation
    {
      ByteReader probe = r;
      for (int axis = 0; axis < 3; ++axis) {
        if (n > probe.remaining() / 4) probe.need(n * 4, axisNames[axis]);
        probe.getBytes(n * 4, axisNames[axis]);
      }
      probe.getBytes(n, "level[] array");
      for (uint32_t f = 0; f < numFields; ++f) {
        const std::string what = "value[] array of field '" + names[f] + "'";
        if (n > probe.remaining() / 4) probe.need(n * 4, what);
        probe.getBytes(n * 4, what);
      }
      if (!probe.atEnd())
        throw FormatError("cell count " + std::to_string(n) + " inconsistent with file size: "
                              + std::to_string(probe.remaining()) + " trailing bytes",
                          probe.offset());
    }

    cells.coords.resize(n);
    std::vector<int32_t> column(n);
    for (int axis = 0; axis < 3; ++axis) {
      r.getArray(column.data(), n, axisNames[axis]);
      for (uint64_t c = 0; c < n; ++c) {
        auto &co = cells.coords[c];
        (axis == 0 ? co.i : (axis == 1 ? co.j : co.k)) = column[c];
      }
    }
    std::vector<uint8_t> levels(n);
    r.getArray(levels.data(), n, "level[] array");
    for (uint64_t c = 0; c < n; ++c) cells.coords[c].level = levels[c];
    for (uint32_t f = 0; f < numFields; ++f) {
      cells.values[f].resize(n);
      r.getArray(cells.values[f].data(), n, "value[] array of field '" + names[f] + "'");
    }
    return cells;
  }

  inline void save_cells(const std::string &path, const CellSet &cells) { write_file(path, encode_cells(cells)); }

  inline CellSet load_cells(const std::string &path) { return decode_cells(read_file(path)); }

} // ::exa::io
