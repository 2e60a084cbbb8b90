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

#include "exa/math.hpp"

#include <cassert>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace exa {

  /// Lower-left lattice corner of a cell in finest-level units, plus its
  /// level. Level 0 is the finest level; a level-l cell is 2^l units wide.
  struct LevelCoord {
    int32_t i = 0, j = 0, k = 0;
    int32_t level = 0;

    constexpr vec3i lower() const { return {i, j, k}; }
    constexpr int64_t width() const { return level_width(level); }
    constexpr bool aligned() const
    {
      const int64_t w = width();
      return level >= 0 && i % w == 0 && j % w == 0 && k % w == 0;
    }

    friend constexpr bool operator==(const LevelCoord &, const LevelCoord &) = default;
  };

  struct LevelCoordHash {
    size_t operator()(const LevelCoord &c) const noexcept
    {
      uint64_t h = mix64(uint64_t(uint32_t(c.i)));
      h = mix64(h ^ uint64_t(uint32_t(c.j)));
      h = mix64(h ^ uint64_t(uint32_t(c.k)));
      return size_t(mix64(h ^ uint64_t(c.level)));
    }
  };

  /// An unordered list of AMR cells in columnar layout: one coordinate per
  /// cell and one scalar array per declared field.
  struct CellSet {
    std::vector<std::string> fieldNames{"value"};
    std::vector<LevelCoord> coords;
    std::vector<std::vector<float>> values{std::vector<float>{}};

    CellSet() = default;
    explicit CellSet(std::vector<std::string> names)
      : fieldNames(std::move(names)), values(fieldNames.size()) {}

    size_t size() const { return coords.size(); }
    bool empty() const { return coords.empty(); }
    size_t numFields() const { return fieldNames.size(); }

    void add(const LevelCoord &c, std::initializer_list<float> fieldValues)
    {
      assert(fieldValues.size() == values.size());
      coords.push_back(c);
      size_t f = 0;
      for (float v : fieldValues) values[f++].push_back(v);
    }
    void add(const LevelCoord &c, float value)
    {
      assert(values.size() == 1);
      coords.push_back(c);
      values[0].push_back(value);
    }
    void reserve(size_t n)
    {
      coords.reserve(n);
      for (auto &v : values) v.reserve(n);
    }
  };

  inline Box3 cell_bounds(const LevelCoord &c)
  {
    const double w = double(c.width());
    const vec3d lo(double(c.i), double(c.j), double(c.k));
    return {lo, lo + vec3d(w)};
  }

  inline vec3d cell_center(const LevelCoord &c)
  {
    const double hw = 0.5 * double(c.width());
    return vec3d(double(c.i) + hw, double(c.j) + hw, double(c.k) + hw);
  }

  /// Region where the cell's hat basis function is non-zero: the cell box
  /// grown by half a cell width on every face.
  inline Box3 cell_support(const LevelCoord &c)
  {
    return cell_bounds(c).grown(0.5 * double(c.width()));
  }

  /// Grid of same-level cells. Scalars are stored x-fastest starting at
  /// `begin` in the model's per-field scalar array.
  struct Brick {
    vec3i lower;
    int32_t level = 0;
    vec3i dims{1, 1, 1};
    uint64_t begin = 0;

    int64_t width() const { return level_width(level); }
    int64_t numCells() const { return int64_t(dims.x) * dims.y * dims.z; }
    int64_t linearIndex(int x, int y, int z) const { return x + int64_t(dims.x) * (y + int64_t(dims.y) * z); }
    LevelCoord cellCoord(int x, int y, int z) const
    {
      const int64_t w = width();
      return {int32_t(lower.x + x * w), int32_t(lower.y + y * w), int32_t(lower.z + z * w), level};
    }
    Box3 bounds() const
    {
      const vec3d lo(lower);
      return {lo, lo + vec3d(dims) * double(width())};
    }

    friend bool operator==(const Brick &, const Brick &) = default;
  };

  inline Box3 brick_support(const Brick &b) { return b.bounds().grown(0.5 * double(b.width())); }

  /// Bricked AMR data set. Bricks are pairwise disjoint and their union
  /// equals the union of the input cells.
  struct AmrModel {
    std::vector<std::string> fieldNames{"value"};
    uint64_t cellCount = 0;
    std::vector<Brick> bricks;
    std::vector<std::vector<float>> scalars{std::vector<float>{}};
    Box3 bounds;

    size_t numFields() const { return fieldNames.size(); }

    float value(size_t field, const Brick &b, int x, int y, int z) const
    {
      return scalars[field][b.begin + b.linearIndex(x, y, z)];
    }

    /// global min/max over all cells of a field
    std::pair<float, float> valueRange(size_t field = 0) const
    {
      const auto &s = scalars.at(field);
      if (s.empty()) return {0.f, 0.f};
      auto [lo, hi] = std::minmax_element(s.begin(), s.end());
      return {*lo, *hi};
    }

    /// Re-expands the bricks into a cell list (brick order, x-fastest).
    CellSet cells() const
    {
      CellSet out(fieldNames);
      out.reserve(cellCount);
      for (const Brick &b : bricks)
        for (int z = 0; z < b.dims.z; ++z)
          for (int y = 0; y < b.dims.y; ++y)
            for (int x = 0; x < b.dims.x; ++x) {
              out.coords.push_back(b.cellCoord(x, y, z));
              for (size_t f = 0; f < numFields(); ++f)
                out.values[f].push_back(value(f, b, x, y, z));
            }
      return out;
    }
  };

  struct ValidationReport {
    std::vector<size_t> misaligned;
    std::vector<std::pair<size_t, size_t>> duplicates;
    /// (coarser cell, covered cell)
    std::vector<std::pair<size_t, size_t>> overlaps;
    bool fieldSizeMismatch = false;

    bool ok() const { return misaligned.empty() && duplicates.empty() && overlaps.empty() && !fieldSizeMismatch; }
    size_t numViolations() const
    {
      return misaligned.size() + duplicates.size() + overlaps.size() + (fieldSizeMismatch ? 1 : 0);
    }

    std::string summary(const CellSet *cells = nullptr, size_t maxListed = 8) const
    {
      std::ostringstream o;
      if (ok()) {
        o << "cells valid";
        return o.str();
      }
      auto describe = [&](size_t idx) {
        std::ostringstream s;
        s << "#" << idx;
        if (cells && idx < cells->size()) {
          const auto &c = cells->coords[idx];
          s << " (" << c.i << "," << c.j << "," << c.k << ";" << c.level << ")";
        }
        return s.str();
      };
      if (fieldSizeMismatch) o << "field arrays do not match the cell count\n";
      if (!misaligned.empty()) {
        o << misaligned.size() << " misaligned cell(s):";
        for (size_t n = 0; n < std::min(maxListed, misaligned.size()); ++n) o << " " << describe(misaligned[n]);
        o << "\n";
      }
      if (!duplicates.empty()) {
        o << duplicates.size() << " duplicate cell(s):";
        for (size_t n = 0; n < std::min(maxListed, duplicates.size()); ++n)
          o << " " << describe(duplicates[n].first) << "=" << describe(duplicates[n].second);
        o << "\n";
      }
      if (!overlaps.empty()) {
        o << overlaps.size() << " overlapping cell pair(s):";
        for (size_t n = 0; n < std::min(maxListed, overlaps.size()); ++n)
          o << " " << describe(overlaps[n].first) << " covers " << describe(overlaps[n].second);
        o << "\n";
      }
      return o.str();
    }
  };

  /// Checks lattice alignment, duplicates and overlaps. Holes and level
  /// jumps of any size are legal.
  ///
  /// Aligned power-of-two cells are either nested or disjoint, so an
  /// overlap always means some coarser cell is an ancestor of a finer one;
  /// each cell only has to look up its ancestors at coarser levels.
  inline ValidationReport validate_cells(const CellSet &cells)
  {
    ValidationReport report;
    for (const auto &v : cells.values)
      if (v.size() != cells.size()) report.fieldSizeMismatch = true;

    std::unordered_map<LevelCoord, size_t, LevelCoordHash> index;
    index.reserve(cells.size());
    int32_t maxLevel = 0;
    for (size_t n = 0; n < cells.size(); ++n) {
      const LevelCoord &c = cells.coords[n];
      if (c.level < 0 || c.level > 30 || !c.aligned()) {
        report.misaligned.push_back(n);
        continue;
      }
      maxLevel = std::max(maxLevel, c.level);
      auto [it, inserted] = index.emplace(c, n);
      if (!inserted) report.duplicates.emplace_back(it->second, n);
    }
    for (size_t n = 0; n < cells.size(); ++n) {
      const LevelCoord &c = cells.coords[n];
      if (c.level < 0 || c.level > 30 || !c.aligned()) continue;
      for (int32_t l = c.level + 1; l <= maxLevel; ++l) {
        const int64_t w = level_width(l);
        const LevelCoord anc{int32_t(floor_div(c.i, w) * w), int32_t(floor_div(c.j, w) * w),
                             int32_t(floor_div(c.k, w) * w), l};
        auto it = index.find(anc);
        if (it != index.end()) report.overlaps.emplace_back(it->second, n);
      }
    }
    return report;
  }

  struct InvalidCellsError : std::runtime_error {
    ValidationReport report;
    explicit InvalidCellsError(ValidationReport r, const std::string &what)
      : std::runtime_error(what), report(std::move(r)) {}
  };

} // ::exa
