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

// Shared fixtures for the unit and acceptance tests: a fixed set of
// synthetic models plus brute-force reference computations that share no
// code with the structures they check.

#include "exa/io/synthetic.hpp"
#include "exa/scene.hpp"

#include <bit>
#include <cstring>
#include <random>
#include <set>
#include <string>

namespace exa::testing {

  struct ModelCase {
    std::string name;
    io::SyntheticSpec spec;
  };

  inline io::SyntheticSpec make_spec(io::SyntheticField f, int extent, int maxLevel, double threshold, double holes,
                                     double jumps, uint64_t seed = 7)
  {
    io::SyntheticSpec s;
    s.field = f;
    s.extent = vec3i(extent);
    s.maxLevel = maxLevel;
    s.threshold = threshold;
    s.holeFraction = holes;
    s.jumpFraction = jumps;
    s.seed = seed;
    return s;
  }

  /// 10^3..10^5 cells each, several levels, holes and two-level jumps
  inline std::vector<ModelCase> reference_models()
  {
    using io::SyntheticField;
    return {
      {"gaussian32", make_spec(SyntheticField::gaussian, 32, 3, 0.3, 0.05, 0.1)},
      {"turbulence32", make_spec(SyntheticField::turbulence, 32, 3, 0.5, 0.03, 0.2)},
      {"gaussian48", make_spec(SyntheticField::gaussian, 48, 4, 0.2, 0.02, 0.15)},
      {"turbulence48", make_spec(SyntheticField::turbulence, 48, 3, 0.35, 0.03, 0.15)},
      {"gaussian64", make_spec(SyntheticField::gaussian, 64, 3, 0.08, 0.02, 0.1)},
    };
  }

  /// smaller models for quick unit tests
  inline std::vector<ModelCase> small_models()
  {
    using io::SyntheticField;
    return {
      {"gaussian16", make_spec(SyntheticField::gaussian, 16, 2, 0.3, 0.05, 0.2, 3)},
      {"turbulence16", make_spec(SyntheticField::turbulence, 16, 3, 0.3, 0.05, 0.2, 5)},
      {"ramp16", make_spec(SyntheticField::ramp, 16, 2, 1.5, 0.0, 0.0)},
    };
  }

  inline std::shared_ptr<const SceneData> build_scene_data(const io::SyntheticSpec &spec, bool keepKdTree = false,
                                                           int maxBrickWidth = 32)
  {
    BrickBuildParams p;
    p.keepKdTree = keepKdTree;
    p.maxBrickWidth = maxBrickWidth;
    return make_scene_data(io::generate_synthetic(spec), p);
  }

  inline int count_levels(const CellSet &cells)
  {
    std::set<int32_t> levels;
    for (const auto &c : cells.coords) levels.insert(c.level);
    return int(levels.size());
  }

  /// true if some cell is adjacent (face, edge or corner) to a cell two or
  /// more levels coarser
  inline bool has_multi_level_jump(const CellSet &cells)
  {
    std::unordered_map<LevelCoord, int, LevelCoordHash> index;
    int maxLevel = 0;
    for (const auto &c : cells.coords) {
      index.emplace(c, 1);
      maxLevel = std::max(maxLevel, c.level);
    }
    for (const auto &c : cells.coords) {
      const int64_t w = c.width();
      for (int d = 0; d < 27; ++d) {
        if (d == 13) continue;
        const int64_t x = c.i + (d % 3 - 1) * w, y = c.j + ((d / 3) % 3 - 1) * w, z = c.k + (d / 9 - 1) * w;
        for (int l = c.level + 2; l <= maxLevel; ++l) {
          const int64_t lw = level_width(l);
          const LevelCoord anc{int32_t(floor_div(x, lw) * lw), int32_t(floor_div(y, lw) * lw),
                               int32_t(floor_div(z, lw) * lw), l};
          if (index.count(anc)) return true;
        }
      }
    }
    return false;
  }

  inline uint64_t bits(double v)
  {
    uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    return u;
  }

  inline vec3d random_point(std::mt19937_64 &rng, const Box3 &b)
  {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {b.lo.x + u(rng) * (b.hi.x - b.lo.x), b.lo.y + u(rng) * (b.hi.y - b.lo.y),
            b.lo.z + u(rng) * (b.hi.z - b.lo.z)};
  }

  /// Independent basis evaluation straight from a cell list: every cell,
  /// hat weights from the textbook formula. Summation order differs from
  /// the library, so agreement is only up to rounding.
  struct CellOracleResult {
    double value = 0.0, weightSum = 0.0;
    float minValue = 0.f, maxValue = 0.f;
    double finestWidth = 0.0;
    int contributors = 0;
  };

  inline CellOracleResult cell_oracle(const CellSet &cells, const vec3d &p, size_t field = 0)
  {
    CellOracleResult r;
    double num = 0.0;
    r.minValue = std::numeric_limits<float>::infinity();
    r.maxValue = -std::numeric_limits<float>::infinity();
    r.finestWidth = std::numeric_limits<double>::infinity();
    for (size_t n = 0; n < cells.size(); ++n) {
      const LevelCoord &c = cells.coords[n];
      const double w = double(int64_t(1) << c.level);
      double weight = 1.0;
      for (int a = 0; a < 3; ++a) {
        const double center = double(c.lower()[a]) + 0.5 * w;
        weight *= std::max(0.0, 1.0 - std::abs(center - p[a]) / w);
      }
      if (weight <= 0.0) continue;
      const float v = cells.values[field][n];
      num += weight * double(v);
      r.weightSum += weight;
      r.minValue = std::min(r.minValue, v);
      r.maxValue = std::max(r.maxValue, v);
      r.finestWidth = std::min(r.finestWidth, w);
      ++r.contributors;
    }
    if (r.weightSum > 0.0) r.value = num / r.weightSum;
    return r;
  }

  /// Brick ids whose support overlaps the box interior, by scanning every brick.
  inline std::vector<uint32_t> overlapping_supports(const AmrModel &model, const Box3 &box)
  {
    std::vector<uint32_t> out;
    for (uint32_t b = 0; b < model.bricks.size(); ++b)
      if (overlaps_interior(brick_support(model.bricks[b]), box)) out.push_back(b);
    return out;
  }

  /// Uniform bucket grid over brick supports; lets brute-force overlap
  /// checks scale to models with thousands of bricks.
  class SupportBuckets {
  public:
    explicit SupportBuckets(const AmrModel &model, int res = 16) : model_(model), res_(res)
    {
      for (const Brick &b : model.bricks) bounds_.extend(brick_support(b));
      buckets_.resize(size_t(res) * res * res);
      for (uint32_t id = 0; id < model.bricks.size(); ++id) {
        const auto [lo, hi] = range(brick_support(model.bricks[id]));
        for (int z = lo.z; z <= hi.z; ++z)
          for (int y = lo.y; y <= hi.y; ++y)
            for (int x = lo.x; x <= hi.x; ++x) buckets_[size_t(x + res_ * (y + res_ * z))].push_back(id);
      }
    }

    std::vector<uint32_t> overlapping(const Box3 &box) const
    {
      std::vector<uint32_t> out;
      const auto [lo, hi] = range(box);
      for (int z = lo.z; z <= hi.z; ++z)
        for (int y = lo.y; y <= hi.y; ++y)
          for (int x = lo.x; x <= hi.x; ++x)
            for (uint32_t id : buckets_[size_t(x + res_ * (y + res_ * z))])
              if (overlaps_interior(brick_support(model_.bricks[id]), box)) out.push_back(id);
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }

  private:
    std::pair<vec3i, vec3i> range(const Box3 &b) const
    {
      vec3i lo, hi;
      for (int a = 0; a < 3; ++a) {
        const double s = double(res_) / (bounds_.hi[a] - bounds_.lo[a]);
        lo[a] = std::clamp(int(std::floor((b.lo[a] - bounds_.lo[a]) * s)), 0, res_ - 1);
        hi[a] = std::clamp(int(std::floor((b.hi[a] - bounds_.lo[a]) * s)), 0, res_ - 1);
      }
      return {lo, hi};
    }

    const AmrModel &model_;
    int res_;
    Box3 bounds_;
    std::vector<std::vector<uint32_t>> buckets_;
  };

  /// Exact coverage counts on the half-unit lattice that every support and
  /// region face lies on. `counts[v]` is the number of boxes covering voxel v.
  struct HalfLattice {
    vec3d origin;
    vec3i dims;
    std::vector<uint16_t> counts;

    explicit HalfLattice(const Box3 &bounds)
    {
      origin = bounds.lo;
      for (int a = 0; a < 3; ++a) dims[a] = int(std::llround((bounds.hi[a] - bounds.lo[a]) * 2.0));
      counts.assign(size_t(dims.x) * dims.y * dims.z, 0);
    }

    /// false if the box does not sit on the lattice
    bool add(const Box3 &b)
    {
      vec3i lo, hi;
      for (int a = 0; a < 3; ++a) {
        const double l = (b.lo[a] - origin[a]) * 2.0, h = (b.hi[a] - origin[a]) * 2.0;
        if (l != std::round(l) || h != std::round(h)) return false;
        lo[a] = int(l);
        hi[a] = int(h);
      }
      for (int z = lo.z; z < hi.z; ++z)
        for (int y = lo.y; y < hi.y; ++y)
          for (int x = lo.x; x < hi.x; ++x) {
            auto &c = counts[size_t(x) + size_t(dims.x) * (size_t(y) + size_t(dims.y) * size_t(z))];
            c = uint16_t(std::min(int(c) + 1, 65535));
          }
      return true;
    }

    double voxelVolume() const { return 0.125; }
  };

  /// Volume of the union of all brick supports, by rasterization.
  inline double support_union_volume(const AmrModel &model)
  {
    Box3 bounds;
    for (const Brick &b : model.bricks) bounds.extend(brick_support(b));
    if (bounds.empty()) return 0.0;
    HalfLattice lat(bounds);
    for (const Brick &b : model.bricks) lat.add(brick_support(b));
    uint64_t covered = 0;
    for (auto c : lat.counts) covered += c > 0;
    return double(covered) * lat.voxelVolume();
  }

  /// One point per cell center; the brick whose box contains it, by scanning
  /// every brick. -1 for none, -2 for several.
  inline int64_t brick_containing(const AmrModel &model, const vec3d &p)
  {
    int64_t found = -1;
    for (size_t b = 0; b < model.bricks.size(); ++b)
      if (model.bricks[b].bounds().contains_half_open(p)) {
        if (found >= 0) return -2;
        found = int64_t(b);
      }
    return found;
  }

  /// Arbitrary cell list for serialization tests; not necessarily valid
  /// AMR, with awkward float bit patterns mixed in.
  inline CellSet random_cells(std::mt19937_64 &rng, size_t n, size_t numFields)
  {
    std::vector<std::string> names;
    for (size_t f = 0; f < numFields; ++f) names.push_back("field_" + std::to_string(f) + (f % 2 ? "_\xc3\xa9" : ""));
    CellSet cells(names);
    std::uniform_int_distribution<int32_t> coord(std::numeric_limits<int32_t>::min(), std::numeric_limits<int32_t>::max());
    std::uniform_int_distribution<int> level(0, 255);
    std::uniform_int_distribution<uint32_t> raw;
    for (size_t c = 0; c < n; ++c) {
      cells.coords.push_back({coord(rng), coord(rng), coord(rng), level(rng)});
      for (size_t f = 0; f < numFields; ++f) {
        const uint32_t u = raw(rng);
        float v;
        switch (u % 5) {
        case 0: v = std::numeric_limits<float>::quiet_NaN(); break;
        case 1: v = -0.f; break;
        case 2: v = std::numeric_limits<float>::infinity(); break;
        default: std::memcpy(&v, &u, sizeof v);
        }
        cells.values[f].push_back(v);
      }
    }
    return cells;
  }

  /// bitwise equality, so NaN payloads and signed zeros count
  inline bool identical(const CellSet &a, const CellSet &b)
  {
    if (a.fieldNames != b.fieldNames || a.coords != b.coords || a.values.size() != b.values.size()) return false;
    for (size_t f = 0; f < a.values.size(); ++f) {
      if (a.values[f].size() != b.values[f].size()) return false;
      if (std::memcmp(a.values[f].data(), b.values[f].data(), a.values[f].size() * sizeof(float)) != 0) return false;
    }
    return true;
  }

} // ::exa::testing
