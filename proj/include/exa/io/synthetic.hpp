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

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>

namespace exa::io {

  enum class SyntheticField { gaussian, ramp, turbulence, constant };

  inline std::string_view to_string(SyntheticField f)
  {
    switch (f) {
    case SyntheticField::gaussian: return "gaussian";
    case SyntheticField::ramp: return "ramp";
    case SyntheticField::turbulence: return "turbulence";
    case SyntheticField::constant: return "constant";
    }
    return "gaussian";
  }

  inline std::optional<SyntheticField> parse_synthetic_field(std::string_view s)
  {
    for (auto f : {SyntheticField::gaussian, SyntheticField::ramp, SyntheticField::turbulence, SyntheticField::constant})
      if (s == to_string(f)) return f;
    return std::nullopt;
  }

  struct SyntheticSpec {
    SyntheticField field = SyntheticField::gaussian;
    /// domain size in finest-level units; each axis a multiple of 2^maxLevel
    vec3i extent{64, 64, 64};
    /// lower corner of the domain, a multiple of 2^maxLevel
    vec3i origin{0, 0, 0};
    int maxLevel = 3;
    /// a cell of width w is split while |grad f| * w >= threshold somewhere in it;
    /// 0 always splits, infinity never does
    double threshold = 0.1;
    uint64_t seed = 0;
    /// probability that a leaf is dropped, leaving a hole
    double holeFraction = 0.0;
    /// probability that an unsplit cell of level >= 2 is replaced by its
    /// level l-2 descendants, producing a two-level jump to its neighbors
    double jumpFraction = 0.0;
    double constantValue = 1.0;
    vec3d rampDirection{1.0, 0.0, 0.0};

    void validate() const
    {
      if (maxLevel < 0 || maxLevel > 20) throw std::invalid_argument("maxLevel must lie in [0,20]");
      if (!(threshold >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
      if (!(holeFraction >= 0.0 && holeFraction <= 1.0)) throw std::invalid_argument("holeFraction must lie in [0,1]");
      if (!(jumpFraction >= 0.0 && jumpFraction <= 1.0)) throw std::invalid_argument("jumpFraction must lie in [0,1]");
      const int64_t w = level_width(maxLevel);
      for (int a = 0; a < 3; ++a) {
        if (extent[a] <= 0 || extent[a] % w != 0)
          throw std::invalid_argument("extent must be positive and a multiple of 2^maxLevel on every axis");
        if (origin[a] % w != 0) throw std::invalid_argument("origin must be a multiple of 2^maxLevel");
      }
    }
  };

  namespace detail {

    inline double hash01(uint64_t seed, int64_t a, int64_t b, int64_t c, int64_t d)
    {
      uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dull);
      h = mix64(h ^ uint64_t(a));
      h = mix64(h ^ uint64_t(b));
      h = mix64(h ^ uint64_t(c));
      return hash_to_unit(mix64(h ^ uint64_t(d)));
    }

    inline double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

    /// trilinearly interpolated lattice noise in [0,1]
    inline double value_noise(const vec3d &p, uint64_t seed)
    {
      const double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
      const int64_t ix = int64_t(fx), iy = int64_t(fy), iz = int64_t(fz);
      const double tx = smooth(p.x - fx), ty = smooth(p.y - fy), tz = smooth(p.z - fz);
      double result = 0.0;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
            result += w * hash01(seed, ix + dx, iy + dy, iz + dz, 0x7e);
          }
      return result;
    }

  } // ::exa::detail

  /// The analytic field of a spec, in world units.
  inline std::function<double(const vec3d &)> synthetic_field_function(const SyntheticSpec &spec)
  {
    const vec3d lo(spec.origin);
    const vec3d size(spec.extent);
    switch (spec.field) {
    case SyntheticField::gaussian: {
      const vec3d c = lo + size * 0.5;
      const double sigma = 0.2 * reduce_max(size);
      return [c, sigma](const vec3d &p) {
        const vec3d d = p - c;
        return std::exp(-dot(d, d) / (2.0 * sigma * sigma));
      };
    }
    case SyntheticField::ramp: {
      const vec3d dir = spec.rampDirection;
      return [dir](const vec3d &p) { return dot(dir, p); };
    }
    case SyntheticField::turbulence: {
      const uint64_t seed = spec.seed;
      const double scale = 4.0 / reduce_max(size);
      return [lo, scale, seed](const vec3d &p) {
        double sum = 0.0, amp = 1.0, norm = 0.0, freq = scale;
        for (int octave = 0; octave < 4; ++octave) {
          sum += amp * detail::value_noise((p - lo) * freq, seed + uint64_t(octave));
          norm += amp;
          amp *= 0.5;
          freq *= 2.0;
        }
        return sum / norm;
      };
    }
    case SyntheticField::constant: {
      const double c = spec.constantValue;
      return [c](const vec3d &) { return c; };
    }
    }
    throw std::invalid_argument("unknown synthetic field");
  }

  namespace detail {

    class SyntheticGenerator {
    public:
      explicit SyntheticGenerator(const SyntheticSpec &spec)
        : spec(spec), f(synthetic_field_function(spec)), out(std::vector<std::string>{std::string(to_string(spec.field))}) {}

      CellSet run()
      {
        const int64_t w = level_width(spec.maxLevel);
        for (int64_t k = spec.origin.z; k < spec.origin.z + spec.extent.z; k += w)
          for (int64_t j = spec.origin.y; j < spec.origin.y + spec.extent.y; j += w)
            for (int64_t i = spec.origin.x; i < spec.origin.x + spec.extent.x; i += w)
              visit({int32_t(i), int32_t(j), int32_t(k), spec.maxLevel});
        return std::move(out);
      }

    private:
      double gradientMagnitude(const vec3d &p, double h) const
      {
        const vec3d g((f(p + vec3d(h, 0, 0)) - f(p - vec3d(h, 0, 0))) / (2 * h),
                      (f(p + vec3d(0, h, 0)) - f(p - vec3d(0, h, 0))) / (2 * h),
                      (f(p + vec3d(0, 0, h)) - f(p - vec3d(0, 0, h))) / (2 * h));
        return length(g);
      }

      /// max of |grad f| * w over the cell center and its children's centers
      bool wantsRefinement(const LevelCoord &c) const
      {
        const double w = double(c.width());
        if (spec.threshold == 0.0) return true;
        if (std::isinf(spec.threshold)) return false;
        const vec3d center = cell_center(c);
        const double h = 1e-3 * w;
        double g = gradientMagnitude(center, h);
        for (int n = 0; n < 8 && g * w < spec.threshold; ++n) {
          const vec3d q = center + vec3d((n & 1) ? 0.25 : -0.25, (n & 2) ? 0.25 : -0.25, (n & 4) ? 0.25 : -0.25) * w;
          g = std::max(g, gradientMagnitude(q, h));
        }
        return g * w >= spec.threshold;
      }

      void emit(const LevelCoord &c)
      {
        if (spec.holeFraction > 0.0 && hash01(spec.seed, c.i, c.j, c.k, 0x100 + c.level) < spec.holeFraction) return;
        out.add(c, float(f(cell_center(c))));
      }

      void visit(const LevelCoord &c)
      {
        if (c.level > 0 && wantsRefinement(c)) {
          split(c, c.level - 1, [&](const LevelCoord &child) { visit(child); });
          return;
        }
        if (c.level >= 2 && spec.jumpFraction > 0.0
            && hash01(spec.seed, c.i, c.j, c.k, 0x200 + c.level) < spec.jumpFraction) {
          split(c, c.level - 2, [&](const LevelCoord &child) { emit(child); });
          return;
        }
        emit(c);
      }

      template <typename Fn>
      static void split(const LevelCoord &c, int32_t level, Fn &&fn)
      {
        const int64_t n = level_width(c.level - level);
        const int64_t w = level_width(level);
        for (int64_t z = 0; z < n; ++z)
          for (int64_t y = 0; y < n; ++y)
            for (int64_t x = 0; x < n; ++x)
              fn(LevelCoord{int32_t(c.i + x * w), int32_t(c.j + y * w), int32_t(c.k + z * w), level});
      }

      const SyntheticSpec &spec;
      std::function<double(const vec3d &)> f;
      CellSet out;
    };

  } // ::exa::detail

  /// Top-down octree refinement of an analytic field. Leaf cells carry the
  /// field evaluated at their centers. Output is deterministic per spec.
  inline CellSet generate_synthetic(const SyntheticSpec &spec)
  {
    spec.validate();
    return detail::SyntheticGenerator(spec).run();
  }

  /// Builds level-0 cells from a dense x-fastest voxel array and merges
  /// aligned 2x2x2 blocks bottom-up while the raw voxel values under the
  /// block differ by at most `tolerance` (0 disables merging). A merged
  /// cell stores the mean of its voxels. Blocks reaching past the volume
  /// are never merged.
  inline CellSet import_structured(const vec3i &dims, std::span<const float> voxels, double tolerance,
                                   std::string fieldName = "value")
  {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) throw std::invalid_argument("volume dims must be positive");
    const size_t numVoxels = size_t(dims.x) * size_t(dims.y) * size_t(dims.z);
    if (voxels.size() != numVoxels) throw std::invalid_argument("voxel count does not match dims");

    struct Block {
      float lo, hi;
      double sum;
      bool merged;
    };
    // levels[l] holds the aligned blocks of width 2^l fully inside the volume
    std::vector<std::vector<Block>> levels;
    std::vector<vec3i> levelDims;
    levelDims.push_back(dims);
    levels.emplace_back(numVoxels);
    for (size_t n = 0; n < numVoxels; ++n) levels[0][n] = {voxels[n], voxels[n], double(voxels[n]), true};

    if (tolerance > 0.0) {
      while (true) {
        const vec3i pd = levelDims.back();
        const vec3i d(pd.x / 2, pd.y / 2, pd.z / 2);
        if (d.x == 0 || d.y == 0 || d.z == 0) break;
        std::vector<Block> blocks(size_t(d.x) * size_t(d.y) * size_t(d.z));
        bool any = false;
        const auto &prev = levels.back();
        for (int z = 0; z < d.z; ++z)
          for (int y = 0; y < d.y; ++y)
            for (int x = 0; x < d.x; ++x) {
              Block b{std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity(), 0.0, true};
              for (int c = 0; c < 8; ++c) {
                const int cx = 2 * x + (c & 1), cy = 2 * y + ((c >> 1) & 1), cz = 2 * z + ((c >> 2) & 1);
                const Block &child = prev[size_t(cx) + size_t(pd.x) * (size_t(cy) + size_t(pd.y) * size_t(cz))];
                b.lo = std::min(b.lo, child.lo);
                b.hi = std::max(b.hi, child.hi);
                b.sum += child.sum;
                b.merged = b.merged && child.merged;
              }
              b.merged = b.merged && double(b.hi) - double(b.lo) <= tolerance;
              any = any || b.merged;
              blocks[size_t(x) + size_t(d.x) * (size_t(y) + size_t(d.y) * size_t(z))] = b;
            }
        if (!any) break;
        levels.push_back(std::move(blocks));
        levelDims.push_back(d);
      }
    }

    CellSet out(std::vector<std::string>{std::move(fieldName)});
    const int top = int(levels.size()) - 1;
    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x) {
          // coarsest merged block containing this voxel
          int level = 0;
          for (int l = top; l > 0; --l) {
            const vec3i d = levelDims[size_t(l)];
            const int bx = x >> l, by = y >> l, bz = z >> l;
            if (bx >= d.x || by >= d.y || bz >= d.z) continue;
            if (levels[size_t(l)][size_t(bx) + size_t(d.x) * (size_t(by) + size_t(d.y) * size_t(bz))].merged) {
              level = l;
              break;
            }
          }
          const int w = 1 << level;
          if (x % w || y % w || z % w) continue;
          const vec3i d = levelDims[size_t(level)];
          const size_t idx = size_t(x >> level) + size_t(d.x) * (size_t(y >> level) + size_t(d.y) * size_t(z >> level));
          const double count = double(int64_t(w) * w * w);
          out.add({x, y, z, level}, float(levels[size_t(level)][idx].sum / count));
        }
    return out;
  }

} // ::exa::io
