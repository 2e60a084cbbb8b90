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

#include <array>

namespace exa {

  struct ValueRange {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();

    bool empty() const { return lo > hi; }
    void extend(float v)
    {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    friend bool operator==(const ValueRange &, const ValueRange &) = default;
  };

  /// One box of the disjoint decomposition of the union of brick supports,
  /// with every brick whose support covers it.
  struct ActiveBrickRegion {
    Box3 box;
    std::vector<uint32_t> brickIds;     // ascending
    std::vector<ValueRange> valueRange; // per field
    double finestCellWidth = 0.0;

    friend bool operator==(const ActiveBrickRegion &, const ActiveBrickRegion &) = default;
  };

  struct SupportFragment {
    Box3 box;
    uint32_t brickId = 0;
  };

  namespace detail {

    class RegionBuilder {
    public:
      explicit RegionBuilder(const AmrModel &model) : model(model) {}

      std::vector<ActiveBrickRegion> run()
      {
        std::vector<SupportFragment> fragments;
        fragments.reserve(model.bricks.size());
        Box3 bounds;
        for (uint32_t b = 0; b < model.bricks.size(); ++b) {
          fragments.push_back({brick_support(model.bricks[b]), b});
          bounds.extend(fragments.back().box);
        }
        if (!fragments.empty()) split(bounds, std::move(fragments));
        for (auto &r : regions) computeMetadata(r);
        return std::move(regions);
      }

    private:
      void split(const Box3 &region, std::vector<SupportFragment> fragments)
      {
        if (fragments.empty()) return;

        const vec3d size = region.size();
        std::array<int, 3> axes{0, 1, 2};
        std::stable_sort(axes.begin(), axes.end(), [&](int a, int b) { return size[a] > size[b]; });

        const vec3d center = region.center();
        for (int axis : axes) {
          const double lo = region.lo[axis], hi = region.hi[axis];
          double best = 0.0, bestDist = std::numeric_limits<double>::infinity();
          for (const auto &f : fragments)
            for (double plane : {f.box.lo[axis], f.box.hi[axis]}) {
              if (plane <= lo || plane >= hi) continue;
              const double d = std::abs(plane - center[axis]);
              if (d < bestDist || (d == bestDist && plane < best)) {
                bestDist = d;
                best = plane;
              }
            }
          if (bestDist == std::numeric_limits<double>::infinity()) continue;

          Box3 left = region, right = region;
          left.hi[axis] = best;
          right.lo[axis] = best;
          std::vector<SupportFragment> lf, rf;
          for (const auto &f : fragments) {
            if (f.box.lo[axis] < best) lf.push_back({intersection(f.box, left), f.brickId});
            if (f.box.hi[axis] > best) rf.push_back({intersection(f.box, right), f.brickId});
          }
          fragments.clear();
          fragments.shrink_to_fit();
          split(left, std::move(lf));
          split(right, std::move(rf));
          return;
        }

        // no support boundary crosses this box: every fragment covers it completely
        ActiveBrickRegion r;
        r.box = region;
        r.brickIds.reserve(fragments.size());
        for (const auto &f : fragments) r.brickIds.push_back(f.brickId);
        std::sort(r.brickIds.begin(), r.brickIds.end());
        r.brickIds.erase(std::unique(r.brickIds.begin(), r.brickIds.end()), r.brickIds.end());
        regions.push_back(std::move(r));
      }

      /// indices [first,last] of cells along one axis whose support overlaps (lo,hi)
      static std::pair<int, int> overlappingCells(double brickLower, double w, int dim, double lo, double hi)
      {
        int first = std::max(0, int(std::floor((lo - brickLower) / w - 1.5)));
        int last = std::min(dim - 1, int(std::ceil((hi - brickLower) / w + 0.5)));
        auto overlaps = [&](int n) {
          const double sLo = brickLower + (n - 0.5) * w;
          const double sHi = brickLower + (n + 1.5) * w;
          return sLo < hi && sHi > lo;
        };
        while (first <= last && !overlaps(first)) ++first;
        while (last >= first && !overlaps(last)) --last;
        return {first, last};
      }

      void computeMetadata(ActiveBrickRegion &r) const
      {
        r.valueRange.assign(model.numFields(), ValueRange{});
        r.finestCellWidth = std::numeric_limits<double>::infinity();
        for (uint32_t id : r.brickIds) {
          const Brick &b = model.bricks[id];
          const double w = double(b.width());
          r.finestCellWidth = std::min(r.finestCellWidth, w);
          const auto [x0, x1] = overlappingCells(b.lower.x, w, b.dims.x, r.box.lo.x, r.box.hi.x);
          const auto [y0, y1] = overlappingCells(b.lower.y, w, b.dims.y, r.box.lo.y, r.box.hi.y);
          const auto [z0, z1] = overlappingCells(b.lower.z, w, b.dims.z, r.box.lo.z, r.box.hi.z);
          for (size_t f = 0; f < model.numFields(); ++f)
            for (int z = z0; z <= z1; ++z)
              for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) r.valueRange[f].extend(model.value(f, b, x, y, z));
        }
      }

      const AmrModel &model;
      std::vector<ActiveBrickRegion> regions;
    };

  } // ::exa::detail

  /// Computes the Active Brick Regions of a bricked model by recursive
  /// top-down partitioning of the brick support fragments. Regions are
  /// disjoint (shared faces allowed) and exactly cover the support union.
  inline std::vector<ActiveBrickRegion> build_regions(const AmrModel &model)
  {
    return detail::RegionBuilder(model).run();
  }

  struct RegionStats {
    uint64_t numRegions = 0;
    double avgBricksByCount = 0.0;
    double avgBricksByVolume = 0.0;
    uint64_t maxBricks = 0;
    double totalVolume = 0.0;
  };

  inline RegionStats region_stats(const std::vector<ActiveBrickRegion> &regions)
  {
    RegionStats s;
    s.numRegions = regions.size();
    if (regions.empty()) return s;
    double count = 0.0, weighted = 0.0;
    for (const auto &r : regions) {
      const double n = double(r.brickIds.size());
      const double v = r.box.volume();
      count += n;
      weighted += n * v;
      s.totalVolume += v;
      s.maxBricks = std::max<uint64_t>(s.maxBricks, r.brickIds.size());
    }
    s.avgBricksByCount = count / double(regions.size());
    s.avgBricksByVolume = s.totalVolume > 0.0 ? weighted / s.totalVolume : 0.0;
    return s;
  }

} // ::exa
