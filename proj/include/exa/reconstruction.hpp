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

#include "exa/brick_builder.hpp"
#include "exa/bvh.hpp"
#include "exa/regions.hpp"

#include <span>

namespace exa {

  /// samples whose total hat weight is at or below this are invalid
  inline constexpr double kWeightEpsilon = 1e-12;

  struct SampleResult {
    double value = 0.0;
    double weightSum = 0.0;
    bool valid = false;
  };

  struct GradientResult {
    vec3d gradient{0.0};
    bool valid = false;
  };

  struct SampleWithGradient {
    SampleResult sample;
    GradientResult gradient;
  };

  inline double hat(double x) { return std::max(1.0 - x, 0.0); }

  /// one axis of the hat basis; `center` and `width` are the cell's
  inline double hat_axis(double center, double p, double width) { return hat(std::abs(center - p) / width); }

  /// hat_axis with a precomputed 1/width; identical results for the
  /// power-of-two widths of AMR cells
  inline double hat_axis_inv(double center, double p, double invWidth) { return hat(std::abs(center - p) * invWidth); }

  /// Hat basis weight of a cell at p: product of the per-axis hats
  /// h(|center - p| / width), with h(x) = max(1 - x, 0).
  inline double hat_weight(const LevelCoord &cell, const vec3d &p)
  {
    const vec3d c = cell_center(cell);
    const double inv = 1.0 / double(cell.width());
    return hat_axis_inv(c.x, p.x, inv) * hat_axis_inv(c.y, p.y, inv) * hat_axis_inv(c.z, p.z, inv);
  }

  /// Running sums of the basis method. Everything the analytic gradient
  /// needs is gathered in the same pass as the value.
  struct BasisAccumulator {
    double sumW = 0.0;
    double sumWV = 0.0;
    vec3d sumDW{0.0};
    vec3d sumDWV{0.0};

    SampleResult sample() const
    {
      SampleResult s;
      s.weightSum = sumW;
      s.valid = sumW > kWeightEpsilon;
      s.value = s.valid ? sumWV / sumW : 0.0;
      return s;
    }

    /// quotient rule applied to sumWV / sumW
    GradientResult gradient() const
    {
      GradientResult g;
      if (!(sumW > kWeightEpsilon)) return g;
      const double inv = 1.0 / (sumW * sumW);
      g.gradient = vec3d((sumW * sumDWV.x - sumWV * sumDW.x) * inv,
                         (sumW * sumDWV.y - sumWV * sumDW.y) * inv,
                         (sumW * sumDWV.z - sumWV * sumDW.z) * inv);
      g.valid = true;
      return g;
    }
  };

  namespace detail {

    struct AxisTaps {
      int index[4];
      double h[4];
      double dh[4];
      int count = 0;
    };

    /// Cells of one brick row whose hat is non-zero at coordinate p. At most
    /// two lattice neighbors qualify; scanning one extra on each side keeps
    /// the set identical to an exhaustive scan under floating-point rounding.
    inline void axis_taps(double p, double lower, double w, int dim, AxisTaps &taps)
    {
      const double inv = 1.0 / w;
      const double local = (p - lower) * inv - 0.5;
      const int f = int(std::floor(local));
      taps.count = 0;
      for (int n = std::max(f - 1, 0); n <= std::min(f + 2, dim - 1); ++n) {
        const double c = lower + (double(n) + 0.5) * w;
        const double h = hat_axis_inv(c, p, inv);
        if (h > 0.0) {
          taps.index[taps.count] = n;
          taps.h[taps.count] = h;
          // derivative of the hat wrt p; the branch c - p >= 0 also covers the kink
          taps.dh[taps.count] = c - p >= 0.0 ? inv : -inv;
          ++taps.count;
        }
      }
    }

  } // ::exa::detail

  /// Adds the contributions of one brick's cells at p, in x-fastest order.
  template <bool kGradient>
  inline void accumulate_brick(const AmrModel &model, size_t field, uint32_t brickId, const vec3d &p,
                               BasisAccumulator &acc)
  {
    const Brick &b = model.bricks[brickId];
    const double w = double(b.width());
    detail::AxisTaps tx, ty, tz;
    detail::axis_taps(p.x, double(b.lower.x), w, b.dims.x, tx);
    if (tx.count == 0) return;
    detail::axis_taps(p.y, double(b.lower.y), w, b.dims.y, ty);
    if (ty.count == 0) return;
    detail::axis_taps(p.z, double(b.lower.z), w, b.dims.z, tz);
    const float *scalars = model.scalars[field].data() + b.begin;
    for (int iz = 0; iz < tz.count; ++iz)
      for (int iy = 0; iy < ty.count; ++iy)
        for (int ix = 0; ix < tx.count; ++ix) {
          const double weight = tx.h[ix] * ty.h[iy] * tz.h[iz];
          if (weight == 0.0) continue;
          const double v = double(scalars[b.linearIndex(tx.index[ix], ty.index[iy], tz.index[iz])]);
          acc.sumW += weight;
          acc.sumWV += weight * v;
          if constexpr (kGradient) {
            const vec3d dw(tx.dh[ix] * ty.h[iy] * tz.h[iz],
                           tx.h[ix] * ty.dh[iy] * tz.h[iz],
                           tx.h[ix] * ty.h[iy] * tz.dh[iz]);
            acc.sumDW += dw;
            acc.sumDWV += dw * v;
          }
        }
  }

  template <bool kGradient = false>
  inline BasisAccumulator accumulate_bricks(const AmrModel &model, size_t field, std::span<const uint32_t> brickIds,
                                            const vec3d &p)
  {
    BasisAccumulator acc;
    for (uint32_t id : brickIds) accumulate_brick<kGradient>(model, field, id, p, acc);
    return acc;
  }

  /// Basis-method sample using only the bricks listed by the region that
  /// contains p. Requires p inside region.box.
  inline SampleResult basis_sample_region(const vec3d &p, const ActiveBrickRegion &region, const AmrModel &model,
                                          size_t field = 0)
  {
    return accumulate_bricks<false>(model, field, region.brickIds, p).sample();
  }

  inline SampleWithGradient basis_sample_region_with_gradient(const vec3d &p, const ActiveBrickRegion &region,
                                                              const AmrModel &model, size_t field = 0)
  {
    const BasisAccumulator acc = accumulate_bricks<true>(model, field, region.brickIds, p);
    return {acc.sample(), acc.gradient()};
  }

  /// Analytic gradient of the basis reconstruction, from the same cells and
  /// weights as the sample itself.
  inline GradientResult gradient_analytic(const vec3d &p, const ActiveBrickRegion &region, const AmrModel &model,
                                          size_t field = 0)
  {
    return accumulate_bricks<true>(model, field, region.brickIds, p).gradient();
  }

  /// Reference basis sample: scans every cell of every brick (bricks
  /// ascending, cells x-fastest). Bricks whose support does not contain p
  /// are skipped as all their weights are zero.
  inline SampleResult basis_sample_oracle(const vec3d &p, const AmrModel &model, size_t field = 0)
  {
    BasisAccumulator acc;
    for (const Brick &b : model.bricks) {
      if (!brick_support(b).contains(p)) continue;
      for (int z = 0; z < b.dims.z; ++z)
        for (int y = 0; y < b.dims.y; ++y)
          for (int x = 0; x < b.dims.x; ++x) {
            const double weight = hat_weight(b.cellCoord(x, y, z), p);
            if (weight == 0.0) continue;
            const double v = double(model.value(field, b, x, y, z));
            acc.sumW += weight;
            acc.sumWV += weight * v;
          }
    }
    return acc.sample();
  }

  /// Finds every brick whose support contains p by traversing the bricking
  /// k-d tree, i.e. a per-sample cell-location query. `out` is sorted.
  inline void locate_bricks(const BrickKdTree &tree, const vec3d &p, std::vector<uint32_t> &out)
  {
    out.clear();
    if (tree.empty()) return;
    uint32_t stack[256];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const BrickKdTree::Node &node = tree.nodes[stack[--sp]];
      if (!node.support.contains(p)) continue;
      if (node.isLeaf()) {
        out.push_back(node.brickId);
        continue;
      }
      stack[sp++] = node.child[1];
      stack[sp++] = node.child[0];
    }
    std::sort(out.begin(), out.end());
  }

  /// Same result as basis_sample_region, but the contributing bricks come
  /// from a k-d tree traversal per sample instead of the region's list.
  template <bool kGradient = false>
  inline BasisAccumulator accumulate_celllocation(const vec3d &p, const BrickKdTree &tree, const AmrModel &model,
                                                  size_t field = 0)
  {
    thread_local std::vector<uint32_t> found;
    locate_bricks(tree, p, found);
    return accumulate_bricks<kGradient>(model, field, found, p);
  }

  inline SampleResult basis_sample_celllocation(const vec3d &p, const BrickKdTree &tree, const AmrModel &model,
                                                size_t field = 0)
  {
    return accumulate_celllocation<false>(p, tree, model, field).sample();
  }

  inline RegionBvh build_brick_bvh(const AmrModel &model, const std::vector<bool> &active)
  {
    std::vector<Box3> boxes;
    boxes.reserve(model.bricks.size());
    for (const Brick &b : model.bricks) boxes.push_back(b.bounds());
    return {boxes, active};
  }

  inline RegionBvh build_brick_bvh(const AmrModel &model)
  {
    return build_brick_bvh(model, std::vector<bool>(model.bricks.size(), true));
  }

  /// value of the cell of brick `brickId` containing p; p must lie in the brick box
  inline SampleResult nearest_sample_in_brick(const vec3d &p, uint32_t brickId, const AmrModel &model,
                                              size_t field = 0)
  {
    const Brick &b = model.bricks[brickId];
    const double w = double(b.width());
    const int x = std::clamp(int(std::floor((p.x - b.lower.x) / w)), 0, b.dims.x - 1);
    const int y = std::clamp(int(std::floor((p.y - b.lower.y) / w)), 0, b.dims.y - 1);
    const int z = std::clamp(int(std::floor((p.z - b.lower.z) / w)), 0, b.dims.z - 1);
    return {double(model.value(field, b, x, y, z)), 1.0, true};
  }

  /// Nearest-neighbor reconstruction: the value of the cell containing p,
  /// found through a BVH over brick boxes. Holes yield an invalid sample.
  inline SampleResult nearest_sample(const vec3d &p, const RegionBvh &brickBvh, const AmrModel &model,
                                     size_t field = 0)
  {
    const auto brick = brickBvh.pointQuery(p);
    if (!brick) return {};
    return nearest_sample_in_brick(p, *brick, model, field);
  }

  /// Central differences with offsets of offsetScale x the finest cell width
  /// of p's region. Offset positions are located through `locator` (a BVH
  /// over all regions); offsets outside the data fall back to one-sided
  /// differences.
  inline GradientResult gradient_central(const vec3d &p, const RegionBvh &locator,
                                         const std::vector<ActiveBrickRegion> &regions, const AmrModel &model,
                                         size_t field = 0, double offsetScale = 0.5)
  {
    GradientResult g;
    const auto home = locator.pointQuery(p);
    if (!home) return g;
    const SampleResult center = basis_sample_region(p, regions[*home], model, field);
    const double h = offsetScale * regions[*home].finestCellWidth;
    auto sampleAt = [&](const vec3d &q) -> SampleResult {
      const auto r = locator.pointQuery(q);
      if (!r) return {};
      return basis_sample_region(q, regions[*r], model, field);
    };
    for (int a = 0; a < 3; ++a) {
      vec3d pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      const SampleResult sp = sampleAt(pp), sm = sampleAt(pm);
      if (sp.valid && sm.valid) g.gradient[a] = (sp.value - sm.value) / (2.0 * h);
      else if (sp.valid && center.valid) g.gradient[a] = (sp.value - center.value) / h;
      else if (sm.valid && center.valid) g.gradient[a] = (center.value - sm.value) / h;
    }
    g.valid = center.valid;
    return g;
  }

  /// Central differences with the offset positions clamped into the
  /// current region, so no lookup outside the region is needed. The
  /// divisor is the actual distance between the two evaluated points.
  inline GradientResult gradient_central_clamped(const vec3d &p, const ActiveBrickRegion &region,
                                                 const AmrModel &model, size_t field = 0, double offsetScale = 0.5)
  {
    GradientResult g;
    const SampleResult center = basis_sample_region(p, region, model, field);
    const double h = offsetScale * region.finestCellWidth;
    for (int a = 0; a < 3; ++a) {
      vec3d pp = p, pm = p;
      pp[a] = std::min(p[a] + h, region.box.hi[a]);
      pm[a] = std::max(p[a] - h, region.box.lo[a]);
      SampleResult sp = basis_sample_region(pp, region, model, field);
      SampleResult sm = basis_sample_region(pm, region, model, field);
      if (!sp.valid) { sp = center; pp[a] = p[a]; }
      if (!sm.valid) { sm = center; pm[a] = p[a]; }
      const double d = pp[a] - pm[a];
      if (d > 0.0 && sp.valid && sm.valid) g.gradient[a] = (sp.value - sm.value) / d;
    }
    g.valid = center.valid;
    return g;
  }

} // ::exa
