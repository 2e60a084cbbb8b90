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

#include "exa/regions.hpp"
#include "exa/transfer_function.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <optional>

namespace exa {

  /// Binary BVH over a set of disjoint boxes (regions or bricks). Only the
  /// active boxes are inserted; anything filtered out at build time is
  /// never seen by a query.
  class RegionBvh {
  public:
    /// Node bounds are stored in single precision, rounded outward, so a
    /// node always encloses its items; item boxes stay exact.
    struct Node {
      float lo[3], hi[3];
      uint32_t first = 0; // leaf: first entry in `items`; inner: left child (right = first+1)
      uint32_t count = 0; // > 0 for leaves

      Box3 bounds() const { return {vec3d(lo[0], lo[1], lo[2]), vec3d(hi[0], hi[1], hi[2])}; }
    };

    static constexpr uint32_t kMaxLeafSize = 4;

    RegionBvh() : version_(nextVersion()) {}

    /// `boxes` indexed by item id; only ids with active[id] are inserted
    RegionBvh(const std::vector<Box3> &boxes, const std::vector<bool> &active)
      : version_(nextVersion())
    {
      const auto t0 = std::chrono::steady_clock::now();
      boxes_ = boxes;
      for (uint32_t id = 0; id < boxes.size(); ++id)
        if (active[id] && !boxes[id].empty()) items_.push_back(id);
      if (!items_.empty()) {
        nodes_.reserve(2 * items_.size());
        nodes_.emplace_back();
        build(0, 0, uint32_t(items_.size()));
      }
      itemBoxes_.reserve(items_.size());
      for (uint32_t id : items_) itemBoxes_.push_back(boxes_[id]);
      buildMs_ = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }

    bool empty() const { return items_.empty(); }
    size_t numItems() const { return items_.size(); }
    const std::vector<uint32_t> &items() const { return items_; }
    const std::vector<Node> &nodes() const { return nodes_; }
    const Box3 &box(uint32_t id) const { return boxes_[id]; }
    double buildMs() const { return buildMs_; }
    /// unique per constructed BVH; lets callers check whether a structure was rebuilt
    uint64_t version() const { return version_; }

    struct Hit {
      uint32_t id;
      double t_in, t_out;
    };

    /// Closest box along the ray that still has extent beyond `t_start`.
    ///
    /// Boxes whose overlap with the ray ends within a restart epsilon of
    /// `t_start` are ignored, so passing the previous hit's t_out yields
    /// the next box with abutting, non-overlapping intervals.
    std::optional<Hit> closestHit(const Ray &ray, double t_start, double t_max) const
    {
      if (items_.empty() || !(t_start < t_max)) return std::nullopt;
      const double eps = std::max(1e-7, 1e-7 * std::abs(t_start));
      const double t_min_exit = t_start + eps;
      const RaySetup rs(ray);

      struct Entry {
        uint32_t node;
        double t;
      };
      Entry stack[64];
      int sp = 0;
      double in, out;
      if (!rs.node(nodes_[0], t_start, t_max, in, out) || !(out > t_min_exit)) return std::nullopt;
      stack[sp++] = {0, in};

      bool found = false;
      Hit best{0, 0.0, 0.0};
      while (sp > 0) {
        const Entry e = stack[--sp];
        if (found && e.t >= best.t_in) continue;
        const Node &node = nodes_[e.node];
        if (node.count > 0) {
          for (uint32_t n = node.first; n < node.first + node.count; ++n) {
            double t0, t1;
            if (!rs.item(itemBoxes_[n], t0, t1)) continue;
            in = std::max(t0, t_start);
            out = std::min(t1, t_max);
            if (!(out > t_min_exit) || !(out > in)) continue;
            const uint32_t id = items_[n];
            if (!found || in < best.t_in || (in == best.t_in && id < best.id)) {
              best = Hit{id, in, out};
              found = true;
            }
          }
          continue;
        }
        // push the far child first so the near one is processed next
        const uint32_t l = node.first, r = node.first + 1;
        double lt = 0.0, rt = 0.0;
        const bool lh = rs.node(nodes_[l], t_start, t_max, lt, out) && out > t_min_exit;
        const bool rh = rs.node(nodes_[r], t_start, t_max, rt, out) && out > t_min_exit;
        if (lh && rh) {
          if (lt <= rt) { stack[sp++] = {r, rt}; stack[sp++] = {l, lt}; }
          else          { stack[sp++] = {l, lt}; stack[sp++] = {r, rt}; }
        } else if (lh) {
          stack[sp++] = {l, lt};
        } else if (rh) {
          stack[sp++] = {r, rt};
        }
      }
      if (!found) return std::nullopt;
      return best;
    }

    /// Item whose box contains p under the half-open [lo,hi) rule.
    std::optional<uint32_t> pointQuery(const vec3d &p) const
    {
      if (items_.empty()) return std::nullopt;
      uint32_t stack[64];
      int sp = 0;
      stack[sp++] = 0;
      while (sp > 0) {
        const Node &node = nodes_[stack[--sp]];
        if (!(p.x >= node.lo[0] && p.x <= node.hi[0] && p.y >= node.lo[1] && p.y <= node.hi[1]
              && p.z >= node.lo[2] && p.z <= node.hi[2]))
          continue;
        if (node.count > 0) {
          for (uint32_t n = node.first; n < node.first + node.count; ++n)
            if (itemBoxes_[n].contains_half_open(p)) return items_[n];
          continue;
        }
        stack[sp++] = node.first + 1;
        stack[sp++] = node.first;
      }
      return std::nullopt;
    }

  private:
    static uint64_t nextVersion()
    {
      static std::atomic<uint64_t> counter{0};
      return ++counter;
    }

    /// Per-ray slab test state. Axes with zero direction are tested by
    /// origin containment, half-open for items so a ray lying exactly in a
    /// shared face belongs to one box only.
    struct RaySetup {
      vec3d org, inv;
      bool axisParallel;

      explicit RaySetup(const Ray &ray)
        : org(ray.origin), inv(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z),
          axisParallel(ray.direction.x == 0.0 || ray.direction.y == 0.0 || ray.direction.z == 0.0) {}

      bool slabs(const double lo[3], const double hi[3], bool halfOpen, double &t0, double &t1) const
      {
        if (!axisParallel) {
          const double ax = (lo[0] - org.x) * inv.x, bx = (hi[0] - org.x) * inv.x;
          const double ay = (lo[1] - org.y) * inv.y, by = (hi[1] - org.y) * inv.y;
          const double az = (lo[2] - org.z) * inv.z, bz = (hi[2] - org.z) * inv.z;
          t0 = std::max(std::max(std::min(ax, bx), std::min(ay, by)), std::min(az, bz));
          t1 = std::min(std::min(std::max(ax, bx), std::max(ay, by)), std::max(az, bz));
          return t0 <= t1;
        }
        t0 = -std::numeric_limits<double>::infinity();
        t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
          const double o = org[a];
          if (std::isinf(inv[a])) {
            if (o < lo[a] || (halfOpen ? o >= hi[a] : o > hi[a])) return false;
            continue;
          }
          double ta = (lo[a] - o) * inv[a];
          double tb = (hi[a] - o) * inv[a];
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
        }
        return t0 <= t1;
      }

      bool item(const Box3 &b, double &t0, double &t1) const
      {
        const double lo[3] = {b.lo.x, b.lo.y, b.lo.z}, hi[3] = {b.hi.x, b.hi.y, b.hi.z};
        return slabs(lo, hi, true, t0, t1);
      }

      /// clipped overlap [in, out] of a node with [t_start, t_max]
      bool node(const Node &n, double t_start, double t_max, double &in, double &out) const
      {
        const double lo[3] = {n.lo[0], n.lo[1], n.lo[2]}, hi[3] = {n.hi[0], n.hi[1], n.hi[2]};
        double t0, t1;
        if (!slabs(lo, hi, false, t0, t1)) return false;
        in = std::max(t0, t_start);
        out = std::min(t1, t_max);
        return out > in;
      }
    };

    static float round_down(double v)
    {
      float f = float(v);
      return double(f) > v ? std::nextafter(f, -std::numeric_limits<float>::infinity()) : f;
    }
    static float round_up(double v)
    {
      float f = float(v);
      return double(f) < v ? std::nextafter(f, std::numeric_limits<float>::infinity()) : f;
    }

    void build(uint32_t nodeIndex, uint32_t begin, uint32_t end)
    {
      Box3 bounds, centroids;
      for (uint32_t n = begin; n < end; ++n) {
        bounds.extend(boxes_[items_[n]]);
        centroids.extend(boxes_[items_[n]].center());
      }
      for (int a = 0; a < 3; ++a) {
        nodes_[nodeIndex].lo[a] = round_down(bounds.lo[a]);
        nodes_[nodeIndex].hi[a] = round_up(bounds.hi[a]);
      }
      if (end - begin <= kMaxLeafSize) {
        nodes_[nodeIndex].first = begin;
        nodes_[nodeIndex].count = end - begin;
        return;
      }
      const vec3d ext = centroids.size();
      int axis = 0;
      if (ext.y > ext[axis]) axis = 1;
      if (ext.z > ext[axis]) axis = 2;

      const uint32_t mid = begin + (end - begin) / 2;
      std::nth_element(items_.begin() + begin, items_.begin() + mid, items_.begin() + end,
                       [&](uint32_t a, uint32_t b) {
                         const double ca = boxes_[a].center()[axis], cb = boxes_[b].center()[axis];
                         return ca < cb || (ca == cb && a < b);
                       });
      const uint32_t left = uint32_t(nodes_.size());
      nodes_.emplace_back();
      nodes_.emplace_back();
      nodes_[nodeIndex].first = left;
      nodes_[nodeIndex].count = 0;
      build(left, begin, mid);
      build(left + 1, mid, end);
    }

    std::vector<Box3> boxes_;
    std::vector<uint32_t> items_;
    std::vector<Box3> itemBoxes_; // boxes_ in items_ order
    std::vector<Node> nodes_;
    double buildMs_ = 0.0;
    uint64_t version_ = 0;
  };

  struct RayInterval {
    double t_in, t_out;
    uint32_t region;
  };

  inline std::vector<Box3> region_boxes(const std::vector<ActiveBrickRegion> &regions)
  {
    std::vector<Box3> boxes;
    boxes.reserve(regions.size());
    for (const auto &r : regions) boxes.push_back(r.box);
    return boxes;
  }

  /// BVH over the regions whose value range maps to a non-zero opacity.
  inline RegionBvh build_volume_bvh(const std::vector<ActiveBrickRegion> &regions, const TransferFunction &tf,
                                    size_t field = 0)
  {
    std::vector<bool> active(regions.size());
    for (size_t r = 0; r < regions.size(); ++r) {
      const ValueRange &vr = regions[r].valueRange[field];
      active[r] = tf.max_opacity(vr.lo, vr.hi) > 0.0;
    }
    return {region_boxes(regions), active};
  }

  /// BVH over every region; used for point location and as the unpruned
  /// reference structure.
  inline RegionBvh build_full_bvh(const std::vector<ActiveBrickRegion> &regions)
  {
    return {region_boxes(regions), std::vector<bool>(regions.size(), true)};
  }

  /// BVH over the regions whose value range brackets the iso-value.
  inline RegionBvh build_iso_bvh(const std::vector<ActiveBrickRegion> &regions, double isoValue, size_t field = 0)
  {
    std::vector<bool> active(regions.size());
    for (size_t r = 0; r < regions.size(); ++r) {
      const ValueRange &vr = regions[r].valueRange[field];
      active[r] = double(vr.lo) <= isoValue && isoValue <= double(vr.hi);
    }
    return {region_boxes(regions), active};
  }

  /// Next region along the ray after `t_start` (pass the previous t_out),
  /// clipped to [t_start, t_max].
  inline std::optional<RayInterval> next_region(const RegionBvh &bvh, const Ray &ray, double t_start, double t_max)
  {
    if (auto hit = bvh.closestHit(ray, t_start, t_max)) return RayInterval{hit->t_in, hit->t_out, hit->id};
    return std::nullopt;
  }

  inline std::optional<uint32_t> point_query(const RegionBvh &bvh, const vec3d &p) { return bvh.pointQuery(p); }

} // ::exa
