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

#include <map>
#include <numeric>
#include <optional>

namespace exa {

  struct BrickBuildParams {
    int maxBrickWidth = 32;
    /// keep the split-plane tree (only needed for the cell-location path)
    bool keepKdTree = false;
  };

  /// The k-d tree of split planes produced while bricking. Every node also
  /// records the union of the supports of the bricks below it, which is
  /// what a basis-method cell-location query needs to prune on.
  struct BrickKdTree {
    struct Node {
      int32_t axis = -1;        // -1 for leaves
      int64_t split = 0;        // world units, multiple of the node's coarsest cell width
      uint32_t child[2] = {0, 0};
      uint32_t brickId = 0;     // leaves only
      Box3 support;

      bool isLeaf() const { return axis < 0; }
    };
    std::vector<Node> nodes; // nodes[0] is the root

    bool empty() const { return nodes.empty(); }
  };

  struct BrickBuildResult {
    AmrModel model;
    std::optional<BrickKdTree> kdTree;
  };

  namespace detail {

    class BrickBuilder {
    public:
      BrickBuilder(const CellSet &cells, const BrickBuildParams &params)
        : cells(cells), params(params) {}

      BrickBuildResult run()
      {
        BrickBuildResult result;
        AmrModel &model = result.model;
        model.fieldNames = cells.fieldNames;
        model.scalars.assign(cells.numFields(), {});
        for (auto &s : model.scalars) s.resize(cells.size());
        model.cellCount = cells.size();
        out = &model;

        // canonical (l,k,j,i) order makes the output independent of input order
        order.resize(cells.size());
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
          const LevelCoord &ca = cells.coords[a], &cb = cells.coords[b];
          if (ca.level != cb.level) return ca.level < cb.level;
          if (ca.k != cb.k) return ca.k < cb.k;
          if (ca.j != cb.j) return ca.j < cb.j;
          return ca.i < cb.i;
        });

        if (!cells.empty()) {
          if (params.keepKdTree) tree.emplace();
          build(0, order.size());
        }
        for (const Brick &b : model.bricks) model.bounds.extend(b.bounds());
        result.kdTree = std::move(tree);
        return result;
      }

    private:
      struct NodeInfo {
        vec3l lo, hi;
        int32_t minLevel, maxLevel;
      };

      NodeInfo measure(size_t begin, size_t end) const
      {
        NodeInfo n{vec3l(std::numeric_limits<int64_t>::max()), vec3l(std::numeric_limits<int64_t>::min()),
                   std::numeric_limits<int32_t>::max(), std::numeric_limits<int32_t>::min()};
        for (size_t it = begin; it < end; ++it) {
          const LevelCoord &c = cells.coords[order[it]];
          const vec3l lo(c.i, c.j, c.k);
          n.lo = min(n.lo, lo);
          n.hi = max(n.hi, lo + vec3l(c.width()));
          n.minLevel = std::min(n.minLevel, c.level);
          n.maxLevel = std::max(n.maxLevel, c.level);
        }
        return n;
      }

      uint32_t newNode()
      {
        if (!tree) return 0;
        tree->nodes.emplace_back();
        return uint32_t(tree->nodes.size() - 1);
      }

      uint32_t emitBrick(size_t begin, size_t end, const vec3l &lo, const vec3i &dims, int32_t level)
      {
        Brick b;
        b.lower = vec3i(lo);
        b.level = level;
        b.dims = dims;
        b.begin = scalarCursor;
        const int64_t w = level_width(level);
        for (size_t it = begin; it < end; ++it) {
          const uint32_t ci = order[it];
          const LevelCoord &c = cells.coords[ci];
          const int64_t idx = b.linearIndex(int((c.i - lo.x) / w), int((c.j - lo.y) / w), int((c.k - lo.z) / w));
          for (size_t f = 0; f < cells.numFields(); ++f)
            out->scalars[f][b.begin + idx] = cells.values[f][ci];
        }
        scalarCursor += b.numCells();
        out->bricks.push_back(b);
        const uint32_t brickId = uint32_t(out->bricks.size() - 1);
        if (tree) {
          const uint32_t n = newNode();
          tree->nodes[n].brickId = brickId;
          tree->nodes[n].support = brick_support(b);
          return n;
        }
        return 0;
      }

      uint32_t emitPerCellLeaves(size_t begin, size_t end)
      {
        // only reached if no interior split plane exists; each cell becomes its own brick
        if (end - begin == 1) {
          const LevelCoord &c = cells.coords[order[begin]];
          return emitBrick(begin, end, vec3l(c.i, c.j, c.k), vec3i(1), c.level);
        }
        const size_t mid = begin + (end - begin) / 2;
        const uint32_t node = newNode();
        const uint32_t l = emitPerCellLeaves(begin, mid);
        const uint32_t r = emitPerCellLeaves(mid, end);
        if (tree) linkInner(node, 0, cells.coords[order[mid]].i, l, r);
        return node;
      }

      void linkInner(uint32_t node, int axis, int64_t split, uint32_t l, uint32_t r)
      {
        auto &n = tree->nodes[node];
        n.axis = axis;
        n.split = split;
        n.child[0] = l;
        n.child[1] = r;
        Box3 s = tree->nodes[l].support;
        s.extend(tree->nodes[r].support);
        n.support = s;
      }

      uint32_t build(size_t begin, size_t end)
      {
        const NodeInfo info = measure(begin, end);
        const vec3l extent = info.hi - info.lo;
        const int64_t coarsest = level_width(info.maxLevel);

        if (info.minLevel == info.maxLevel) {
          const int64_t volume = extent.x * extent.y * extent.z;
          const int64_t cellVolume = coarsest * coarsest * coarsest;
          const int64_t maxExtent = int64_t(params.maxBrickWidth) * coarsest;
          if (int64_t(end - begin) * cellVolume == volume && reduce_max(extent) <= maxExtent)
            return emitBrick(begin, end, info.lo, vec3i(extent / coarsest), info.minLevel);
        }

        // longest axis, ties resolved x, y, z
        int axis = 0;
        if (extent.y > extent[axis]) axis = 1;
        if (extent.z > extent[axis]) axis = 2;

        const int64_t lo = info.lo[axis], hi = info.hi[axis];
        int64_t split = floor_div(lo + hi + coarsest, 2 * coarsest) * coarsest;
        if (split <= lo) split = ceil_div(lo + 1, coarsest) * coarsest;
        if (split >= hi) split = floor_div(hi - 1, coarsest) * coarsest;
        if (split <= lo || split >= hi) return emitPerCellLeaves(begin, end);

        auto first = order.begin() + std::ptrdiff_t(begin);
        auto last = order.begin() + std::ptrdiff_t(end);
        auto pivot = std::stable_partition(first, last, [&](uint32_t ci) {
          const LevelCoord &c = cells.coords[ci];
          return (axis == 0 ? c.i : (axis == 1 ? c.j : c.k)) < split;
        });
        const size_t mid = size_t(pivot - order.begin());

        const uint32_t node = newNode();
        const uint32_t l = build(begin, mid);
        const uint32_t r = build(mid, end);
        if (tree) linkInner(node, axis, split, l, r);
        return node;
      }

      const CellSet &cells;
      const BrickBuildParams &params;
      std::vector<uint32_t> order;
      AmrModel *out = nullptr;
      uint64_t scalarCursor = 0;
      std::optional<BrickKdTree> tree;
    };

  } // ::exa::detail

  /// Re-organizes an unordered cell list into disjoint, hole-free bricks of
  /// same-level cells by top-down k-d partitioning. Throws
  /// InvalidCellsError if the cells do not validate.
  inline BrickBuildResult build_bricks(const CellSet &cells, const BrickBuildParams &params = {})
  {
    if (params.maxBrickWidth < 1) throw std::invalid_argument("maxBrickWidth must be >= 1");
    ValidationReport report = validate_cells(cells);
    if (!report.ok()) {
      const std::string what = "invalid cells: " + report.summary(&cells);
      throw InvalidCellsError(std::move(report), what);
    }
    return detail::BrickBuilder(cells, params).run();
  }

  struct BrickStats {
    uint64_t numCells = 0;
    uint64_t numBricks = 0;
    std::map<int32_t, uint64_t> cellsPerLevel;
    std::map<int32_t, uint64_t> bricksPerLevel;
    vec3i minDims{0}, maxDims{0};
    vec3d meanDims{0.0};
  };

  inline BrickStats brick_stats(const AmrModel &model)
  {
    BrickStats s;
    s.numBricks = model.bricks.size();
    if (model.bricks.empty()) return s;
    s.minDims = vec3i(std::numeric_limits<int32_t>::max());
    for (const Brick &b : model.bricks) {
      s.numCells += uint64_t(b.numCells());
      s.cellsPerLevel[b.level] += uint64_t(b.numCells());
      s.bricksPerLevel[b.level] += 1;
      s.minDims = min(s.minDims, b.dims);
      s.maxDims = max(s.maxDims, b.dims);
      s.meanDims += vec3d(b.dims);
    }
    s.meanDims = s.meanDims / double(model.bricks.size());
    return s;
  }

} // ::exa
