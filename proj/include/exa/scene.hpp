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

#include "exa/reconstruction.hpp"

#include <memory>

namespace exa {

  /// Everything derived from the data alone; shared by all scene snapshots.
  struct SceneData {
    AmrModel model;
    std::vector<ActiveBrickRegion> regions;
    std::optional<BrickKdTree> kdTree;
    RegionBvh locator;                              // all regions
    std::vector<std::vector<ValueRange>> brickRanges; // [field][brick]
    Box3 supportBounds;

    SceneData(AmrModel m, std::vector<ActiveBrickRegion> r, std::optional<BrickKdTree> tree = std::nullopt)
      : model(std::move(m)), regions(std::move(r)), kdTree(std::move(tree)), locator(build_full_bvh(regions))
    {
      brickRanges.assign(model.numFields(), std::vector<ValueRange>(model.bricks.size()));
      for (size_t f = 0; f < model.numFields(); ++f)
        for (size_t b = 0; b < model.bricks.size(); ++b) {
          const Brick &brick = model.bricks[b];
          const float *s = model.scalars[f].data() + brick.begin;
          for (int64_t n = 0; n < brick.numCells(); ++n) brickRanges[f][b].extend(s[n]);
        }
      for (const auto &r : regions) supportBounds.extend(r.box);
    }
  };

  /// Immutable bundle of data, transfer function, iso setting and the
  /// acceleration structures that depend on them. Edits produce a new
  /// Scene; unchanged structures are shared.
  struct Scene {
    std::shared_ptr<const SceneData> data;
    size_t field = 0;
    TransferFunction tf;
    std::shared_ptr<const RegionBvh> volumeBvh;
    std::shared_ptr<const RegionBvh> brickBvh; // nearest-neighbor traversal, same tf pruning
    std::optional<double> iso;
    std::shared_ptr<const RegionBvh> isoBvh;
    /// time spent on the BVH rebuilds that produced this snapshot
    double rebuildMs = 0.0;

    const AmrModel &model() const { return data->model; }
    const std::vector<ActiveBrickRegion> &regions() const { return data->regions; }

    static std::shared_ptr<const Scene> create(std::shared_ptr<const SceneData> data, const TransferFunction &tf,
                                               std::optional<double> iso = std::nullopt, size_t field = 0,
                                               bool pruneVolume = true)
    {
      if (field >= data->model.numFields()) throw std::out_of_range("field index out of range");
      auto s = std::make_shared<Scene>();
      s->data = std::move(data);
      s->field = field;
      s->rebuildVolume(tf, pruneVolume);
      s->rebuildIso(iso);
      return s;
    }

    /// New snapshot with the given edits applied; structures an edit does
    /// not touch are shared with this one.
    std::shared_ptr<const Scene> with_edits(const std::optional<TransferFunction> &newTf,
                                            const std::optional<std::optional<double>> &newIso) const
    {
      auto s = std::make_shared<Scene>(*this);
      s->rebuildMs = 0.0;
      if (newTf) s->rebuildVolume(*newTf, true);
      if (newIso) s->rebuildIso(*newIso);
      return s;
    }

    std::shared_ptr<const Scene> with_transfer_function(const TransferFunction &newTf) const
    {
      return with_edits(newTf, std::nullopt);
    }

    std::shared_ptr<const Scene> with_iso(std::optional<double> newIso) const
    {
      return with_edits(std::nullopt, std::optional<std::optional<double>>(newIso));
    }

  private:
    void rebuildVolume(const TransferFunction &newTf, bool prune)
    {
      tf = newTf;
      if (prune) {
        volumeBvh = std::make_shared<RegionBvh>(build_volume_bvh(data->regions, tf, field));
      } else {
        volumeBvh = std::make_shared<RegionBvh>(build_full_bvh(data->regions));
      }
      std::vector<bool> active(data->model.bricks.size(), true);
      if (prune)
        for (size_t b = 0; b < active.size(); ++b) {
          const ValueRange &vr = data->brickRanges[field][b];
          active[b] = tf.max_opacity(vr.lo, vr.hi) > 0.0;
        }
      brickBvh = std::make_shared<RegionBvh>(build_brick_bvh(data->model, active));
      rebuildMs += volumeBvh->buildMs() + brickBvh->buildMs();
    }

    void rebuildIso(std::optional<double> newIso)
    {
      iso = newIso;
      if (iso) {
        isoBvh = std::make_shared<RegionBvh>(build_iso_bvh(data->regions, *iso, field));
        rebuildMs += isoBvh->buildMs();
      } else {
        isoBvh.reset();
      }
    }
  };

  /// Bricks the cells, builds the regions and wraps everything for rendering.
  inline std::shared_ptr<const SceneData> make_scene_data(const CellSet &cells, const BrickBuildParams &params = {})
  {
    BrickBuildResult built = build_bricks(cells, params);
    auto regions = build_regions(built.model);
    return std::make_shared<const SceneData>(std::move(built.model), std::move(regions), std::move(built.kdTree));
  }

} // ::exa
