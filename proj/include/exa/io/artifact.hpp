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
#include "exa/scene.hpp"

namespace exa::io {

  // Build artifact: bricks, scalars, regions and optionally the bricking k-d tree.
  //   "EXAB" | u32 version | u32 fieldCount | names | u64 cellCount | box bounds
  //   | u64 brickCount | bricks | fieldCount x f32 scalars[cellCount]
  //   | u64 regionCount | regions | u8 hasTree | [u64 nodeCount | nodes]
  inline constexpr char kArtifactMagic[4] = {'E', 'X', 'A', 'B'};
  inline constexpr uint32_t kArtifactVersion = 1;

  namespace detail {

    inline void put_box(ByteWriter &w, const Box3 &b)
    {
      for (int a = 0; a < 3; ++a) w.put<double>(b.lo[a]);
      for (int a = 0; a < 3; ++a) w.put<double>(b.hi[a]);
    }

    inline Box3 get_box(ByteReader &r, std::string_view what)
    {
      Box3 b;
      for (int a = 0; a < 3; ++a) b.lo[a] = r.get<double>(what);
      for (int a = 0; a < 3; ++a) b.hi[a] = r.get<double>(what);
      return b;
    }

    inline void check_count(const ByteReader &r, uint64_t n, uint64_t minBytesEach, std::string_view what)
    {
      if (minBytesEach > 0 && n > r.remaining() / minBytesEach)
        throw FormatError(std::string(what) + " count " + std::to_string(n) + " exceeds file size", r.offset());
    }

  } // ::exa::io::detail

  inline std::string encode_artifact(const AmrModel &model, const std::vector<ActiveBrickRegion> &regions,
                                     const std::optional<BrickKdTree> &tree)
  {
    ByteWriter w;
    w.putBytes(std::string_view(kArtifactMagic, 4));
    w.put<uint32_t>(kArtifactVersion);
    w.put<uint32_t>(uint32_t(model.numFields()));
    for (const auto &name : model.fieldNames) w.putString(name);
    w.put<uint64_t>(model.cellCount);
    detail::put_box(w, model.bounds);

    w.put<uint64_t>(model.bricks.size());
    for (const Brick &b : model.bricks) {
      w.put<int32_t>(b.lower.x);
      w.put<int32_t>(b.lower.y);
      w.put<int32_t>(b.lower.z);
      w.put<int32_t>(b.level);
      w.put<int32_t>(b.dims.x);
      w.put<int32_t>(b.dims.y);
      w.put<int32_t>(b.dims.z);
      w.put<uint64_t>(b.begin);
    }
    for (const auto &s : model.scalars) w.putArray(s.data(), s.size());

    w.put<uint64_t>(regions.size());
    for (const auto &r : regions) {
      detail::put_box(w, r.box);
      w.put<double>(r.finestCellWidth);
      w.put<uint32_t>(uint32_t(r.brickIds.size()));
      w.putArray(r.brickIds.data(), r.brickIds.size());
      for (const ValueRange &vr : r.valueRange) {
        w.put<float>(vr.lo);
        w.put<float>(vr.hi);
      }
    }

    w.put<uint8_t>(tree ? 1 : 0);
    if (tree) {
      w.put<uint64_t>(tree->nodes.size());
      for (const auto &n : tree->nodes) {
        w.put<int32_t>(n.axis);
        w.put<int64_t>(n.split);
        w.put<uint32_t>(n.child[0]);
        w.put<uint32_t>(n.child[1]);
        w.put<uint32_t>(n.brickId);
        detail::put_box(w, n.support);
      }
    }
    return w.bytes();
  }

  inline std::shared_ptr<const SceneData> decode_artifact(std::string_view bytes)
  {
    ByteReader r(bytes);
    if (r.getBytes(4, "magic") != std::string_view(kArtifactMagic, 4))
      throw FormatError("bad magic, not a brick artifact", 0);
    const uint32_t version = r.get<uint32_t>("version");
    if (version != kArtifactVersion) throw FormatError("unsupported version " + std::to_string(version), 4);

    AmrModel model;
    const uint32_t numFields = r.get<uint32_t>("field count");
    if (numFields == 0) throw FormatError("field count must be at least 1", r.offset() - 4);
    detail::check_count(r, numFields, 4, "field");
    model.fieldNames.clear();
    for (uint32_t f = 0; f < numFields; ++f) model.fieldNames.push_back(r.getString("field name"));
    model.cellCount = r.get<uint64_t>("cell count");
    model.bounds = detail::get_box(r, "bounds");

    const uint64_t numBricks = r.get<uint64_t>("brick count");
    detail::check_count(r, numBricks, 36, "brick");
    model.bricks.resize(numBricks);
    uint64_t cells = 0;
    for (Brick &b : model.bricks) {
      const uint64_t at = r.offset();
      b.lower.x = r.get<int32_t>("brick");
      b.lower.y = r.get<int32_t>("brick");
      b.lower.z = r.get<int32_t>("brick");
      b.level = r.get<int32_t>("brick");
      b.dims.x = r.get<int32_t>("brick");
      b.dims.y = r.get<int32_t>("brick");
      b.dims.z = r.get<int32_t>("brick");
      b.begin = r.get<uint64_t>("brick");
      if (b.level < 0 || b.level > 30 || reduce_min(b.dims) < 1 || b.begin != cells)
        throw FormatError("corrupt brick record", at);
      cells += uint64_t(b.numCells());
    }
    if (cells != model.cellCount) throw FormatError("brick cells do not add up to the cell count", r.offset());
    detail::check_count(r, model.cellCount, 4 * uint64_t(numFields), "scalar");
    model.scalars.assign(numFields, {});
    for (auto &s : model.scalars) {
      s.resize(model.cellCount);
      r.getArray(s.data(), s.size(), "scalar array");
    }

    const uint64_t numRegions = r.get<uint64_t>("region count");
    detail::check_count(r, numRegions, 60, "region");
    std::vector<ActiveBrickRegion> regions(numRegions);
    for (auto &reg : regions) {
      reg.box = detail::get_box(r, "region");
      reg.finestCellWidth = r.get<double>("region");
      const uint32_t n = r.get<uint32_t>("region");
      detail::check_count(r, n, 4, "region brick");
      reg.brickIds.resize(n);
      r.getArray(reg.brickIds.data(), n, "region brick ids");
      for (uint32_t id : reg.brickIds)
        if (id >= numBricks) throw FormatError("region references brick " + std::to_string(id), r.offset());
      reg.valueRange.resize(numFields);
      for (auto &vr : reg.valueRange) {
        vr.lo = r.get<float>("region value range");
        vr.hi = r.get<float>("region value range");
      }
    }

    std::optional<BrickKdTree> tree;
    if (r.get<uint8_t>("k-d tree flag")) {
      tree.emplace();
      const uint64_t numNodes = r.get<uint64_t>("k-d node count");
      detail::check_count(r, numNodes, 72, "k-d node");
      tree->nodes.resize(numNodes);
      for (uint64_t idx = 0; idx < numNodes; ++idx) {
        auto &n = tree->nodes[idx];
        const uint64_t at = r.offset();
        n.axis = r.get<int32_t>("k-d node");
        n.split = r.get<int64_t>("k-d node");
        n.child[0] = r.get<uint32_t>("k-d node");
        n.child[1] = r.get<uint32_t>("k-d node");
        n.brickId = r.get<uint32_t>("k-d node");
        n.support = detail::get_box(r, "k-d node");
        const bool bad = n.isLeaf() ? n.brickId >= numBricks
                                    : (n.axis > 2 || n.child[0] >= numNodes || n.child[1] >= numNodes
                                       || n.child[0] <= idx || n.child[1] <= idx);
        if (bad) throw FormatError("corrupt k-d node", at);
      }
    }
    if (!r.atEnd()) throw FormatError(std::to_string(r.remaining()) + " trailing bytes", r.offset());
    return std::make_shared<const SceneData>(std::move(model), std::move(regions), std::move(tree));
  }

  inline void save_artifact(const std::string &path, const SceneData &data)
  {
    write_file(path, encode_artifact(data.model, data.regions, data.kdTree));
  }

  inline std::shared_ptr<const SceneData> load_artifact(const std::string &path)
  {
    return decode_artifact(read_file(path));
  }

} // ::exa::io
