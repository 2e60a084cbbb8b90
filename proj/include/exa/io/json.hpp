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
#include "exa/renderer.hpp"

#include <json.hpp>

namespace exa::io {

  using json = nlohmann::json;

  /// {"domain":[lo,hi], "rgba":[[r,g,b,a] x 256]}
  inline TransferFunction tf_from_json(const json &j)
  {
    if (!j.is_object()) throw std::invalid_argument("transfer function must be a JSON object");
    if (!j.contains("domain") || !j["domain"].is_array() || j["domain"].size() != 2)
      throw std::invalid_argument("transfer function needs \"domain\": [lo, hi]");
    if (!j.contains("rgba") || !j["rgba"].is_array() || j["rgba"].size() != TransferFunction::kSize)
      throw std::invalid_argument("transfer function needs \"rgba\" with 256 entries");
    const double lo = j["domain"][0].get<double>();
    const double hi = j["domain"][1].get<double>();
    TransferFunction::Ramp ramp;
    for (size_t n = 0; n < ramp.size(); ++n) {
      const json &e = j["rgba"][n];
      if (!e.is_array() || e.size() != 4) throw std::invalid_argument("rgba entry " + std::to_string(n) + " must have 4 channels");
      ramp[n] = {e[0].get<float>(), e[1].get<float>(), e[2].get<float>(), e[3].get<float>()};
    }
    return {lo, hi, ramp};
  }

  inline json tf_to_json(const TransferFunction &tf)
  {
    json rgba = json::array();
    for (const RGBA &e : tf.ramp()) rgba.push_back({e.r, e.g, e.b, e.a});
    return {{"domain", {tf.domainLo(), tf.domainHi()}}, {"rgba", std::move(rgba)}};
  }

  inline TransferFunction load_tf(const std::string &path)
  {
    const std::string text = read_file(path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error &e) {
      throw std::invalid_argument("'" + path + "': " + e.what());
    }
    return tf_from_json(j);
  }

  inline json stats_to_json(const FrameStats &s)
  {
    return {{"ms", s.ms}, {"regions", s.regions}, {"samples", s.samples}, {"bvhRebuildMs", s.bvhRebuildMs}};
  }

  inline json vec_to_json(const vec3d &v) { return json::array({v.x, v.y, v.z}); }

  inline vec3d vec_from_json(const json &j)
  {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-component array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  }

  inline json box_to_json(const Box3 &b) { return {{"lo", vec_to_json(b.lo)}, {"hi", vec_to_json(b.hi)}}; }

} // ::exa::io
