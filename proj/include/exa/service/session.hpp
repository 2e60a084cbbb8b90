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

#include "exa/io/image.hpp"
#include "exa/io/json.hpp"
#include "exa/renderer.hpp"

#include <mutex>

namespace exa::service {

  using io::json;

  inline constexpr const char *kServiceName = "exabricks";
  inline constexpr const char *kServiceVersion = "1.0.0";

  struct RebuildError : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  /// State shared by every client of one service: the published scene
  /// snapshot, pending edits, camera and march parameters. Edits to the tf
  /// or iso-value are recorded and applied lazily by the next frame
  /// request; one rebuild runs at a time and concurrent requests render
  /// the snapshot that was current before it.
  class SessionState {
  public:
    SessionState(std::shared_ptr<const SceneData> data, const TransferFunction &tf,
                 std::optional<double> iso = std::nullopt, MarchParams params = {})
      : params_(std::move(params))
    {
      published_ = {Scene::create(std::move(data), tf, iso), std::make_shared<std::atomic<bool>>(true)};
      camera_ = orbit_camera(published_.scene->data->supportBounds, 0, 1, 45.0, 512, 512);
    }

    std::shared_ptr<const Scene> scene() const
    {
      std::lock_guard lock(mutex_);
      return published_.scene;
    }
    Camera camera() const
    {
      std::lock_guard lock(mutex_);
      return camera_;
    }
    MarchParams params() const
    {
      std::lock_guard lock(mutex_);
      return params_;
    }

    void setCamera(const Camera &c)
    {
      std::lock_guard lock(mutex_);
      camera_ = c;
    }
    void setRateScale(double rateScale)
    {
      std::lock_guard lock(mutex_);
      params_.rateScale = rateScale;
    }
    void setGradientMode(GradientMode mode)
    {
      std::lock_guard lock(mutex_);
      params_.gradientMode = mode;
    }
    /// last writer wins; applied by the next frame request
    void setTransferFunction(const TransferFunction &tf)
    {
      std::lock_guard lock(mutex_);
      pendingTf_ = tf;
    }
    void setIso(std::optional<double> iso)
    {
      std::lock_guard lock(mutex_);
      pendingIso_ = iso;
    }

    bool hasPendingEdits() const
    {
      std::lock_guard lock(mutex_);
      return pendingTf_.has_value() || pendingIso_.has_value();
    }

    /// Builds and publishes the next snapshot if edits are pending and no
    /// other rebuild is running. Throws RebuildError if the build fails;
    /// the previous snapshot stays published.
    void applyPendingEdits()
    {
      std::unique_lock edit(editMutex_, std::try_to_lock);
      if (!edit.owns_lock()) return;

      std::optional<TransferFunction> tf;
      std::optional<std::optional<double>> iso;
      std::shared_ptr<const Scene> base;
      {
        std::lock_guard lock(mutex_);
        tf = std::exchange(pendingTf_, std::nullopt);
        iso = std::exchange(pendingIso_, std::nullopt);
        base = published_.scene;
      }
      if (!tf && !iso) return;

      std::shared_ptr<const Scene> next;
      try {
        if (rebuildHook) rebuildHook();
        next = base->with_edits(tf, iso);
      } catch (const std::exception &e) {
        throw RebuildError(std::string("rebuild failed: ") + e.what());
      }
      std::lock_guard lock(mutex_);
      published_ = {std::move(next), std::make_shared<std::atomic<bool>>(false)};
      ++rebuildCount_;
    }

    struct RenderedFrame {
      uint64_t id;
      Frame frame;
    };

    /// Renders the current snapshot. The frame's bvhRebuildMs is non-zero
    /// only for the first frame rendered from a freshly rebuilt snapshot.
    RenderedFrame renderFrame(int width, int height)
    {
      applyPendingEdits();
      Published snap;
      Camera cam;
      MarchParams params;
      {
        std::lock_guard lock(mutex_);
        snap = published_;
        cam = camera_;
        params = params_;
      }
      cam.width = width;
      cam.height = height;
      Frame frame = render_frame(*snap.scene, cam, params);
      frame.stats.bvhRebuildMs = snap.rebuildReported->exchange(true) ? 0.0 : snap.scene->rebuildMs;
      std::lock_guard lock(idMutex_);
      return {++frameCounter_, std::move(frame)};
    }

    uint64_t rebuildCount() const
    {
      std::lock_guard lock(mutex_);
      return rebuildCount_;
    }
    uint64_t framesServed() const
    {
      std::lock_guard lock(idMutex_);
      return frameCounter_;
    }

    json describe() const
    {
      const auto s = scene();
      const RegionStats rs = region_stats(s->regions());
      json fields = s->model().fieldNames;
      return {{"service", kServiceName},
              {"version", kServiceVersion},
              {"fields", fields},
              {"bounds", io::box_to_json(s->data->supportBounds)},
              {"stats",
               {{"cells", s->model().cellCount},
                {"bricks", s->model().bricks.size()},
                {"regions", rs.numRegions},
                {"avgBricksByCount", rs.avgBricksByCount},
                {"avgBricksByVolume", rs.avgBricksByVolume}}}};
    }

    /// runs inside a rebuild before the structures are built; tests use it
    /// to slow rebuilds down or make them fail
    std::function<void()> rebuildHook;

  private:
    struct Published {
      std::shared_ptr<const Scene> scene;
      std::shared_ptr<std::atomic<bool>> rebuildReported;
    };

    mutable std::mutex mutex_;
    std::mutex editMutex_;
    mutable std::mutex idMutex_;
    Published published_;
    Camera camera_;
    MarchParams params_;
    std::optional<TransferFunction> pendingTf_;
    std::optional<std::optional<double>> pendingIso_;
    uint64_t rebuildCount_ = 0;
    uint64_t frameCounter_ = 0;
  };

  struct OutMessage {
    bool binary = false;
    std::string payload;
  };

  inline OutMessage error_message(std::string_view code, std::string_view message)
  {
    return {false, json{{"type", "error"}, {"code", code}, {"message", message}}.dump()};
  }

  namespace detail {

    struct BadRequest : std::invalid_argument {
      using std::invalid_argument::invalid_argument;
    };

    inline const json &require(const json &msg, const char *key)
    {
      if (!msg.contains(key)) throw BadRequest(std::string("missing \"") + key + "\"");
      return msg[key];
    }

    inline double number(const json &v, const char *key)
    {
      if (!v.is_number()) throw BadRequest(std::string("\"") + key + "\" must be a number");
      return v.get<double>();
    }

  } // ::exa::service::detail

  /// Translates one client text message into the messages to send back.
  /// Transport independent; safe to call concurrently.
  inline std::vector<OutMessage> handle_message(SessionState &state, std::string_view text)
  {
    json msg;
    try {
      msg = json::parse(text);
    } catch (const json::parse_error &e) {
      return {error_message("bad_json", e.what())};
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
      return {error_message("bad_request", "message must be an object with a string \"type\"")};
    const std::string type = msg["type"].get<std::string>();

    try {
      if (type == "hello") {
        json info = state.describe();
        info["type"] = "info";
        return {{false, info.dump()}};
      }
      if (type == "set_camera") {
        const vec3d pos = io::vec_from_json(detail::require(msg, "pos"));
        const vec3d look = io::vec_from_json(detail::require(msg, "look"));
        const vec3d up = msg.contains("up") ? io::vec_from_json(msg["up"]) : vec3d(0, 1, 0);
        const double fov = msg.contains("fov") ? detail::number(msg["fov"], "fov") : 45.0;
        Camera c = Camera::look_at(pos, look, up, fov, 1, 1);
        if (!(length(look - pos) > 0.0) || !c.valid()) throw detail::BadRequest("degenerate camera");
        state.setCamera(c);
        return {};
      }
      if (type == "set_tf") {
        state.setTransferFunction(io::tf_from_json(msg));
        return {};
      }
      if (type == "set_iso") {
        const json &v = detail::require(msg, "value");
        if (v.is_null()) state.setIso(std::nullopt);
        else state.setIso(detail::number(v, "value"));
        return {};
      }
      if (type == "set_params") {
        std::optional<double> rate;
        std::optional<GradientMode> mode;
        if (msg.contains("rateScale")) {
          rate = detail::number(msg["rateScale"], "rateScale");
          if (!(*rate > 0.0) || !std::isfinite(*rate)) throw detail::BadRequest("rateScale must be > 0");
        }
        if (msg.contains("gradientMode")) {
          if (!msg["gradientMode"].is_string()) throw detail::BadRequest("gradientMode must be a string");
          mode = parse_gradient_mode(msg["gradientMode"].get<std::string>());
          if (!mode) throw detail::BadRequest("unknown gradientMode");
        }
        if (rate) state.setRateScale(*rate);
        if (mode) state.setGradientMode(*mode);
        return {};
      }
      if (type == "request_frame") {
        const double w = detail::number(detail::require(msg, "width"), "width");
        const double h = detail::number(detail::require(msg, "height"), "height");
        if (w != std::floor(w) || h != std::floor(h) || w < 1 || h < 1 || w > 4096 || h > 4096)
          throw detail::BadRequest("width and height must be integers in [1,4096]");
        SessionState::RenderedFrame rf;
        try {
          rf = state.renderFrame(int(w), int(h));
        } catch (const RebuildError &e) {
          return {error_message("rebuild_failed", e.what())};
        }
        const json header{{"type", "frame"},
                          {"id", rf.id},
                          {"width", rf.frame.width},
                          {"height", rf.frame.height},
                          {"encoding", "png"},
                          {"stats", io::stats_to_json(rf.frame.stats)}};
        return {{false, header.dump()}, {true, io::encode_png(rf.frame.width, rf.frame.height, rf.frame.rgba)}};
      }
    } catch (const json::exception &e) {
      return {error_message("bad_request", e.what())};
    } catch (const std::invalid_argument &e) {
      return {error_message("bad_request", e.what())};
    }
    return {error_message("unsupported", "unsupported message type \"" + type + "\"")};
  }

} // ::exa::service
