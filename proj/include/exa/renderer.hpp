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

#include "exa/scene.hpp"

#include <numbers>
#include <string_view>
#include <thread>

namespace exa {

  enum class GradientMode { analytic, central, clampedCentral, none };
  enum class Reconstruction { basis, nearest };
  /// where basis samples get their brick lists from
  enum class SamplerPath { regions, cellLocation };

  inline std::string_view to_string(GradientMode m)
  {
    switch (m) {
    case GradientMode::analytic: return "analytic";
    case GradientMode::central: return "central";
    case GradientMode::clampedCentral: return "clampedCentral";
    case GradientMode::none: return "none";
    }
    return "none";
  }

  inline std::optional<GradientMode> parse_gradient_mode(std::string_view s)
  {
    if (s == "analytic") return GradientMode::analytic;
    if (s == "central") return GradientMode::central;
    if (s == "clampedCentral" || s == "clamped") return GradientMode::clampedCentral;
    if (s == "none") return GradientMode::none;
    return std::nullopt;
  }

  /// Keeps the half-space dot(normal, x) <= offset.
  struct ClipPlane {
    vec3d normal{1.0, 0.0, 0.0};
    double offset = 0.0;
  };

  struct Camera {
    vec3d position{0.0, 0.0, -10.0};
    vec3d forward{0.0, 0.0, 1.0};
    vec3d up{0.0, 1.0, 0.0};
    double fovDeg = 45.0;
    int width = 512, height = 512;

    static Camera look_at(const vec3d &pos, const vec3d &target, const vec3d &up, double fovDeg, int width,
                          int height)
    {
      return {pos, normalize(target - pos), up, fovDeg, width, height};
    }

    bool valid() const
    {
      const vec3d f = normalize(forward);
      return length(f) > 0.0 && length(cross(f, normalize(up))) > 1e-9 && fovDeg > 0.0 && fovDeg < 180.0;
    }

    /// primary ray through image position (px, py), y pointing down
    Ray ray(double px, double py) const
    {
      const vec3d f = normalize(forward);
      const vec3d r = normalize(cross(f, up));
      const vec3d u = cross(r, f);
      const double tanHalf = std::tan(0.5 * fovDeg * std::numbers::pi / 180.0);
      const double aspect = double(width) / double(height);
      const double sx = (2.0 * px / double(width) - 1.0) * tanHalf * aspect;
      const double sy = (1.0 - 2.0 * py / double(height)) * tanHalf;
      return {position, normalize(f + r * sx + u * sy)};
    }
  };

  struct MarchParams {
    double samplesPerCell = 2.0;
    double rateScale = 1.0;
    double earlyTermThreshold = 0.98;
    uint64_t interleavedSeed = 0;
    GradientMode gradientMode = GradientMode::analytic;
    double gradientOffsetScale = 0.5;
    std::vector<ClipPlane> clipPlanes; // at most 6
    Reconstruction reconstruction = Reconstruction::basis;
    SamplerPath sampler = SamplerPath::regions;
    RGBA background{0.f, 0.f, 0.f, 1.f};
    int threads = 0; // 0: hardware concurrency

    void validate() const
    {
      if (!(samplesPerCell > 0.0)) throw std::invalid_argument("samplesPerCell must be > 0");
      if (!(rateScale > 0.0)) throw std::invalid_argument("rateScale must be > 0");
      if (!(earlyTermThreshold > 0.0 && earlyTermThreshold <= 1.0))
        throw std::invalid_argument("earlyTermThreshold must lie in (0,1]");
      if (clipPlanes.size() > 6) throw std::invalid_argument("at most 6 clip planes");
    }
  };

  struct FrameStats {
    double ms = 0.0;
    uint64_t regions = 0;    // volume region intervals visited
    uint64_t samples = 0;    // volume sub-intervals sampled
    uint64_t isoSamples = 0; // reconstructions spent on iso-surface root finding
    double bvhRebuildMs = 0.0;

    FrameStats &operator+=(const FrameStats &o)
    {
      regions += o.regions;
      samples += o.samples;
      isoSamples += o.isoSamples;
      return *this;
    }
  };

  struct Frame {
    int width = 0, height = 0;
    std::vector<uint8_t> rgba; // row-major, top row first
    FrameStats stats;
  };

  struct Interval {
    double t0, t1;
    double mid() const { return 0.5 * (t0 + t1); }
    double length() const { return t1 - t0; }
  };

  /// Splits [t_in, t_out] at the global sample lattice dt*(k + rho) into
  /// sub-intervals; always yields at least one. `fn(Interval)` returns false
  /// to stop early.
  template <typename Fn>
  inline void for_each_interval(double t_in, double t_out, double dt, double rho, Fn &&fn)
  {
    double k = std::floor(t_in / dt - rho) + 1.0;
    double t = dt * (k + rho);
    while (t <= t_in) {
      k += 1.0;
      t = dt * (k + rho);
    }
    double prev = t_in;
    while (t < t_out) {
      if (!fn(Interval{prev, t})) return;
      prev = t;
      k += 1.0;
      t = dt * (k + rho);
    }
    fn(Interval{prev, t_out});
  }

  inline std::vector<Interval> make_intervals(double t_in, double t_out, double dt, double rho)
  {
    std::vector<Interval> out;
    for_each_interval(t_in, t_out, dt, rho, [&](const Interval &i) {
      out.push_back(i);
      return true;
    });
    return out;
  }

  /// alpha for a step of length s, given alpha defined for base step s1
  inline double opacity_correct(double alpha, double s, double s1)
  {
    if (alpha <= 0.0) return 0.0;
    if (alpha >= 1.0) return 1.0;
    return std::clamp(1.0 - std::pow(1.0 - alpha, s / s1), 0.0, 1.0);
  }

  /// Headlight Lambertian with an ambient floor.
  inline vec3d shade(const vec3d &color, const vec3d &gradient, const vec3d &rayDir)
  {
    constexpr double ka = 0.2, kd = 0.8;
    const double len = length(gradient);
    if (!(len > 0.0)) return color * ka;
    const double cosTheta = std::abs(dot(gradient / len, normalize(rayDir)));
    return color * (ka + kd * cosTheta);
  }

  /// per-pixel interleaved-sampling offset in [0,1)
  inline double pixel_offset(uint64_t pixelIndex, uint64_t seed) { return hash_to_unit(mix64(pixelIndex ^ mix64(seed))); }

  /// Restricts [tmin, tmax] to the kept side of every clip plane.
  inline bool clip_ray(const Ray &ray, const std::vector<ClipPlane> &planes, double &tmin, double &tmax)
  {
    for (const ClipPlane &pl : planes) {
      const vec3d n = pl.normal;
      const double dn = dot(n, ray.direction);
      const double on = dot(n, ray.origin);
      if (dn == 0.0) {
        if (on > pl.offset) return false;
        continue;
      }
      const double t = (pl.offset - on) / dn;
      if (dn > 0.0) tmax = std::min(tmax, t);
      else tmin = std::max(tmin, t);
    }
    return tmin < tmax;
  }

  struct RayResult {
    vec3d color{0.0}; // premultiplied
    double alpha = 0.0;
    FrameStats stats;
  };

  namespace detail {

    inline SampleWithGradient sample_volume(const Scene &scene, const MarchParams &params, uint32_t regionId,
                                            const vec3d &p, bool wantGradient)
    {
      const auto &region = scene.regions()[regionId];
      const AmrModel &model = scene.model();
      const bool analytic = wantGradient && params.gradientMode == GradientMode::analytic;
      SampleWithGradient out;
      if (params.sampler == SamplerPath::cellLocation) {
        if (analytic) {
          const auto acc = accumulate_celllocation<true>(p, *scene.data->kdTree, model, scene.field);
          out = {acc.sample(), acc.gradient()};
        } else {
          out.sample = accumulate_celllocation<false>(p, *scene.data->kdTree, model, scene.field).sample();
        }
      } else {
        if (analytic) out = basis_sample_region_with_gradient(p, region, model, scene.field);
        else out.sample = basis_sample_region(p, region, model, scene.field);
      }
      return out;
    }

    inline vec3d shading_gradient(const Scene &scene, const MarchParams &params, uint32_t regionId, const vec3d &p,
                                  const SampleWithGradient &s)
    {
      switch (params.gradientMode) {
      case GradientMode::analytic:
        return s.gradient.gradient;
      case GradientMode::central:
        return gradient_central(p, scene.data->locator, scene.regions(), scene.model(), scene.field,
                                params.gradientOffsetScale).gradient;
      case GradientMode::clampedCentral:
        return gradient_central_clamped(p, scene.regions()[regionId], scene.model(), scene.field,
                                        params.gradientOffsetScale).gradient;
      case GradientMode::none:
        break;
      }
      return vec3d(0.0);
    }

    inline void composite(RayResult &acc, const vec3d &color, double alpha)
    {
      const double w = (1.0 - acc.alpha) * alpha;
      acc.color += color * w;
      acc.alpha += w;
    }

  } // ::exa::detail

  /// Front-to-back volume integration of [tmin, tmax] through the scene's
  /// volume BVH with per-region adaptive steps, the mid-point interval
  /// scheme and opacity correction.
  inline RayResult integrate_ray(const Ray &ray, const Scene &scene, const MarchParams &params, double rho,
                                 double tmin, double tmax)
  {
    RayResult acc;
    if (!(tmin < tmax)) return acc;
    const bool nearest = params.reconstruction == Reconstruction::nearest;
    const RegionBvh &bvh = nearest ? *scene.brickBvh : *scene.volumeBvh;
    const bool shaded = !nearest && params.gradientMode != GradientMode::none;
    if (!nearest && params.sampler == SamplerPath::cellLocation && !scene.data->kdTree)
      throw std::logic_error("cell-location sampling needs a retained brick k-d tree");

    double t = tmin;
    bool done = false;
    while (!done) {
      const auto hit = next_region(bvh, ray, t, tmax);
      if (!hit) break;
      ++acc.stats.regions;
      const double cellWidth = nearest ? double(scene.model().bricks[hit->region].width())
                                       : scene.regions()[hit->region].finestCellWidth;
      const double s1 = cellWidth / params.samplesPerCell;
      const double dt = s1 / params.rateScale;

      for_each_interval(hit->t_in, hit->t_out, dt, rho, [&](const Interval &iv) {
        ++acc.stats.samples;
        const vec3d p = ray.origin + ray.direction * iv.mid();
        SampleWithGradient s;
        if (nearest) s.sample = nearest_sample_in_brick(p, hit->region, scene.model(), scene.field);
        else s = detail::sample_volume(scene, params, hit->region, p, shaded);
        if (!s.sample.valid) return true;
        const RGBA c = scene.tf.eval(s.sample.value);
        if (c.a <= 0.f) return true;
        const double alpha = opacity_correct(double(c.a), iv.length(), s1);
        vec3d color(double(c.r), double(c.g), double(c.b));
        if (shaded) color = shade(color, detail::shading_gradient(scene, params, hit->region, p, s), ray.direction);
        detail::composite(acc, color, alpha);
        if (acc.alpha >= params.earlyTermThreshold) {
          done = true;
          return false;
        }
        return true;
      });
      t = hit->t_out;
    }
    return acc;
  }

  struct IsoHit {
    double t = 0.0;
    vec3d position{0.0};
    vec3d gradient{0.0};
  };

  /// First crossing of the iso-value along [tmin, tmax]. Only regions of
  /// the iso BVH are marched; a sign change between consecutive sample
  /// points is refined by 16 bisection steps.
  inline std::optional<IsoHit> iso_intersect(const Ray &ray, const Scene &scene, const MarchParams &params,
                                             double rho, double tmin, double tmax, FrameStats *stats = nullptr)
  {
    if (!scene.iso || !scene.isoBvh || scene.isoBvh->empty() || !(tmin < tmax)) return std::nullopt;
    const double iso = *scene.iso;
    const auto &regions = scene.regions();
    const AmrModel &model = scene.model();

    struct Probe {
      double t;
      double f;
      uint32_t region;
    };
    std::optional<Probe> prev;
    std::optional<IsoHit> result;

    auto eval = [&](double tt, uint32_t region) -> SampleResult {
      if (stats) ++stats->isoSamples;
      return basis_sample_region(ray.origin + ray.direction * tt, regions[region], model, scene.field);
    };
    auto finish = [&](double tt, uint32_t region) {
      IsoHit h;
      h.t = tt;
      h.position = ray.origin + ray.direction * tt;
      h.gradient = gradient_analytic(h.position, regions[region], model, scene.field).gradient;
      result = h;
    };

    double t = tmin;
    while (!result) {
      const auto hit = next_region(*scene.isoBvh, ray, t, tmax);
      if (!hit) break;
      if (prev && prev->t != hit->t_in) prev.reset();
      const double dt = regions[hit->region].finestCellWidth / (params.samplesPerCell * params.rateScale);

      auto probe = [&](double tp) {
        const SampleResult s = eval(tp, hit->region);
        if (!s.valid) {
          prev.reset();
          return true;
        }
        const double f = s.value - iso;
        if (f == 0.0) {
          finish(tp, hit->region);
          return false;
        }
        if (prev && ((prev->f < 0.0) != (f < 0.0))) {
          Probe a = *prev, b{tp, f, hit->region};
          for (int it = 0; it < 16; ++it) {
            const double tm = 0.5 * (a.t + b.t);
            const uint32_t rm = tm >= hit->t_in ? hit->region : a.region;
            const SampleResult sm = eval(tm, rm);
            const double fm = sm.valid ? sm.value - iso : a.f;
            if ((fm < 0.0) == (a.f < 0.0)) a = {tm, fm, rm};
            else b = {tm, fm, rm};
          }
          const double tr = 0.5 * (a.t + b.t);
          finish(tr, tr >= hit->t_in ? hit->region : a.region);
          return false;
        }
        prev = Probe{tp, f, hit->region};
        return true;
      };

      bool go = probe(hit->t_in);
      if (go)
        for_each_interval(hit->t_in, hit->t_out, dt, rho, [&](const Interval &iv) {
          go = probe(iv.t1);
          return go;
        });
      t = hit->t_out;
    }
    return result;
  }

  /// Full per-ray pipeline: clipping, optional iso-surface, volume
  /// integration up to the surface, background.
  inline RayResult trace_pixel(const Ray &ray, const Scene &scene, const MarchParams &params, double rho)
  {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    if (!clip_ray(ray, params.clipPlanes, tmin, tmax)) return {};
    FrameStats isoStats;
    const auto isoHit = iso_intersect(ray, scene, params, rho, tmin, tmax, &isoStats);
    if (isoHit) tmax = isoHit->t;
    RayResult r = integrate_ray(ray, scene, params, rho, tmin, tmax);
    r.stats.isoSamples += isoStats.isoSamples;
    if (isoHit && r.alpha < 1.0) {
      const RGBA c = scene.tf.eval(*scene.iso);
      const vec3d color = shade(vec3d(double(c.r), double(c.g), double(c.b)), isoHit->gradient, ray.direction);
      detail::composite(r, color, 1.0);
    }
    return r;
  }

  inline uint8_t to_unorm8(double v) { return uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

  /// Renders one frame; pixels are independent and the result does not
  /// depend on how rows are scheduled across threads.
  inline Frame render_frame(const Scene &scene, const Camera &camera, const MarchParams &params)
  {
    if (camera.width <= 0 || camera.height <= 0) throw std::invalid_argument("image size must be positive");
    if (!camera.valid()) throw std::invalid_argument("invalid camera");
    params.validate();
    const auto t0 = std::chrono::steady_clock::now();

    Frame frame;
    frame.width = camera.width;
    frame.height = camera.height;
    frame.rgba.resize(size_t(camera.width) * size_t(camera.height) * 4);

    const unsigned numThreads = params.threads > 0 ? unsigned(params.threads)
                                                   : std::max(1u, std::thread::hardware_concurrency());
    std::atomic<int> nextRow{0};
    std::vector<FrameStats> perThread(numThreads);
    std::vector<std::exception_ptr> errors(numThreads);
    auto worker = [&](unsigned tid) {
      try {
        for (int y = nextRow++; y < camera.height; y = nextRow++) {
          for (int x = 0; x < camera.width; ++x) {
            const uint64_t pixel = uint64_t(y) * uint64_t(camera.width) + uint64_t(x);
            const Ray ray = camera.ray(double(x) + 0.5, double(y) + 0.5);
            const RayResult r = trace_pixel(ray, scene, params, pixel_offset(pixel, params.interleavedSeed));
            perThread[tid] += r.stats;
            const double rest = 1.0 - r.alpha;
            const vec3d bg(params.background.r, params.background.g, params.background.b);
            const vec3d c = r.color + bg * (rest * double(params.background.a));
            const double a = r.alpha + rest * double(params.background.a);
            uint8_t *out = &frame.rgba[pixel * 4];
            out[0] = to_unorm8(c.x);
            out[1] = to_unorm8(c.y);
            out[2] = to_unorm8(c.z);
            out[3] = to_unorm8(a);
          }
        }
      } catch (...) {
        errors[tid] = std::current_exception();
        nextRow = camera.height;
      }
    };
    if (numThreads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < numThreads; ++t) pool.emplace_back(worker, t);
      for (auto &th : pool) th.join();
    }
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
    for (const auto &s : perThread) frame.stats += s;
    frame.stats.bvhRebuildMs = 0.0;
    frame.stats.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return frame;
  }

  /// Camera on a sphere around the scene, looking at its center. View `n`
  /// of `count` follows a Fibonacci spiral so any count covers the sphere.
  inline Camera orbit_camera(const Box3 &bounds, int n, int count, double fovDeg, int width, int height)
  {
    const vec3d center = bounds.center();
    const double radius = std::max(0.5 * length(bounds.size()), 1e-6);
    const double dist = radius / std::sin(0.5 * fovDeg * std::numbers::pi / 180.0);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double yy = count > 1 ? 0.9 - 1.8 * double(n) / double(count - 1) : 0.35;
    const double rr = std::sqrt(std::max(0.0, 1.0 - yy * yy));
    const double phi = golden * double(n) + 0.6;
    const vec3d dir(rr * std::cos(phi), yy, rr * std::sin(phi));
    return Camera::look_at(center + dir * dist, center, vec3d(0.0, 1.0, 0.0), fovDeg, width, height);
  }

} // ::exa
