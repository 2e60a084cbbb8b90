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


#include "support.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace exa;

namespace {

  std::shared_ptr<const SceneData> two_brick_data()
  {
    CellSet cells;
    cells.add({0, 0, 0, 0}, 2.f);
    cells.add({1, 0, 0, 0}, 6.f);
    return make_scene_data(cells, {1, false});
  }

  TransferFunction alpha_window(double lo, double hi, int from, int to, float a = 0.5f)
  {
    TransferFunction::Ramp r{};
    for (int n = from; n <= to; ++n) r[size_t(n)] = {1.f, 1.f, 1.f, a};
    return {lo, hi, r};
  }

  /// ray/box overlap by direct slab arithmetic, clipped to t >= 0
  std::optional<std::pair<double, double>> slab(const Ray &ray, const Box3 &b)
  {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      const double o = ray.origin[a], d = ray.direction[a];
      if (d == 0.0) {
        if (o < b.lo[a] || o >= b.hi[a]) return std::nullopt;
        continue;
      }
      double ta = (b.lo[a] - o) / d, tb = (b.hi[a] - o) / d;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (!(t1 > t0)) return std::nullopt;
    return std::make_pair(t0, t1);
  }

  std::vector<RayInterval> enumerate(const RegionBvh &bvh, const Ray &ray)
  {
    std::vector<RayInterval> out;
    double t = 0.0;
    while (auto iv = next_region(bvh, ray, t, std::numeric_limits<double>::infinity())) {
      out.push_back(*iv);
      t = iv->t_out;
      if (out.size() > 100000) break;
    }
    return out;
  }

  Ray random_ray(std::mt19937_64 &rng, const Box3 &bounds)
  {
    const Box3 outer = bounds.grown(0.3 * length(bounds.size()));
    const vec3d o = exa::testing::random_point(rng, outer);
    const vec3d target = exa::testing::random_point(rng, bounds);
    return {o, normalize(target - o)};
  }

} // namespace

TEST(TransferFunction, MaxOpacity)
{
  const TransferFunction zero(0.0, 1.0, TransferFunction::Ramp{});
  EXPECT_EQ(zero.max_opacity(0.0, 1.0), 0.0);
  EXPECT_EQ(zero.max_opacity(-5.0, 5.0), 0.0);
  const TransferFunction ramp = TransferFunction::linear_ramp(0.0, 1.0, 0.7f);
  EXPECT_FLOAT_EQ(float(ramp.max_opacity(0.0, 1.0)), 0.7f);
  EXPECT_FLOAT_EQ(float(ramp.max_opacity(-3.0, 3.0)), 0.7f);
  EXPECT_EQ(alpha_window(0.0, 1.0, 10, 20).max_opacity(-3.0, -1.0), 0.0);
  EXPECT_EQ(alpha_window(0.0, 1.0, 10, 20).max_opacity(0.5, 0.6), 0.0);
  EXPECT_FLOAT_EQ(float(alpha_window(0.0, 1.0, 10, 20).max_opacity(0.05, 0.06)), 0.5f);
}

TEST(TransferFunction, MaxOpacityIsConservative)
{
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  std::uniform_int_distribution<int> bin(0, 255);
  for (int trial = 0; trial < 200; ++trial) {
    int a = bin(rng), b = bin(rng);
    if (a > b) std::swap(a, b);
    const TransferFunction tf = alpha_window(0.0, 1.0, a, b);
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const double m = tf.max_opacity(lo, hi);
    for (int n = 0; n <= 200; ++n) {
      const double v = lo + (hi - lo) * n / 200.0;
      ASSERT_LE(double(tf.eval(v).a), m + 1e-7);
    }
  }
}

TEST(TransferFunction, EvalClampsAndInterpolates)
{
  const TransferFunction tf = TransferFunction::linear_ramp(10.0, 20.0, 1.f);
  EXPECT_EQ(tf.eval(5.0), tf.ramp()[0]);
  EXPECT_EQ(tf.eval(25.0), tf.ramp()[255]);
  EXPECT_NEAR(tf.eval(15.0).a, 0.5f, 1e-6f);
  EXPECT_THROW(TransferFunction(1.0, 1.0, TransferFunction::Ramp{}), std::invalid_argument);
}

TEST(VolumeBvh, TransparentAndOpaque)
{
  const auto d = exa::testing::build_scene_data(exa::testing::small_models()[0].spec);
  const RegionBvh none = build_volume_bvh(d->regions, TransferFunction(0.0, 1.0, TransferFunction::Ramp{}));
  EXPECT_TRUE(none.empty());
  EXPECT_FALSE(next_region(none, Ray{vec3d(-100.0), normalize(vec3d(1.0))}, 0.0, 1e9).has_value());
  const RegionBvh all = build_volume_bvh(d->regions, TransferFunction::constant(0.0, 1.0, {1, 1, 1, 1}));
  EXPECT_EQ(all.numItems(), d->regions.size());
}

TEST(VolumeBvh, PrunedRegionsCannotProduceAlpha)
{
  const auto d = exa::testing::build_scene_data(exa::testing::small_models()[1].spec);
  const auto [lo, hi] = d->model.valueRange();
  const TransferFunction tf = alpha_window(lo, hi, 140, 200);
  const RegionBvh bvh = build_volume_bvh(d->regions, tf);
  ASSERT_LT(bvh.numItems(), d->regions.size());
  ASSERT_GT(bvh.numItems(), 0u);
  std::vector<bool> active(d->regions.size(), false);
  for (uint32_t id : bvh.items()) active[id] = true;
  std::mt19937_64 rng(13);
  int checked = 0;
  for (int n = 0; n < 5000; ++n) {
    const vec3d p = exa::testing::random_point(rng, d->supportBounds);
    const auto r = point_query(d->locator, p);
    if (!r || active[*r]) continue;
    const SampleResult s = basis_sample_region(p, d->regions[*r], d->model);
    if (!s.valid) continue;
    ASSERT_EQ(tf.eval(s.value).a, 0.f);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(IsoBvh, Membership)
{
  const auto d = exa::testing::build_scene_data(exa::testing::small_models()[0].spec);
  const auto [lo, hi] = d->model.valueRange();
  EXPECT_TRUE(build_iso_bvh(d->regions, double(lo) - 1.0).empty());
  EXPECT_TRUE(build_iso_bvh(d->regions, double(hi) + 1.0).empty());
  const double iso = 0.5 * (double(lo) + double(hi));
  const RegionBvh bvh = build_iso_bvh(d->regions, iso);
  size_t expected = 0;
  for (const auto &r : d->regions) expected += r.valueRange[0].lo <= iso && iso <= r.valueRange[0].hi;
  EXPECT_EQ(bvh.numItems(), expected);

  io::SyntheticSpec s;
  s.field = io::SyntheticField::constant;
  s.constantValue = 3.0;
  s.extent = vec3i(8);
  s.maxLevel = 1;
  s.threshold = std::numeric_limits<double>::infinity();
  const auto c = exa::testing::build_scene_data(s);
  EXPECT_EQ(build_iso_bvh(c->regions, 3.0).numItems(), c->regions.size());
}

TEST(NextRegion, TwoBrickRowInOrder)
{
  const auto d = two_brick_data();
  const RegionBvh bvh = build_full_bvh(d->regions);
  const Ray ray{vec3d(-5.0, 0.5, 0.5), vec3d(1.0, 0.0, 0.0)};
  const auto ivs = enumerate(bvh, ray);
  ASSERT_EQ(ivs.size(), 3u);
  const double t[4] = {4.5, 5.5, 6.5, 7.5};
  for (int n = 0; n < 3; ++n) {
    EXPECT_EQ(ivs[size_t(n)].t_in, t[n]);
    EXPECT_EQ(ivs[size_t(n)].t_out, t[n + 1]);
    EXPECT_EQ(d->regions[ivs[size_t(n)].region].box.lo.x, t[n] - 5.0);
  }
  EXPECT_TRUE(enumerate(bvh, Ray{vec3d(-5.0, 10.0, 0.5), vec3d(1.0, 0.0, 0.0)}).empty());
}

TEST(NextRegion, RayInSharedFaceVisitsEachSlabOnce)
{
  const auto d = exa::testing::build_scene_data(exa::testing::small_models()[2].spec, false, 4);
  const RegionBvh bvh = build_full_bvh(d->regions);
  // y = z = 3.5 lies exactly on support faces of the 4-wide bricks
  const Ray ray{vec3d(-3.0, 3.5, 3.5), vec3d(1.0, 0.0, 0.0)};
  const auto ivs = enumerate(bvh, ray);
  ASSERT_FALSE(ivs.empty());
  for (size_t n = 1; n < ivs.size(); ++n) EXPECT_EQ(ivs[n].t_in, ivs[n - 1].t_out);
  EXPECT_EQ(ivs.front().t_in, 2.5);
  EXPECT_EQ(ivs.back().t_out, 3.0 + 16.5);
}

TEST(NextRegion, EnumerationIsCompleteAndOrdered)
{
  for (const auto &mc : exa::testing::small_models()) {
    SCOPED_TRACE(mc.name);
    const auto d = exa::testing::build_scene_data(mc.spec);
    const auto [lo, hi] = d->model.valueRange();
    const TransferFunction tf = alpha_window(lo, hi, 60, 255);
    const RegionBvh bvh = build_volume_bvh(d->regions, tf);
    std::vector<bool> active(d->regions.size(), false);
    for (uint32_t id : bvh.items()) active[id] = true;
    std::mt19937_64 rng(21);
    for (int n = 0; n < 300; ++n) {
      const Ray ray = random_ray(rng, d->supportBounds);
      const auto ivs = enumerate(bvh, ray);
      std::map<uint32_t, std::pair<double, double>> expected;
      for (uint32_t r = 0; r < d->regions.size(); ++r)
        if (active[r])
          if (auto s = slab(ray, d->regions[r].box)) expected[r] = *s;
      std::set<uint32_t> seen;
      for (size_t k = 0; k < ivs.size(); ++k) {
        const auto &iv = ivs[k];
        ASSERT_LT(iv.t_in, iv.t_out);
        if (k > 0) {
          ASSERT_GE(iv.t_in, ivs[k - 1].t_out);
        }
        ASSERT_TRUE(seen.insert(iv.region).second) << "region visited twice";
        auto it = expected.find(iv.region);
        ASSERT_NE(it, expected.end()) << "visited a region the ray does not cross";
        EXPECT_NEAR(iv.t_out, it->second.second, 1e-9);
      }
      for (const auto &[r, s] : expected)
        if (s.second - s.first > 1e-6) {
          ASSERT_TRUE(seen.count(r)) << "missed region " << r;
        }
    }
  }
}

TEST(PointQuery, AgreesWithLinearScan)
{
  const auto d = exa::testing::build_scene_data(exa::testing::small_models()[1].spec);
  const auto [lo, hi] = d->model.valueRange();
  const RegionBvh bvh = build_volume_bvh(d->regions, alpha_window(lo, hi, 100, 255));
  std::vector<bool> active(d->regions.size(), false);
  for (uint32_t id : bvh.items()) active[id] = true;
  std::mt19937_64 rng(31);
  for (int n = 0; n < 10000; ++n) {
    const vec3d p = exa::testing::random_point(rng, d->supportBounds.grown(1.0));
    std::optional<uint32_t> expected;
    for (uint32_t r = 0; r < d->regions.size(); ++r)
      if (active[r] && d->regions[r].box.contains_half_open(p)) {
        ASSERT_FALSE(expected.has_value()) << "regions overlap";
        expected = r;
      }
    ASSERT_EQ(point_query(bvh, p), expected);
  }
  // centroids
  for (uint32_t id : bvh.items()) EXPECT_EQ(point_query(bvh, d->regions[id].box.center()), std::optional(id));
  for (uint32_t r = 0; r < d->regions.size(); ++r)
    if (!active[r]) {
      EXPECT_EQ(point_query(bvh, d->regions[r].box.center()), std::nullopt);
    }
}

TEST(RegionBvh, StructureAndDeterminism)
{
  const auto d = exa::testing::build_scene_data(exa::testing::small_models()[0].spec);
  const TransferFunction tf = TransferFunction::linear_ramp(0.0, 1.0);
  const RegionBvh a = build_volume_bvh(d->regions, tf), b = build_volume_bvh(d->regions, tf);
  EXPECT_EQ(a.items(), b.items());
  ASSERT_EQ(a.nodes().size(), b.nodes().size());
  EXPECT_NE(a.version(), b.version());
  for (size_t n = 0; n < a.nodes().size(); ++n) {
    const auto &na = a.nodes()[n], &nb = b.nodes()[n];
    EXPECT_EQ(na.first, nb.first);
    EXPECT_EQ(na.count, nb.count);
    EXPECT_EQ(na.bounds(), nb.bounds());
    EXPECT_LE(na.count, RegionBvh::kMaxLeafSize);
    for (uint32_t i = na.first; na.count > 0 && i < na.first + na.count; ++i) {
      EXPECT_TRUE(na.bounds().contains(a.box(a.items()[i])));
    }
  }
  EXPECT_GE(a.buildMs(), 0.0);
}
