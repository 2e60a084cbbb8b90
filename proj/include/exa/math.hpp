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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

namespace exa {

  template <typename T>
  struct vec3 {
    T x{}, y{}, z{};

    constexpr vec3() = default;
    constexpr vec3(T x, T y, T z) : x(x), y(y), z(z) {}
    constexpr explicit vec3(T v) : x(v), y(v), z(v) {}
    template <typename U>
    constexpr explicit vec3(const vec3<U> &o)
      : x(static_cast<T>(o.x)), y(static_cast<T>(o.y)), z(static_cast<T>(o.z)) {}

    constexpr T &operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
    constexpr const T &operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

    friend constexpr bool operator==(const vec3 &, const vec3 &) = default;
  };

  using vec3d = vec3<double>;
  using vec3i = vec3<int32_t>;
  using vec3l = vec3<int64_t>;

  template <typename T> constexpr vec3<T> operator+(const vec3<T> &a, const vec3<T> &b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  template <typename T> constexpr vec3<T> operator-(const vec3<T> &a, const vec3<T> &b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  template <typename T> constexpr vec3<T> operator-(const vec3<T> &a) { return {-a.x, -a.y, -a.z}; }
  template <typename T> constexpr vec3<T> operator*(const vec3<T> &a, T s) { return {a.x * s, a.y * s, a.z * s}; }
  template <typename T> constexpr vec3<T> operator*(T s, const vec3<T> &a) { return {a.x * s, a.y * s, a.z * s}; }
  template <typename T> constexpr vec3<T> operator*(const vec3<T> &a, const vec3<T> &b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
  template <typename T> constexpr vec3<T> operator/(const vec3<T> &a, T s) { return {a.x / s, a.y / s, a.z / s}; }
  template <typename T> constexpr vec3<T> &operator+=(vec3<T> &a, const vec3<T> &b) { a = a + b; return a; }
  template <typename T> constexpr vec3<T> &operator-=(vec3<T> &a, const vec3<T> &b) { a = a - b; return a; }
  template <typename T> constexpr vec3<T> &operator*=(vec3<T> &a, T s) { a = a * s; return a; }

  template <typename T> constexpr T dot(const vec3<T> &a, const vec3<T> &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
  template <typename T> constexpr vec3<T> cross(const vec3<T> &a, const vec3<T> &b)
  {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
  }
  template <typename T> constexpr vec3<T> min(const vec3<T> &a, const vec3<T> &b) { return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)}; }
  template <typename T> constexpr vec3<T> max(const vec3<T> &a, const vec3<T> &b) { return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}; }
  template <typename T> constexpr T reduce_min(const vec3<T> &a) { return std::min({a.x, a.y, a.z}); }
  template <typename T> constexpr T reduce_max(const vec3<T> &a) { return std::max({a.x, a.y, a.z}); }

  inline double length(const vec3d &a) { return std::sqrt(dot(a, a)); }
  inline vec3d normalize(const vec3d &a)
  {
    const double len = length(a);
    return len > 0.0 ? a / len : vec3d(0.0);
  }

  template <typename T>
  inline std::ostream &operator<<(std::ostream &o, const vec3<T> &v)
  {
    return o << "(" << v.x << "," << v.y << "," << v.z << ")";
  }

  /// Axis-aligned box in world units. Empty when lo > hi on any axis.
  struct Box3 {
    vec3d lo{ std::numeric_limits<double>::infinity()};
    vec3d hi{-std::numeric_limits<double>::infinity()};

    constexpr Box3() = default;
    constexpr Box3(const vec3d &lo, const vec3d &hi) : lo(lo), hi(hi) {}

    constexpr bool empty() const { return lo.x > hi.x || lo.y > hi.y || lo.z > hi.z; }
    constexpr vec3d size() const { return hi - lo; }
    constexpr vec3d center() const { return (lo + hi) * 0.5; }
    constexpr double volume() const
    {
      if (empty()) return 0.0;
      const vec3d s = size();
      return s.x * s.y * s.z;
    }
    constexpr void extend(const vec3d &p) { lo = exa::min(lo, p); hi = exa::max(hi, p); }
    constexpr void extend(const Box3 &b)
    {
      if (b.empty()) return;
      lo = exa::min(lo, b.lo);
      hi = exa::max(hi, b.hi);
    }
    constexpr Box3 grown(double d) const { return {lo - vec3d(d), hi + vec3d(d)}; }

    /// closed containment
    constexpr bool contains(const vec3d &p) const
    {
      return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    /// half-open containment, [lo,hi) on every axis
    constexpr bool contains_half_open(const vec3d &p) const
    {
      return p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y && p.z >= lo.z && p.z < hi.z;
    }
    constexpr bool contains(const Box3 &b) const
    {
      return b.lo.x >= lo.x && b.hi.x <= hi.x && b.lo.y >= lo.y && b.hi.y <= hi.y && b.lo.z >= lo.z && b.hi.z <= hi.z;
    }

    friend constexpr bool operator==(const Box3 &, const Box3 &) = default;
  };

  constexpr Box3 intersection(const Box3 &a, const Box3 &b) { return {max(a.lo, b.lo), min(a.hi, b.hi)}; }

  /// true iff the intersection has positive volume
  constexpr bool overlaps_interior(const Box3 &a, const Box3 &b)
  {
    return a.lo.x < b.hi.x && b.lo.x < a.hi.x
        && a.lo.y < b.hi.y && b.lo.y < a.hi.y
        && a.lo.z < b.hi.z && b.lo.z < a.hi.z;
  }

  inline std::ostream &operator<<(std::ostream &o, const Box3 &b) { return o << "[" << b.lo << "-" << b.hi << "]"; }

  struct Ray {
    vec3d origin;
    vec3d direction; // normalized
  };

  /// Floor division for signed integers, rounding toward negative infinity.
  constexpr int64_t floor_div(int64_t a, int64_t b)
  {
    const int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
  }

  constexpr int64_t ceil_div(int64_t a, int64_t b) { return -floor_div(-a, b); }

  constexpr int64_t level_width(int level) { return int64_t(1) << level; }

  /// splitmix64 finalizer; used wherever a deterministic, stateless hash is needed
  constexpr uint64_t mix64(uint64_t z)
  {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// maps a 64-bit hash to [0,1)
  constexpr double hash_to_unit(uint64_t h) { return double(h >> 11) * 0x1.0p-53; }

} // ::exa
