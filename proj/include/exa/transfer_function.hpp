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

#include "exa/math.hpp"

#include <array>
#include <stdexcept>

namespace exa {

  struct RGBA {
    float r = 0.f, g = 0.f, b = 0.f, a = 0.f;
    friend constexpr bool operator==(const RGBA &, const RGBA &) = default;
  };

  /// Piecewise-linear RGBA ramp over a value domain; values outside the
  /// domain clamp to the end entries.
  class TransferFunction {
  public:
    static constexpr int kSize = 256;
    using Ramp = std::array<RGBA, kSize>;

    TransferFunction() : TransferFunction(0.0, 1.0, Ramp{}) {}
    TransferFunction(double lo, double hi, const Ramp &ramp) : lo_(lo), hi_(hi), ramp_(ramp)
    {
      if (!(lo < hi)) throw std::invalid_argument("transfer function domain must satisfy lo < hi");
      for (const RGBA &e : ramp)
        for (float c : {e.r, e.g, e.b, e.a})
          if (!(c >= 0.f && c <= 1.f)) throw std::invalid_argument("transfer function entries must lie in [0,1]");
    }

    static TransferFunction constant(double lo, double hi, RGBA c)
    {
      Ramp r;
      r.fill(c);
      return {lo, hi, r};
    }

    /// alpha rising linearly from 0 to maxAlpha over the domain, blue-to-red colors
    static TransferFunction linear_ramp(double lo, double hi, float maxAlpha = 1.f)
    {
      Ramp r;
      for (int n = 0; n < kSize; ++n) {
        const float t = float(n) / float(kSize - 1);
        r[size_t(n)] = {t, 0.3f + 0.4f * (1.f - std::abs(2.f * t - 1.f)), 1.f - t, maxAlpha * t};
      }
      return {lo, hi, r};
    }

    double domainLo() const { return lo_; }
    double domainHi() const { return hi_; }
    const Ramp &ramp() const { return ramp_; }

    /// continuous ramp coordinate in [0, kSize-1]
    double position(double v) const
    {
      const double x = (v - lo_) / (hi_ - lo_) * double(kSize - 1);
      return std::clamp(x, 0.0, double(kSize - 1));
    }

    RGBA eval(double v) const
    {
      const double x = position(v);
      const int i = std::min(int(x), kSize - 2);
      const float f = float(x - double(i));
      const RGBA &a = ramp_[size_t(i)], &b = ramp_[size_t(i + 1)];
      return {a.r + f * (b.r - a.r), a.g + f * (b.g - a.g), a.b + f * (b.b - a.b), a.a + f * (b.a - a.a)};
    }

    /// Conservative maximum alpha over the value range [lo,hi]: the maximum
    /// over every ramp entry of every bin the range touches, with the range
    /// padded by a tiny margin so rounding in reconstructed samples can not
    /// escape it.
    double max_opacity(double lo, double hi) const
    {
      if (lo > hi) std::swap(lo, hi);
      constexpr double kPad = 1e-6;
      const double xa = std::max(0.0, position(lo) - kPad);
      const double xb = std::min(double(kSize - 1), position(hi) + kPad);
      const int i0 = std::clamp(int(std::floor(xa)), 0, kSize - 1);
      const int i1 = std::clamp(int(std::ceil(xb)), 0, kSize - 1);
      float m = 0.f;
      for (int i = i0; i <= i1; ++i) m = std::max(m, ramp_[size_t(i)].a);
      return double(m);
    }

    friend bool operator==(const TransferFunction &, const TransferFunction &) = default;

  private:
    double lo_, hi_;
    Ramp ramp_;
  };

} // ::exa
