// Copyright 2026 The afcdepth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFC_NUMERIC_HPP
#define AFC_NUMERIC_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>

#include "afc/errors.hpp"

namespace afc {

/// Neumaier-compensated accumulator. Probability sums in the bound code mix
/// terms of order one with terms of order 1e-8, so plain summation is not
/// good enough.
template <typename Scalar = double>
class CompensatedSum {
 public:
  CompensatedSum() = default;
  explicit CompensatedSum(Scalar init) : sum_(init) {}

  CompensatedSum& operator+=(Scalar x) {
    const Scalar t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  CompensatedSum& operator-=(Scalar x) { return *this += -x; }

  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

/// Second-order forward-mode jet in a single variable: value, first and
/// second derivative. Enough to get exact gradients and 2x2 Hessian blocks
/// out of the scalar-templated family formulas.
template <typename T>
struct Jet2 {
  T v{0};
  T d{0};
  T dd{0};

  constexpr Jet2() = default;
  constexpr Jet2(T value) : v(value) {}  // NOLINT: implicit by design of constants
  constexpr Jet2(T value, T d1, T d2) : v(value), d(d1), dd(d2) {}

  static constexpr Jet2 variable(T x) { return {x, T(1), T(0)}; }

  friend constexpr Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
  friend constexpr Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
  friend constexpr Jet2 operator-(const Jet2& a) { return {-a.v, -a.d, -a.dd}; }
  friend constexpr Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + T(2) * a.d * b.d + a.v * b.dd};
  }
  friend constexpr Jet2 operator/(const Jet2& a, const Jet2& b) {
    const T inv = T(1) / b.v;
    const T q = a.v * inv;
    const T qd = (a.d - q * b.d) * inv;
    const T qdd = (a.dd - T(2) * qd * b.d - q * b.dd) * inv;
    return {q, qd, qdd};
  }
  Jet2& operator+=(const Jet2& o) { return *this = *this + o; }
  Jet2& operator-=(const Jet2& o) { return *this = *this - o; }
  Jet2& operator*=(const Jet2& o) { return *this = *this * o; }
};

template <typename T>
inline T value_of(const T& x) {
  return x;
}
template <typename T>
inline T value_of(const Jet2<T>& x) {
  return x.v;
}

/// x^n for integer n >= 0 by repeated squaring. Unlike std::pow this keeps
/// derivatives finite at x = 0 when propagated through Jet2.
template <typename Scalar>
Scalar powi(Scalar x, int n) {
  Scalar result(1.0);
  Scalar base = x;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

/// Golden-section search for the maximum of a unimodal function on [lo, hi].
/// Returns (argmax, max).
inline std::pair<double, double> golden_section_maximize(const std::function<double(double)>& f, double lo,
                                                         double hi, double xtol = 1e-13, int max_iter = 400) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > xtol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
  }
  std::pair<double, double> best = f1 > f2 ? std::pair{x1, f1} : std::pair{x2, f2};
  // The maximum may sit on an endpoint of the original bracket.
  for (double x : {lo, hi}) {
    const double fx = f(x);
    if (fx > best.second) best = {x, fx};
  }
  return best;
}

/// Bisection root of a function with f(lo) and f(hi) of opposite sign.
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi, double xtol = 0.0,
                          int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw NumericError("bisect_root: root is not bracketed");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi || (hi - lo) <= xtol) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Composite trapezoid rule on uniformly spaced samples.
inline double trapezoid(std::span<const double> y, double dx) {
  if (y.size() < 2) return 0.0;
  CompensatedSum<double> s;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  s += 0.5 * (y.front() + y.back());
  return s.value() * dx;
}

}  // namespace afc

#endif  // AFC_NUMERIC_HPP
