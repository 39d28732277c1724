#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "geosynth/autodiff.hpp"

namespace geosynth::flow {

using nn::value_of;

inline constexpr double kMinBinFraction = 1e-3;
inline constexpr double kMinDerivative = 1e-3;

/// Knot positions, heights and derivatives of a monotone rational-quadratic
/// spline on [-bound, bound].
template <typename T>
struct Knots {
  std::vector<T> x;  // bins + 1
  std::vector<T> y;  // bins + 1
  std::vector<T> d;  // bins + 1; boundary derivatives are 1
};

/// Number of unnormalized parameters for a spline with `bins` bins.
constexpr int spline_param_count(int bins) { return 3 * bins - 1; }

/// Raw parameter that maps to derivative 1 (identity spline).
inline double identity_derivative_param() { return std::log(std::expm1(1.0 - kMinDerivative)); }

namespace detail {

/// Constant carried in the same numeric type as `ref`.
inline double constant_like(double, double c) { return c; }
inline nn::Var constant_like(const nn::Var& ref, double c) { return ref * 0.0 + c; }

template <typename T>
std::vector<T> cumulative_knots(std::span<const T> raw, double bound) {
  using std::exp;
  const std::size_t bins = raw.size();
  double peak = value_of(raw[0]);
  for (const auto& r : raw) peak = std::max(peak, value_of(r));
  std::vector<T> e;
  e.reserve(bins);
  for (const auto& r : raw) e.push_back(exp(r - peak));
  T sum = e[0];
  for (std::size_t i = 1; i < bins; ++i) sum = sum + e[i];
  const double span = 2.0 * bound;
  const double free = 1.0 - kMinBinFraction * static_cast<double>(bins);
  std::vector<T> knots;
  knots.reserve(bins + 1);
  T acc = constant_like(raw[0], -bound);
  knots.push_back(acc);
  for (std::size_t i = 0; i + 1 < bins; ++i) {
    acc = acc + span * (kMinBinFraction + free * (e[i] / sum));
    knots.push_back(acc);
  }
  knots.push_back(constant_like(raw[0], bound));
  return knots;
}

}  // namespace detail

/// Normalizes raw parameters [widths(B) | heights(B) | interior derivatives(B-1)]:
/// softmax with a minimum bin size for widths and heights, softplus plus a
/// floor for derivatives.
template <typename T>
Knots<T> make_knots(std::span<const T> raw, int bins, double bound) {
  const auto b = static_cast<std::size_t>(bins);
  Knots<T> k;
  k.x = detail::cumulative_knots(raw.subspan(0, b), bound);
  k.y = detail::cumulative_knots(raw.subspan(b, b), bound);
  k.d.reserve(b + 1);
  const T one = detail::constant_like(raw[0], 1.0);
  k.d.push_back(one);
  for (std::size_t i = 0; i + 1 < b; ++i) k.d.push_back(kMinDerivative + nn::softplus(raw[2 * b + i]));
  k.d.push_back(one);
  return k;
}

template <typename T>
std::size_t find_bin(const std::vector<T>& knots, double v) {
  // Last bin whose left knot is <= v.
  std::size_t lo = 0;
  std::size_t hi = knots.size() - 2;
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (value_of(knots[mid]) <= v) lo = mid;
    else hi = mid - 1;
  }
  return lo;
}

/// Forward map and log-derivative. Identity with zero log-derivative outside
/// [-bound, bound].
template <typename T>
std::pair<T, T> rq_forward(const T& x, const Knots<T>& k, double bound) {
  using std::log;
  const double xv = value_of(x);
  if (xv < -bound || xv > bound) return {x, x * 0.0};
  const std::size_t i = find_bin(k.x, xv);
  const T w = k.x[i + 1] - k.x[i];
  const T h = k.y[i + 1] - k.y[i];
  const T s = h / w;
  const T xi = (x - k.x[i]) / w;
  const T omx = 1.0 - xi;
  const T xi1mxi = xi * omx;
  const T num = h * (s * xi * xi + k.d[i] * xi1mxi);
  const T den = s + (k.d[i + 1] + k.d[i] - 2.0 * s) * xi1mxi;
  const T y = k.y[i] + num / den;
  const T dnum = s * s * (k.d[i + 1] * xi * xi + 2.0 * s * xi1mxi + k.d[i] * omx * omx);
  const T logd = log(dnum) - 2.0 * log(den);
  return {y, logd};
}

/// Inverse map and log-derivative of the inverse.
inline std::pair<double, double> rq_inverse(double y, const Knots<double>& k, double bound) {
  if (y < -bound || y > bound) return {y, 0.0};
  const std::size_t i = find_bin(k.y, y);
  const double w = k.x[i + 1] - k.x[i];
  const double h = k.y[i + 1] - k.y[i];
  const double s = h / w;
  const double dy = y - k.y[i];
  const double sum_d = k.d[i + 1] + k.d[i] - 2.0 * s;
  const double a = h * (s - k.d[i]) + dy * sum_d;
  const double b = h * k.d[i] - dy * sum_d;
  const double c = -s * dy;
  const double disc = std::max(b * b - 4.0 * a * c, 0.0);
  double xi = (2.0 * c) / (-b - std::sqrt(disc));
  xi = std::clamp(xi, 0.0, 1.0);
  const double x = k.x[i] + xi * w;
  const double omx = 1.0 - xi;
  const double xi1mxi = xi * omx;
  const double den = s + sum_d * xi1mxi;
  const double dnum = s * s * (k.d[i + 1] * xi * xi + 2.0 * s * xi1mxi + k.d[i] * omx * omx);
  return {x, -(std::log(dnum) - 2.0 * std::log(den))};
}

}  // namespace geosynth::flow
