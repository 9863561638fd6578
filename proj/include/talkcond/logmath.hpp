#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace talkcond {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

// log(sum(exp(v))) with the max factored out; -inf for an all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return kLogZero;
  const double mx = *std::max_element(v.begin(), v.end());
  if (mx == kLogZero) return kLogZero;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace talkcond
