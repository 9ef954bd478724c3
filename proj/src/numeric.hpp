#pragma once

#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/log1p.hpp>

namespace flowtab::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log1p(x) - x without cancellation near zero.
inline double log1pmx(double x) {
  if (x <= -1.0) return -kInf;
  return boost::math::log1pmx(x);
}

/// expm1(y) - y without cancellation near zero.
inline double expm1mx(double y) {
  if (std::fabs(y) > 0.5) return std::expm1(y) - y;
  // y^2/2! + y^3/3! + ... ; |y| <= 0.5 converges to full precision in < 20 terms
  double term = y * y / 2.0;
  double sum = term;
  for (int k = 3; k < 30; ++k) {
    term *= y / k;
    sum += term;
    if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
  }
  return sum;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

/// Standard normal quantile, accurate in both tails.
inline double normal_quantile(double u) {
  if (u <= 0.0) return -kInf;
  if (u >= 1.0) return kInf;
  if (u < 0.5) return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * (1.0 - u));
}

}  // namespace flowtab::detail
