#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "strobe/error.hpp"

namespace strobe {

// Bessel functions of the first kind J_0(x)..J_{n_max}(x), computed together
// by Miller's downward recurrence normalized with J_0 + 2*sum J_{2k} = 1.
// Downward recurrence is stable for every order, so one routine covers both
// x < n and x > n as long as the starting order is well above max(n_max, |x|).
inline std::vector<double> bessel_j_sequence(int n_max, double x) {
  detail::require(n_max >= 0, "bessel_j_sequence: n_max must be >= 0");
  detail::require(std::isfinite(x), "bessel_j_sequence: x must be finite");
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  const double ax = std::fabs(x);
  if (ax == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double top = std::max(static_cast<double>(n_max), ax);
  int start = static_cast<int>(top + 20.0 + std::sqrt(40.0 * top));
  if (start % 2 != 0) ++start;

  constexpr double kBig = 1e250;
  double j_above = 0.0;  // J_{k+1}
  double j_here = 1e-300;  // J_k, arbitrary scale
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double j_below = (2.0 * k / ax) * j_here - j_above;
    j_above = j_here;
    j_here = j_below;  // now J_{k-1}
    const int order = k - 1;
    if (order <= n_max) out[static_cast<std::size_t>(order)] = j_here;
    if (order > 0 && order % 2 == 0) norm += 2.0 * j_here;
    if (std::fabs(j_here) > kBig) {
      j_here /= kBig;
      j_above /= kBig;
      norm /= kBig;
      for (int i = order; i <= n_max; ++i) out[static_cast<std::size_t>(i)] /= kBig;
    }
  }
  norm += j_here;  // J_0
  for (auto& v : out) v /= norm;
  if (x < 0.0) {
    for (int n = 1; n <= n_max; n += 2) out[static_cast<std::size_t>(n)] = -out[static_cast<std::size_t>(n)];
  }
  return out;
}

inline double bessel_j(int n, double x) {
  if (n < 0) {
    const double v = bessel_j(-n, x);
    return (n % 2 == 0) ? v : -v;
  }
  return bessel_j_sequence(n, x).back();
}

}  // namespace strobe
