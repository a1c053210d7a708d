#pragma once

// Integer-order Bessel functions of the first kind.
//
// Two evaluation paths:
//   * ascending power series when x^2/4 <= n + 1, where every term is smaller
//     than the first one and no cancellation occurs;
//   * Miller's downward recurrence otherwise, normalized with the closure
//     identity J_0 + 2 (J_2 + J_4 + ...) = 1.
// Both give |error| below 1e-13 for |x| <= 50.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace squirrels {

namespace detail {

inline double bessel_series(int n, double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= half / k;
  if (term == 0.0) return 0.0;
  const double q = -half * half;
  double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * (n + k));
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

inline double bessel_miller(int n, double x) {
  const int top = std::max(n, static_cast<int>(x));
  int start = top + static_cast<int>(std::sqrt(400.0 * (top + 10))) + 20;
  start += start & 1;  // even, so the normalization sum closes on J_0

  const double two_over_x = 2.0 / x;
  double next = 0.0;     // J_{k+1}
  double current = 1.0;  // J_k, arbitrary scale
  double norm = 0.0;
  double wanted = 0.0;
  for (int k = start; k > 0; --k) {
    const double previous = k * two_over_x * current - next;
    next = current;
    current = previous;  // now J_{k-1}
    if (k - 1 == n) wanted = current;
    if (k - 1 > 0 && ((k - 1) & 1) == 0) norm += 2.0 * current;
    if (std::abs(current) > 1e250) {
      current *= 1e-250;
      next *= 1e-250;
      norm *= 1e-250;
      wanted *= 1e-250;
    }
  }
  norm += current;  // J_0
  return wanted / norm;
}

}  // namespace detail

/// J_order(x) for integer order of either sign and real x.
inline double bessel_j(int order, double x) {
  double sign = 1.0;
  if (order < 0) {
    order = -order;
    if (order & 1) sign = -sign;
  }
  if (x < 0.0) {
    x = -x;
    if (order & 1) sign = -sign;
  }
  if (x == 0.0) return order == 0 ? sign : 0.0;
  if (0.25 * x * x <= order + 1.0) return sign * detail::bessel_series(order, x);
  return sign * detail::bessel_miller(order, x);
}

/// J_0(x), ..., J_max_order(x).
inline std::vector<double> bessel_table(int max_order, double x) {
  std::vector<double> table(static_cast<std::size_t>(std::max(max_order, 0)) + 1);
  for (int k = 0; k <= max_order; ++k) table[static_cast<std::size_t>(k)] = bessel_j(k, x);
  return table;
}

/// Smallest n >= 0 such that |J_k(x)| < eps for every k >= n.
///
/// Beyond the turning point k > |x| the magnitudes decay monotonically, so the
/// first order past |x| that drops below eps bounds the whole tail.
inline int bessel_reach(double x, double eps = 1e-13) {
  x = std::abs(x);
  int n = static_cast<int>(std::ceil(x));
  while (std::abs(bessel_j(n, x)) >= eps) ++n;
  return n;
}

}  // namespace squirrels
