#pragma once

#include <cmath>
#include <numbers>

namespace latentmark::detail {

/// Modified Bessel function of the first kind, order zero (power series).
inline double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (double(k) * double(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

/// Kaiser window evaluated at r in [-1, 1]; zero outside.
inline double kaiser(double r, double beta) {
  if (r <= -1.0 || r >= 1.0) return 0.0;
  return bessel_i0(beta * std::sqrt(1.0 - r * r)) / bessel_i0(beta);
}

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace latentmark::detail
