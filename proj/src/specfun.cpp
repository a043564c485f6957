#include "mollify/specfun.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mollify/error.hpp"

namespace mollify::specfun {

namespace {

// Single-precision rational start for erfinv (M. Giles, "Approximating the
// erfinv function", GPU Computing Gems, 2010). Relative error ~1e-7.
double erfinv_guess(double y) {
  double w = -std::log((1.0 - y) * (1.0 + y));
  double p;
  if (w < 5.0) {
    w -= 2.5;
    p = 2.81022636e-08;
    p = 3.43273939e-07 + p * w;
    p = -3.5233877e-06 + p * w;
    p = -4.39150654e-06 + p * w;
    p = 0.00021858087 + p * w;
    p = -0.00125372503 + p * w;
    p = -0.00417768164 + p * w;
    p = 0.246640727 + p * w;
    p = 1.50140941 + p * w;
  } else {
    w = std::sqrt(w) - 3.0;
    p = -0.000200214257;
    p = 0.000100950558 + p * w;
    p = 0.00134934322 + p * w;
    p = -0.00367342844 + p * w;
    p = 0.00573950773 + p * w;
    p = -0.0076224613 + p * w;
    p = 0.00943887047 + p * w;
    p = 1.00167406 + p * w;
    p = 2.83297682 + p * w;
  }
  return p * y;
}

}  // namespace

double erf(double x) noexcept { return std::erf(x); }

double erfc(double x) noexcept { return std::erfc(x); }

double erfinv(double y) {
  if (!(std::abs(y) < 1.0)) {
    throw DomainError("erfinv: argument must lie in (-1, 1), got " + std::to_string(y));
  }
  if (y == 0.0) return y;
  const double a = std::abs(y);
  double x = erfinv_guess(a);
  // Below 0.5 Newton on erf(x) - a. Above, Newton on log erfc(x) - log(1 - a):
  // 1 - a is exact there, erfc keeps its relative accuracy in the tail, and
  // the log removes the exp(-x^2) curvature that makes plain Newton overshoot.
  const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);
  if (a < 0.5) {
    for (int it = 0; it < 2; ++it) {
      x -= (std::erf(x) - a) / (two_over_sqrt_pi * std::exp(-x * x));
    }
  } else {
    const double log_tail = std::log1p(-a);
    for (int it = 0; it < 3; ++it) {
      const double c = std::erfc(x);
      x += (std::log(c) - log_tail) * c / (two_over_sqrt_pi * std::exp(-x * x));
    }
  }
  return y < 0.0 ? -x : x;
}

double artanh(double y) {
  if (!(std::abs(y) < 1.0)) {
    throw DomainError("artanh: argument must lie in (-1, 1), got " + std::to_string(y));
  }
  return std::atanh(y);
}

}  // namespace mollify::specfun
