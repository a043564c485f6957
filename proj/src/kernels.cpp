#include "mollify/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mollify/error.hpp"
#include "mollify/specfun.hpp"

namespace mollify {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Logistic 1/(1+e^{-x}) without overflow.
double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unit-scale densities. Every branch works on |x| so pdf(x) == pdf(-x) exactly.
double unit_pdf(KernelKind kind, double x) noexcept {
  const double a = std::abs(x);
  switch (kind) {
    case KernelKind::gaussian:
      return std::exp(-0.5 * a * a) / std::sqrt(2.0 * kPi);
    case KernelKind::poisson:
      return 1.0 / (kPi * (a * a + 1.0));
    case KernelKind::hyperbolic: {
      // 1/(2 cosh^2 x) = 2 e^{-2|x|} / (1 + e^{-2|x|})^2
      const double e = std::exp(-2.0 * a);
      return 2.0 * e / ((1.0 + e) * (1.0 + e));
    }
    case KernelKind::sigmoid: {
      const double e = std::exp(-a);
      return e / ((1.0 + e) * (1.0 + e));
    }
    case KernelKind::rect:
      return a <= 1.0 ? 0.5 : 0.0;
  }
  return 0.0;
}

double unit_log_pdf(KernelKind kind, double x) noexcept {
  const double a = std::abs(x);
  switch (kind) {
    case KernelKind::gaussian:
      return -0.5 * a * a - 0.5 * std::log(2.0 * kPi);
    case KernelKind::poisson:
      return -std::log(kPi) - std::log1p(a * a);
    case KernelKind::hyperbolic:
      return std::log(2.0) - 2.0 * a - 2.0 * std::log1p(std::exp(-2.0 * a));
    case KernelKind::sigmoid:
      return -a - 2.0 * std::log1p(std::exp(-a));
    case KernelKind::rect:
      return a <= 1.0 ? -std::log(2.0) : -kInf;
  }
  return -kInf;
}

double unit_cdf(KernelKind kind, double x) noexcept {
  switch (kind) {
    case KernelKind::gaussian:
      return 0.5 * specfun::erfc(-x / std::numbers::sqrt2);
    case KernelKind::poisson:
      // atan(x)/pi + 1/2, rewritten for x < 0 to keep left-tail precision.
      return x < 0.0 ? std::atan(-1.0 / x) / kPi : std::atan(x) / kPi + 0.5;
    case KernelKind::hyperbolic:
      // tanh(x)/2 + 1/2 == logistic(2x)
      return logistic(2.0 * x);
    case KernelKind::sigmoid:
      return logistic(x);
    case KernelKind::rect:
      if (x < -1.0) return 0.0;
      if (x > 1.0) return 1.0;
      return 0.5 * x + 0.5;
  }
  return 0.0;
}

double unit_inv_cdf(KernelKind kind, double u) {
  switch (kind) {
    case KernelKind::gaussian:
      return std::numbers::sqrt2 * specfun::erfinv(2.0 * u - 1.0);
    case KernelKind::poisson: {
      // tan(pi/2 (2u - 1)); near the ends use the cotangent of the exact
      // distance to the boundary.
      const double d = u - 0.5;
      if (std::abs(d) <= 0.25) return std::tan(kPi * d);
      return d > 0.0 ? 1.0 / std::tan(kPi * (1.0 - u)) : -1.0 / std::tan(kPi * u);
    }
    case KernelKind::hyperbolic:
      return specfun::artanh(2.0 * u - 1.0);
    case KernelKind::sigmoid:
      return std::log(u) - std::log1p(-u);
    case KernelKind::rect:
      return 2.0 * u - 1.0;
  }
  return 0.0;
}

}  // namespace

std::string_view kernel_name(KernelKind kind) noexcept {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::poisson: return "poisson";
    case KernelKind::hyperbolic: return "hyperbolic";
    case KernelKind::sigmoid: return "sigmoid";
    case KernelKind::rect: return "rect";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
  for (KernelKind k : kAllKernelKinds) {
    if (kernel_name(k) == name) return k;
  }
  throw ConfigInvalid("unknown kernel '" + std::string(name) +
                      "'; valid kernels: gaussian, poisson, hyperbolic, sigmoid, rect");
}

KernelSpec::KernelSpec(KernelKind kind, double epsilon) : kind_(kind), epsilon_(epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigInvalid("kernel epsilon must be finite and > 0");
  }
}

double KernelSpec::pdf(double x) const noexcept {
  return unit_pdf(kind_, x / epsilon_) / epsilon_;
}

double KernelSpec::log_pdf(double x) const noexcept {
  return unit_log_pdf(kind_, x / epsilon_) - std::log(epsilon_);
}

double KernelSpec::cdf(double x) const noexcept { return unit_cdf(kind_, x / epsilon_); }

double KernelSpec::inv_cdf(double u) const {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("inv_cdf: probability must lie in (0, 1), got " + std::to_string(u));
  }
  return epsilon_ * unit_inv_cdf(kind_, u);
}

double KernelSpec::pdf_nd(std::span<const double> x) const noexcept {
  double p = 1.0;
  for (double xi : x) p *= pdf(xi);
  return p;
}

double KernelSpec::log_pdf_nd(std::span<const double> x) const noexcept {
  double lp = 0.0;
  for (double xi : x) lp += log_pdf(xi);
  return lp;
}

namespace {

void check_confidence(ConfidenceSpec c) {
  if (!(c.radius > 0.0) || !std::isfinite(c.radius)) {
    throw ConfigInvalid("confidence radius r must be finite and > 0");
  }
  if (!(c.level > 0.0 && c.level < 1.0)) {
    throw ConfigInvalid("confidence level alpha must lie in (0, 1)");
  }
}

}  // namespace

double confidence_residual(KernelKind kind, double epsilon, ConfidenceSpec c) {
  const KernelSpec k(kind, epsilon);
  return (k.cdf(c.radius) - k.cdf(0.0)) - 0.5 * c.level;
}

double closed_form_epsilon(KernelKind kind, ConfidenceSpec c) {
  check_confidence(c);
  const double r = c.radius;
  const double a = c.level;
  switch (kind) {
    case KernelKind::gaussian:
      return r / (std::numbers::sqrt2 * specfun::erfinv(a));
    case KernelKind::poisson:
      return r / std::tan(0.5 * kPi * a);
    case KernelKind::hyperbolic:
      return r / specfun::artanh(a);
    case KernelKind::sigmoid:
      return r / std::log((1.0 + a) / (1.0 - a));
    case KernelKind::rect:
      return r / a;
  }
  return 0.0;
}

double printed_closed_form_epsilon(KernelKind kind, ConfidenceSpec c) {
  check_confidence(c);
  switch (kind) {
    case KernelKind::hyperbolic:
      return c.radius / std::atan(c.level);
    case KernelKind::rect:
      return 2.0 * c.radius / c.level;
    default:
      return closed_form_epsilon(kind, c);
  }
}

double solve_epsilon_numeric(KernelKind kind, ConfidenceSpec c) {
  check_confidence(c);
  // The residual decreases strictly in eps: positive for small eps (mass
  // concentrates inside [0, r]) and tends to -alpha/2 as eps grows.
  double lo = c.radius;
  double hi = c.radius;
  while (confidence_residual(kind, lo, c) <= 0.0) lo *= 0.5;
  while (confidence_residual(kind, hi, c) > 0.0) hi *= 2.0;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (confidence_residual(kind, mid, c) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Pick whichever endpoint has the smaller residual.
  return std::abs(confidence_residual(kind, lo, c)) <= std::abs(confidence_residual(kind, hi, c))
             ? lo
             : hi;
}

double solve_epsilon(KernelKind kind, ConfidenceSpec c) {
  const double eps = closed_form_epsilon(kind, c);
  if (std::isfinite(eps) && eps > 0.0 && std::abs(confidence_residual(kind, eps, c)) <= 1e-12) {
    return eps;
  }
  return solve_epsilon_numeric(kind, c);
}

}  // namespace mollify
