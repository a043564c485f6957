#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mollify/kernels.hpp"
#include "mollify/models.hpp"

namespace mollify {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

struct QuadratureOptions {
  double abs_tol = 1e-11;
  double rel_tol = 0.0;
  std::size_t max_evaluations = 4'000'000;
};

/// Globally adaptive 15-point Gauss-Kronrod quadrature. `breakpoints` are
/// sorted; the first and last are the integration limits and every interior
/// point starts a new panel (place kinks and jumps there). Throws
/// ConvergenceFailure if the tolerance is not met within the budget.
QuadratureResult integrate(const std::function<double(double)>& fn,
                           std::span<const double> breakpoints, const QuadratureOptions& opts = {});

/// Iterated 2-D quadrature over a tensor-product panel grid. The evaluation
/// budget covers all inner integrals together.
QuadratureResult integrate_2d(const std::function<double(double, double)>& fn,
                              std::span<const double> x_breaks, std::span<const double> y_breaks,
                              const QuadratureOptions& opts = {});

/// Half-width T = 1.1 * inv_cdf(1 - 1e-12) of the truncated kernel domain.
double truncation_radius(const KernelSpec& k);

/// Panel boundaries for integrating phi_eps over [-T, T]: 0, +-eps*10^m
/// (geometric, for heavy tails) and the Rect support edges.
std::vector<double> kernel_panels(const KernelSpec& k);

/// A scalar function with known non-smooth points, for the 1-D oracle.
struct PiecewiseFunction {
  std::function<double(double)> value;
  /// Pointwise derivative where it exists.
  std::function<double(double)> derivative;
  std::vector<double> kinks;
  std::vector<JumpDiscontinuity> jumps;
};

PiecewiseFunction toy_piecewise();

/// integral f(x - t) phi_eps(t) dt, or with f' in place of f when
/// `derivative` is set. Tails beyond truncation_radius are dropped.
QuadratureResult mollify_quadrature(const PiecewiseFunction& f, const KernelSpec& k, double x,
                                    bool derivative, const QuadratureOptions& opts = {});

/// The same convolution written as integral f(t) phi_eps(x - t) dt.
QuadratureResult mollify_quadrature_swapped(const PiecewiseFunction& f, const KernelSpec& k,
                                            double x, const QuadratureOptions& opts = {});

/// d/dx (f * phi_eps)(x) computed as (f' * phi_eps)(x) plus one term
/// size * phi_eps(x - at) per jump of f.
double mollified_derivative(const PiecewiseFunction& f, const KernelSpec& k, double x,
                            const QuadratureOptions& opts = {});

/// Quadrature reference for (g * phi_eps)(x0) with g = grad f, for inputs of
/// dimension 1 or 2 (DimensionError otherwise). `kinks` adds panel
/// boundaries in the 1-D case.
Vector mollified_gradient_quadrature(const DifferentiableFunction& f, std::span<const double> x0,
                                     const KernelSpec& k, const QuadratureOptions& opts = {},
                                     std::span<const double> kinks = {});

struct LemmaCase {
  double x = 0.0;
  double commutativity = 0.0;           // |(f*phi)(x) - (phi*f)(x)|
  double derivative_interchange = 0.0;  // |d/dx (f*phi)(x) - (f'*phi)(x)|
};

struct LemmaReport {
  double epsilon = 0.0;
  std::vector<LemmaCase> cases;
  double commutativity_max = 0.0;
  double derivative_interchange_max = 0.0;
  double dirac_epsilon = 0.0;
  double dirac_limit = 0.0;             // |(f*phi_small)(2) - f(2)|
  double dirac_derivative_limit = 0.0;  // |(f'*phi_small)(2) - f'(2)|
};

/// Numerical checks of the convolution identities on the toy function with a
/// Gaussian kernel (eps = 0.3) at x in {0.5, 2, 3.5}, derivative by central
/// differences with step 1e-4, and the small-eps limit at eps = 1e-3.
LemmaReport lemma_checks();

}  // namespace mollify
