#pragma once

// Scalar special functions used by the kernels and the epsilon solver.
// All functions are pure and thread-safe.

namespace mollify::specfun {

/// Error function. Total on finite inputs, odd, strictly increasing.
double erf(double x) noexcept;

/// Complementary error function 1 - erf(x), accurate in the right tail.
double erfc(double x) noexcept;

/// Inverse error function on (-1, 1). Throws DomainError for |y| >= 1.
///
/// A rational starting guess is refined by two Newton steps on erf, so the
/// result satisfies erf(erfinv(y)) = y to about 1e-15 relative.
double erfinv(double y);

/// Inverse hyperbolic tangent on (-1, 1). Throws DomainError for |y| >= 1.
double artanh(double y);

}  // namespace mollify::specfun
