#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace mollify {

enum class KernelKind { gaussian, poisson, hyperbolic, sigmoid, rect };

inline constexpr std::array<KernelKind, 5> kAllKernelKinds = {
    KernelKind::gaussian, KernelKind::poisson, KernelKind::hyperbolic,
    KernelKind::sigmoid, KernelKind::rect};

/// Lowercase wire name: "gaussian", "poisson", "hyperbolic", "sigmoid", "rect".
std::string_view kernel_name(KernelKind kind) noexcept;

/// Parses a wire name. Throws ConfigInvalid listing the valid names.
KernelKind parse_kernel_kind(std::string_view name);

/// One member phi_eps of a kernel's Dirac sequence: phi_eps(x) = phi(x/eps)/eps.
///
/// The Poisson kernel is the Cauchy density. It has no mean or variance and
/// its heavy tails smooth visibly differently from the other four kernels.
/// Only Rect is compactly supported; its support is the closed interval
/// [-eps, eps].
class KernelSpec {
 public:
  KernelSpec(KernelKind kind, double epsilon);

  KernelKind kind() const noexcept { return kind_; }
  double epsilon() const noexcept { return epsilon_; }

  double pdf(double x) const noexcept;
  double log_pdf(double x) const noexcept;
  double cdf(double x) const noexcept;
  /// Throws DomainError unless 0 < u < 1.
  double inv_cdf(double u) const;

  /// Product density over i.i.d. coordinates. Underflows for large n; use
  /// log_pdf_nd for weights.
  double pdf_nd(std::span<const double> x) const noexcept;
  double log_pdf_nd(std::span<const double> x) const noexcept;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  KernelKind kind_;
  double epsilon_;
};

/// Confidence requirement: a fraction alpha of the kernel mass lies in [-r, r].
struct ConfidenceSpec {
  double radius;
  double level;
};

/// cdf_eps(r) - cdf_eps(0) - alpha/2; zero at the epsilon matching `c`.
double confidence_residual(KernelKind kind, double epsilon, ConfidenceSpec c);

/// Epsilon such that alpha/2 = integral_0^r phi_eps. Uses the closed form when
/// its residual is below 1e-12 and falls back to bisection otherwise.
double solve_epsilon(KernelKind kind, ConfidenceSpec c);

/// Bisection on the monotone map eps -> cdf_eps(r). Ground truth for
/// solve_epsilon.
double solve_epsilon_numeric(KernelKind kind, ConfidenceSpec c);

/// Closed-form solution derived from each kernel's CDF.
double closed_form_epsilon(KernelKind kind, ConfidenceSpec c);

/// The closed forms as commonly printed for these kernels. Two of them differ
/// from the exact solution: Hyperbolic is printed as r/arctan(alpha) (exact:
/// r/artanh(alpha)) and Rect as 2r/alpha (exact: r/alpha).
double printed_closed_form_epsilon(KernelKind kind, ConfidenceSpec c);

}  // namespace mollify
