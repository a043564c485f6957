#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mollify/kernels.hpp"
#include "mollify/models.hpp"
#include "mollify/sampling.hpp"

namespace mollify {

/// Which argument of f(x; theta) is smoothed: input (SG), parameters (NG) or
/// both (FG).
enum class SmoothingMode { sg, ng, fg };

enum class NanPolicy { error, drop_and_report };

/// How a parameter-leg draw t becomes a perturbation. Relative: theta_j +
/// |theta_j| t_j (multiplicative noise). Absolute: theta_j + t_j.
enum class ParamScaling { relative, absolute };

std::string_view mode_name(SmoothingMode m) noexcept;  // "SG", "NG", "FG"
SmoothingMode parse_mode(std::string_view name);        // case-insensitive
std::string_view nan_policy_name(NanPolicy p) noexcept;  // "error", "drop"
NanPolicy parse_nan_policy(std::string_view name);
std::string_view param_scaling_name(ParamScaling s) noexcept;
ParamScaling parse_param_scaling(std::string_view name);

struct SmoothingConfig {
  SmoothingMode mode = SmoothingMode::sg;
  std::optional<KernelSpec> kernel_input;
  std::optional<KernelSpec> kernel_params;
  std::size_t n_input = 50;
  std::size_t n_params = 50;
  std::uint64_t seed = 0;
  /// Unset means `error` for SG and `drop_and_report` for NG/FG.
  std::optional<NanPolicy> nan_policy;
  ParamScaling param_scaling = ParamScaling::relative;
  unsigned threads = 1;

  /// Throws ConfigInvalid when the mode's kernels or counts are missing.
  void validate() const;
  NanPolicy effective_nan_policy() const noexcept;
  /// Streams for the input and parameter legs.
  RngState input_rng() const noexcept { return {seed, 0}; }
  RngState param_rng() const noexcept { return {seed, 1}; }
};

/// Monte Carlo estimate of the mollified gradient g_eps(x0).
struct MollifiedGradient {
  Vector estimate;
  /// Per-component sample standard deviation / sqrt(n_used). +inf when
  /// n_used < 2 (unknown).
  Vector std_error;
  std::size_t n_used = 0;
  std::size_t n_dropped = 0;

  bool std_error_known() const noexcept { return n_used >= 2; }
};

struct SmoothedValue {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_used = 0;
  std::size_t n_dropped = 0;
};

// Estimators on explicit sample batches. These are the building blocks of
// smooth_gradient and let callers share samples between methods.
//
//   input:  (1/N) sum_i w_i g(x0 - t_i)
//   params: (1/M) sum_k w_k g(x0; theta + s(t_k))
//   fused:  (1/(M N)) sum_k sum_i w_k w_i g(x0 - t_i; theta + s(t_k))
//
// with w = exp(log_weight) and s the parameter scaling. Sums run in sample
// index order (parameter draws outermost), independent of `threads`.

MollifiedGradient input_smoothed_gradient(const DifferentiableFunction& f,
                                          std::span<const double> x0, const SampleBatch& inputs,
                                          NanPolicy policy, unsigned threads = 1);

MollifiedGradient param_smoothed_gradient(const DifferentiableFunction& f,
                                          std::span<const double> x0, const SampleBatch& params,
                                          ParamScaling scaling, NanPolicy policy,
                                          unsigned threads = 1);

MollifiedGradient fused_smoothed_gradient(const DifferentiableFunction& f,
                                          std::span<const double> x0, const SampleBatch& inputs,
                                          const SampleBatch& params, ParamScaling scaling,
                                          NanPolicy policy, unsigned threads = 1);

/// Draws the batches named by `cfg` and runs the matching estimator.
/// Errors: ConfigInvalid, DimensionError, CapabilityMissing (NG/FG without
/// parameters), NonFiniteGradient (policy error, or every sample dropped).
MollifiedGradient smooth_gradient(const DifferentiableFunction& f, std::span<const double> x0,
                                  const SmoothingConfig& cfg);

/// Monte Carlo estimate of the mollified value f_eps(x0). SG mode only.
SmoothedValue smooth_value(const DifferentiableFunction& f, std::span<const double> x0,
                           const SmoothingConfig& cfg);

struct ConvergenceRow {
  std::size_t n = 0;
  MollifiedGradient result;
  Vector error_vs_reference;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  Vector reference;
  /// False when the reference is the largest-N estimate.
  bool reference_is_external = false;
};

/// Evaluates the estimator on nested sample prefixes, one row per entry of
/// `schedule` (strictly increasing, >= 1). The schedule sets N for SG, M for
/// NG, and the input count N for FG (M stays at cfg.n_params). Without a
/// reference the largest-N estimate is used.
ConvergenceStudy convergence_study(const DifferentiableFunction& f, std::span<const double> x0,
                                   const SmoothingConfig& cfg,
                                   std::span<const std::size_t> schedule,
                                   std::optional<Vector> reference = std::nullopt);

}  // namespace mollify
