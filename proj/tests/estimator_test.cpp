#include "mollify/estimator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mollify/error.hpp"

namespace mollify {
namespace {

// Oracle values of (toy' * phi_eps)(x0), Gaussian eps = 0.3, 30 digits.
constexpr double kToyGrad1 = 0.19030328838561338241;
constexpr double kToyGrad2 = 1.8092676512288540814;

SmoothingConfig sg_config(KernelKind kind, double eps, std::size_t n, std::uint64_t seed = 1) {
  SmoothingConfig cfg;
  cfg.mode = SmoothingMode::sg;
  cfg.kernel_input = KernelSpec(kind, eps);
  cfg.n_input = n;
  cfg.seed = seed;
  return cfg;
}

MlpModel linear_model() {
  // Dyadic weights: every product and partial sum is exact in binary64.
  return MlpModel({2, 1}, Activation::relu, {{0.5, -0.25}}, {{0.125}});
}

class NanBelowZero final : public DifferentiableFunction {
 public:
  std::size_t input_dim() const override { return 1; }
  double eval(std::span<const double> x) const override { return x[0]; }
  Vector grad_input(std::span<const double> x) const override {
    return {x[0] < 0.0 ? std::numeric_limits<double>::quiet_NaN() : 1.0};
  }
};

TEST(Names, ParseRoundTrip) {
  for (auto m : {SmoothingMode::sg, SmoothingMode::ng, SmoothingMode::fg}) {
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  }
  EXPECT_EQ(parse_mode("fg"), SmoothingMode::fg);
  EXPECT_THROW(parse_mode("XG"), ConfigInvalid);
  EXPECT_EQ(parse_nan_policy("drop"), NanPolicy::drop_and_report);
  EXPECT_EQ(parse_nan_policy("error"), NanPolicy::error);
  EXPECT_THROW(parse_nan_policy("ignore"), ConfigInvalid);
  EXPECT_EQ(parse_param_scaling(param_scaling_name(ParamScaling::absolute)),
            ParamScaling::absolute);
}

TEST(Config, Validation) {
  SmoothingConfig cfg;
  EXPECT_THROW(cfg.validate(), ConfigInvalid);
  cfg.kernel_input = KernelSpec(KernelKind::gaussian, 1.0);
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_input = 0;
  EXPECT_THROW(cfg.validate(), ConfigInvalid);
  cfg.n_input = 10;
  cfg.mode = SmoothingMode::ng;
  EXPECT_THROW(cfg.validate(), ConfigInvalid);
  cfg.kernel_params = KernelSpec(KernelKind::gaussian, 0.1);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.effective_nan_policy(), NanPolicy::drop_and_report);
  cfg.mode = SmoothingMode::sg;
  EXPECT_EQ(cfg.effective_nan_policy(), NanPolicy::error);
  EXPECT_NE(cfg.input_rng(), cfg.param_rng());
}

TEST(InputSmoothing, LinearFunctionIsExact) {
  const MlpModel f = linear_model();
  const Vector x0{0.3, -1.7};
  for (KernelKind kind : kAllKernelKinds) {
    for (std::size_t n : {1u, 7u, 1000u}) {
      const auto r = smooth_gradient(f, x0, sg_config(kind, 2.5, n));
      EXPECT_EQ(r.estimate, (Vector{0.5, -0.25})) << kernel_name(kind) << " " << n;
      EXPECT_EQ(r.n_used, n);
    }
  }
}

TEST(InputSmoothing, MatchesManualSum) {
  ToyFunction f;
  const Vector x0{1.2};
  const KernelSpec k(KernelKind::sigmoid, 0.4);
  const SampleBatch b = draw_batch(k, 1, 64, {5, 0});
  double sum = 0.0;
  for (std::size_t i = 0; i < b.count; ++i) sum += toy_derivative(x0[0] - b.point(i)[0]);
  const auto r = input_smoothed_gradient(f, x0, b, NanPolicy::error);
  EXPECT_DOUBLE_EQ(r.estimate[0], sum / 64.0);
}

TEST(InputSmoothing, UnbiasedOnToy) {
  ToyFunction f;
  for (auto [x, expected] : {std::pair{1.0, kToyGrad1}, std::pair{2.0, kToyGrad2}}) {
    const auto r = smooth_gradient(f, Vector{x}, sg_config(KernelKind::gaussian, 0.3, 40000, 3));
    EXPECT_LT(std::abs(r.estimate[0] - expected), 4.0 * r.std_error[0]) << x;
    EXPECT_LT(r.std_error[0], 0.02);
  }
}

TEST(InputSmoothing, StandardErrorDefinition) {
  ToyFunction f;
  const Vector x0{1.2};
  const KernelSpec k(KernelKind::gaussian, 0.5);
  const SampleBatch b = draw_batch(k, 1, 200, {9, 0});
  const auto r = input_smoothed_gradient(f, x0, b, NanPolicy::error);
  double mean = 0.0;
  for (std::size_t i = 0; i < b.count; ++i) mean += toy_derivative(x0[0] - b.point(i)[0]);
  mean /= 200.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < b.count; ++i) {
    const double d = toy_derivative(x0[0] - b.point(i)[0]) - mean;
    ss += d * d;
  }
  EXPECT_NEAR(r.std_error[0], std::sqrt(ss / 199.0) / std::sqrt(200.0), 1e-14);

  const auto one = smooth_gradient(f, x0, sg_config(KernelKind::gaussian, 0.5, 1));
  EXPECT_FALSE(one.std_error_known());
  EXPECT_TRUE(std::isinf(one.std_error[0]));
}

TEST(Determinism, SameSeedSameResultAcrossThreads) {
  const MlpModel f = MlpModel::initialize({3, 6, 1}, Activation::tanh, {3, 0});
  const Vector x0{0.1, 0.2, -0.3};
  for (SmoothingMode mode : {SmoothingMode::sg, SmoothingMode::ng, SmoothingMode::fg}) {
    SmoothingConfig cfg;
    cfg.mode = mode;
    cfg.kernel_input = KernelSpec(KernelKind::poisson, 0.2);
    cfg.kernel_params = KernelSpec(KernelKind::gaussian, 0.05);
    cfg.n_input = 37;
    cfg.n_params = 13;
    cfg.seed = 77;
    const auto base = smooth_gradient(f, x0, cfg);
    for (unsigned t : {2u, 4u}) {
      cfg.threads = t;
      const auto r = smooth_gradient(f, x0, cfg);
      EXPECT_EQ(r.estimate, base.estimate) << mode_name(mode) << " threads=" << t;
      EXPECT_EQ(r.std_error, base.std_error);
    }
    cfg.threads = 1;
    cfg.seed = 78;
    EXPECT_NE(smooth_gradient(f, x0, cfg).estimate, base.estimate);
  }
}

TEST(ParamSmoothing, RequiresParameters) {
  ToyFunction f;
  SmoothingConfig cfg;
  cfg.mode = SmoothingMode::ng;
  cfg.kernel_params = KernelSpec(KernelKind::gaussian, 0.1);
  EXPECT_THROW(smooth_gradient(f, Vector{1.0}, cfg), CapabilityMissing);
  cfg.mode = SmoothingMode::fg;
  cfg.kernel_input = KernelSpec(KernelKind::gaussian, 0.1);
  EXPECT_THROW(smooth_gradient(f, Vector{1.0}, cfg), CapabilityMissing);
}

TEST(ParamSmoothing, RelativeScalingOnLinearModel) {
  // grad_x of w.x + b is w; relative noise gives w_j (1 + t_j), mean w_j.
  const MlpModel f = linear_model();
  const Vector x0{1.0, 1.0};
  const KernelSpec k(KernelKind::gaussian, 0.2);
  const SampleBatch b = draw_batch(k, 3, 20000, {4, 1});
  const auto r = param_smoothed_gradient(f, x0, b, ParamScaling::relative, NanPolicy::error);
  EXPECT_LT(std::abs(r.estimate[0] - 0.5), 4 * r.std_error[0]);
  EXPECT_LT(std::abs(r.estimate[1] + 0.25), 4 * r.std_error[1]);
  EXPECT_NEAR(r.std_error[0], 0.5 * 0.2 / std::sqrt(20000.0), 2e-4);

  double manual = 0.0;
  for (std::size_t k2 = 0; k2 < b.count; ++k2) manual += 0.5 + 0.5 * b.point(k2)[0];
  EXPECT_NEAR(r.estimate[0], manual / 20000.0, 1e-14);

  const auto a = param_smoothed_gradient(f, x0, b, ParamScaling::absolute, NanPolicy::error);
  EXPECT_NEAR(a.std_error[0], 0.2 / std::sqrt(20000.0), 2e-4);
}

TEST(ParamSmoothing, ZeroParametersStayFixedUnderRelativeScaling) {
  const MlpModel f({2, 1}, Activation::relu, {{0.0, 1.0}}, {{0.0}});
  const SampleBatch b = draw_batch(KernelSpec(KernelKind::poisson, 1.0), 3, 50, {2, 1});
  const auto r = param_smoothed_gradient(f, Vector{1.0, 1.0}, b, ParamScaling::relative,
                                         NanPolicy::error);
  EXPECT_EQ(r.estimate[0], 0.0);
  EXPECT_EQ(r.std_error[0], 0.0);
}

TEST(FusedSmoothing, MatchesManualDoubleSum) {
  const MlpModel f = MlpModel::initialize({2, 4, 1}, Activation::tanh, {8, 0});
  const Vector x0{0.4, -0.2};
  const SampleBatch in = draw_batch(KernelSpec(KernelKind::hyperbolic, 0.3), 2, 9, {1, 0});
  const SampleBatch pa = draw_batch(KernelSpec(KernelKind::gaussian, 0.05), f.param_dim(), 5, {1, 1});
  const auto r = fused_smoothed_gradient(f, x0, in, pa, ParamScaling::relative, NanPolicy::error);
  EXPECT_EQ(r.n_used, 45u);
  const Vector theta = f.params();
  Vector sum(2, 0.0);
  for (std::size_t k = 0; k < pa.count; ++k) {
    Vector th = theta;
    for (std::size_t j = 0; j < th.size(); ++j) th[j] += std::abs(theta[j]) * pa.point(k)[j];
    const MlpModel fk = f.with_params(th);
    for (std::size_t i = 0; i < in.count; ++i) {
      const Vector x{x0[0] - in.point(i)[0], x0[1] - in.point(i)[1]};
      const Vector g = fk.grad_input(x);
      sum[0] += g[0];
      sum[1] += g[1];
    }
  }
  EXPECT_NEAR(r.estimate[0], sum[0] / 45.0, 1e-14);
  EXPECT_NEAR(r.estimate[1], sum[1] / 45.0, 1e-14);
}

TEST(NanPolicy, ErrorAndDrop) {
  NanBelowZero f;
  const Vector x0{0.0};
  auto cfg = sg_config(KernelKind::gaussian, 1.0, 100);
  EXPECT_THROW(smooth_gradient(f, x0, cfg), NonFiniteGradient);
  cfg.nan_policy = NanPolicy::drop_and_report;
  const auto r = smooth_gradient(f, x0, cfg);
  EXPECT_EQ(r.n_used + r.n_dropped, 100u);
  EXPECT_GT(r.n_dropped, 20u);
  EXPECT_GT(r.n_used, 20u);
  EXPECT_EQ(r.estimate[0], 1.0);
  // Every sample dropped.
  auto far = sg_config(KernelKind::rect, 0.5, 10);
  far.nan_policy = NanPolicy::drop_and_report;
  EXPECT_THROW(smooth_gradient(f, Vector{-5.0}, far), NonFiniteGradient);
}

TEST(Errors, DimensionsAndNonFiniteInput) {
  const MlpModel f = linear_model();
  const auto cfg = sg_config(KernelKind::gaussian, 1.0, 10);
  EXPECT_THROW(smooth_gradient(f, Vector{1.0}, cfg), DimensionError);
  EXPECT_THROW(smooth_gradient(f, Vector{1.0, NAN}, cfg), ConfigInvalid);
  const SampleBatch b = draw_batch(KernelSpec(KernelKind::gaussian, 1.0), 3, 5, {1, 0});
  EXPECT_THROW(input_smoothed_gradient(f, Vector{1.0, 2.0}, b, NanPolicy::error), DimensionError);
}

TEST(SmoothValue, MatchesClosedForm) {
  ToyFunction f;
  const auto r = smooth_value(f, Vector{2.0}, sg_config(KernelKind::gaussian, 0.3, 40000, 5));
  EXPECT_LT(std::abs(r.estimate - toy_mollified(2.0, 0.3)), 4 * r.std_error);
  SmoothingConfig ng;
  ng.mode = SmoothingMode::ng;
  ng.kernel_params = KernelSpec(KernelKind::gaussian, 0.1);
  EXPECT_THROW(smooth_value(f, Vector{2.0}, ng), ConfigInvalid);
}

TEST(Convergence, RowsMatchIndependentRuns) {
  ToyFunction f;
  const Vector x0{1.0};
  const auto cfg = sg_config(KernelKind::gaussian, 0.3, 1, 12);
  const std::vector<std::size_t> schedule{10, 100, 1000};
  const auto study = convergence_study(f, x0, cfg, schedule, Vector{kToyGrad1});
  ASSERT_EQ(study.rows.size(), 3u);
  EXPECT_TRUE(study.reference_is_external);
  for (const auto& row : study.rows) {
    auto single = cfg;
    single.n_input = row.n;
    EXPECT_EQ(row.result.estimate, smooth_gradient(f, x0, single).estimate);
    EXPECT_EQ(row.error_vs_reference[0], std::abs(row.result.estimate[0] - kToyGrad1));
  }
  const auto internal = convergence_study(f, x0, cfg, schedule);
  EXPECT_FALSE(internal.reference_is_external);
  EXPECT_EQ(internal.rows.back().error_vs_reference[0], 0.0);
}

TEST(Convergence, ScheduleValidation) {
  ToyFunction f;
  const auto cfg = sg_config(KernelKind::gaussian, 0.3, 1);
  const std::vector<std::size_t> bad{10, 10};
  EXPECT_THROW(convergence_study(f, Vector{1.0}, cfg, bad), ConfigInvalid);
  const std::vector<std::size_t> zero{0, 5};
  EXPECT_THROW(convergence_study(f, Vector{1.0}, cfg, zero), ConfigInvalid);
  EXPECT_THROW(convergence_study(f, Vector{1.0}, cfg, std::vector<std::size_t>{}), ConfigInvalid);
  const std::vector<std::size_t> ok{5};
  EXPECT_THROW(convergence_study(f, Vector{1.0}, cfg, ok, Vector{1.0, 2.0}), DimensionError);
}

TEST(Convergence, ParamScheduleForNg) {
  const MlpModel f = MlpModel::initialize({2, 3, 1}, Activation::tanh, {6, 0});
  SmoothingConfig cfg;
  cfg.mode = SmoothingMode::ng;
  cfg.kernel_params = KernelSpec(KernelKind::gaussian, 0.05);
  cfg.seed = 3;
  const std::vector<std::size_t> schedule{4, 16};
  const auto study = convergence_study(f, Vector{0.1, 0.1}, cfg, schedule);
  for (const auto& row : study.rows) {
    auto single = cfg;
    single.n_params = row.n;
    EXPECT_EQ(row.result.n_used, row.n);
    EXPECT_EQ(row.result.estimate, smooth_gradient(f, Vector{0.1, 0.1}, single).estimate);
  }
}

}  // namespace
}  // namespace mollify
