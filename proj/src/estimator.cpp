#include "mollify/estimator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "mollify/error.hpp"
#include "mollify/parallel.hpp"

namespace mollify {

std::string_view mode_name(SmoothingMode m) noexcept {
  switch (m) {
    case SmoothingMode::sg: return "SG";
    case SmoothingMode::ng: return "NG";
    case SmoothingMode::fg: return "FG";
  }
  return "?";
}

SmoothingMode parse_mode(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "sg") return SmoothingMode::sg;
  if (lower == "ng") return SmoothingMode::ng;
  if (lower == "fg") return SmoothingMode::fg;
  throw ConfigInvalid("unknown smoothing mode '" + std::string(name) + "'; valid: SG, NG, FG");
}

std::string_view nan_policy_name(NanPolicy p) noexcept {
  return p == NanPolicy::error ? "error" : "drop";
}

NanPolicy parse_nan_policy(std::string_view name) {
  if (name == "error") return NanPolicy::error;
  if (name == "drop" || name == "drop_and_report") return NanPolicy::drop_and_report;
  throw ConfigInvalid("unknown nan policy '" + std::string(name) + "'; valid: error, drop");
}

std::string_view param_scaling_name(ParamScaling s) noexcept {
  return s == ParamScaling::relative ? "relative" : "absolute";
}

ParamScaling parse_param_scaling(std::string_view name) {
  if (name == "relative") return ParamScaling::relative;
  if (name == "absolute") return ParamScaling::absolute;
  throw ConfigInvalid("unknown parameter scaling '" + std::string(name) +
                      "'; valid: relative, absolute");
}

void SmoothingConfig::validate() const {
  const bool needs_input = mode != SmoothingMode::ng;
  const bool needs_params = mode != SmoothingMode::sg;
  if (needs_input && (!kernel_input || n_input == 0)) {
    throw ConfigInvalid(std::string(mode_name(mode)) +
                        " needs an input kernel and at least one input sample");
  }
  if (needs_params && (!kernel_params || n_params == 0)) {
    throw ConfigInvalid(std::string(mode_name(mode)) +
                        " needs a parameter kernel and at least one parameter sample");
  }
}

NanPolicy SmoothingConfig::effective_nan_policy() const noexcept {
  if (nan_policy) return *nan_policy;
  return mode == SmoothingMode::sg ? NanPolicy::error : NanPolicy::drop_and_report;
}

namespace {

// Per-sample contributions laid out as outer x inner x dim (parameter draws
// outermost). log_weights has outer x inner entries.
struct SampleValues {
  std::size_t outer = 1;
  std::size_t inner = 1;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<double> log_weights;
};

void check_point(const DifferentiableFunction& f, std::span<const double> x0) {
  if (x0.size() != f.input_dim()) {
    throw DimensionError("input has " + std::to_string(x0.size()) +
                         " features, function expects " + std::to_string(f.input_dim()));
  }
  for (double v : x0) {
    if (!std::isfinite(v)) throw ConfigInvalid("x0 must be finite");
  }
}

void check_input_batch(const SampleBatch& b, std::span<const double> x0) {
  if (b.dim != x0.size()) throw DimensionError("input sample batch dimension differs from x0");
}

void check_param_batch(const DifferentiableFunction& f, const SampleBatch& b) {
  if (!f.has_params()) {
    throw CapabilityMissing("parameter smoothing needs a function with parameter access");
  }
  if (b.dim != f.param_dim()) {
    throw DimensionError("parameter sample batch dimension differs from the model");
  }
}

// Perturbed copy of f for parameter draw k.
std::unique_ptr<DifferentiableFunction> perturbed(const DifferentiableFunction& f,
                                                  std::span<const double> theta,
                                                  const SampleBatch& params, std::size_t k,
                                                  ParamScaling scaling) {
  const auto t = params.point(k);
  Vector delta(t.begin(), t.end());
  if (scaling == ParamScaling::relative) {
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] *= std::abs(theta[j]);
  }
  return f.perturb_params(delta);
}

// x0 - t
Vector shifted(std::span<const double> x0, std::span<const double> t) {
  Vector x(x0.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = x0[j] - t[j];
  return x;
}

enum class Quantity { gradient, value };

SampleValues evaluate(const DifferentiableFunction& f, std::span<const double> x0,
                      const SampleBatch* inputs, const SampleBatch* params,
                      ParamScaling scaling, unsigned threads, Quantity what) {
  SampleValues s;
  s.outer = params ? params->count : 1;
  s.inner = inputs ? inputs->count : 1;
  s.dim = what == Quantity::gradient ? x0.size() : 1;
  const std::size_t total = s.outer * s.inner;
  s.values.assign(total * s.dim, 0.0);
  s.log_weights.assign(total, 0.0);

  std::vector<std::unique_ptr<DifferentiableFunction>> models;
  if (params) {
    const Vector theta = f.params();
    models.resize(s.outer);
    parallel_for(s.outer, threads, [&](std::size_t k) {
      models[k] = perturbed(f, theta, *params, k, scaling);
    });
  }
  parallel_for(total, threads, [&](std::size_t idx) {
    const std::size_t k = idx / s.inner;
    const std::size_t i = idx % s.inner;
    const DifferentiableFunction& fk = params ? *models[k] : f;
    const Vector x = inputs ? shifted(x0, inputs->point(i)) : Vector(x0.begin(), x0.end());
    double lw = 0.0;
    if (params) lw += params->log_weights[k];
    if (inputs) lw += inputs->log_weights[i];
    s.log_weights[idx] = lw;
    double* out = s.values.data() + idx * s.dim;
    if (what == Quantity::gradient) {
      const Vector g = fk.grad_input(x);
      std::copy(g.begin(), g.end(), out);
    } else {
      out[0] = fk.eval(x);
    }
  });
  return s;
}

// Weighted mean and standard error over the first n_outer x n_inner samples.
MollifiedGradient reduce(const SampleValues& s, std::size_t n_outer, std::size_t n_inner,
                         NanPolicy policy) {
  MollifiedGradient r;
  r.estimate.assign(s.dim, 0.0);
  std::vector<std::size_t> kept;
  kept.reserve(n_outer * n_inner);
  for (std::size_t k = 0; k < n_outer; ++k) {
    for (std::size_t i = 0; i < n_inner; ++i) {
      const std::size_t idx = k * s.inner + i;
      const double w = std::exp(s.log_weights[idx]);
      const double* v = s.values.data() + idx * s.dim;
      bool finite = std::isfinite(w);
      for (std::size_t j = 0; j < s.dim && finite; ++j) finite = std::isfinite(w * v[j]);
      if (!finite) {
        if (policy == NanPolicy::error) {
          throw NonFiniteGradient("non-finite gradient at sample " + std::to_string(idx));
        }
        ++r.n_dropped;
        continue;
      }
      kept.push_back(idx);
      for (std::size_t j = 0; j < s.dim; ++j) r.estimate[j] += w * v[j];
    }
  }
  r.n_used = kept.size();
  if (r.n_used == 0) throw NonFiniteGradient("every sample produced a non-finite gradient");
  const double n = static_cast<double>(r.n_used);
  for (double& e : r.estimate) e /= n;

  r.std_error.assign(s.dim, std::numeric_limits<double>::infinity());
  if (r.n_used >= 2) {
    Vector ss(s.dim, 0.0);
    for (std::size_t idx : kept) {
      const double w = std::exp(s.log_weights[idx]);
      const double* v = s.values.data() + idx * s.dim;
      for (std::size_t j = 0; j < s.dim; ++j) {
        const double d = w * v[j] - r.estimate[j];
        ss[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < s.dim; ++j) r.std_error[j] = std::sqrt(ss[j] / (n - 1.0) / n);
  }
  return r;
}

}  // namespace

MollifiedGradient input_smoothed_gradient(const DifferentiableFunction& f,
                                          std::span<const double> x0, const SampleBatch& inputs,
                                          NanPolicy policy, unsigned threads) {
  check_point(f, x0);
  check_input_batch(inputs, x0);
  const auto s = evaluate(f, x0, &inputs, nullptr, ParamScaling::absolute, threads,
                          Quantity::gradient);
  return reduce(s, 1, inputs.count, policy);
}

MollifiedGradient param_smoothed_gradient(const DifferentiableFunction& f,
                                          std::span<const double> x0, const SampleBatch& params,
                                          ParamScaling scaling, NanPolicy policy,
                                          unsigned threads) {
  check_point(f, x0);
  check_param_batch(f, params);
  const auto s = evaluate(f, x0, nullptr, &params, scaling, threads, Quantity::gradient);
  return reduce(s, params.count, 1, policy);
}

MollifiedGradient fused_smoothed_gradient(const DifferentiableFunction& f,
                                          std::span<const double> x0, const SampleBatch& inputs,
                                          const SampleBatch& params, ParamScaling scaling,
                                          NanPolicy policy, unsigned threads) {
  check_point(f, x0);
  check_input_batch(inputs, x0);
  check_param_batch(f, params);
  const auto s = evaluate(f, x0, &inputs, &params, scaling, threads, Quantity::gradient);
  return reduce(s, params.count, inputs.count, policy);
}

namespace {

struct Batches {
  std::optional<SampleBatch> inputs;
  std::optional<SampleBatch> params;
};

Batches draw_for(const DifferentiableFunction& f, std::span<const double> x0,
                 const SmoothingConfig& cfg, std::size_t n_input, std::size_t n_params) {
  cfg.validate();
  check_point(f, x0);
  Batches b;
  if (cfg.mode != SmoothingMode::sg && !f.has_params()) {
    throw CapabilityMissing(std::string(mode_name(cfg.mode)) +
                            " needs a function with parameter access");
  }
  if (cfg.mode != SmoothingMode::ng) {
    b.inputs = draw_batch(*cfg.kernel_input, x0.size(), n_input, cfg.input_rng(), cfg.threads);
  }
  if (cfg.mode != SmoothingMode::sg) {
    b.params = draw_batch(*cfg.kernel_params, f.param_dim(), n_params, cfg.param_rng(),
                          cfg.threads);
  }
  return b;
}

}  // namespace

MollifiedGradient smooth_gradient(const DifferentiableFunction& f, std::span<const double> x0,
                                  const SmoothingConfig& cfg) {
  const Batches b = draw_for(f, x0, cfg, cfg.n_input, cfg.n_params);
  const NanPolicy policy = cfg.effective_nan_policy();
  switch (cfg.mode) {
    case SmoothingMode::sg:
      return input_smoothed_gradient(f, x0, *b.inputs, policy, cfg.threads);
    case SmoothingMode::ng:
      return param_smoothed_gradient(f, x0, *b.params, cfg.param_scaling, policy, cfg.threads);
    case SmoothingMode::fg:
      return fused_smoothed_gradient(f, x0, *b.inputs, *b.params, cfg.param_scaling, policy,
                                     cfg.threads);
  }
  throw ConfigInvalid("unknown smoothing mode");
}

SmoothedValue smooth_value(const DifferentiableFunction& f, std::span<const double> x0,
                           const SmoothingConfig& cfg) {
  if (cfg.mode != SmoothingMode::sg) {
    throw ConfigInvalid("value smoothing supports SG mode only");
  }
  const Batches b = draw_for(f, x0, cfg, cfg.n_input, cfg.n_params);
  const auto s = evaluate(f, x0, &*b.inputs, nullptr, ParamScaling::absolute, cfg.threads,
                          Quantity::value);
  const MollifiedGradient r = reduce(s, 1, b.inputs->count, cfg.effective_nan_policy());
  return {r.estimate[0], r.std_error[0], r.n_used, r.n_dropped};
}

ConvergenceStudy convergence_study(const DifferentiableFunction& f, std::span<const double> x0,
                                   const SmoothingConfig& cfg,
                                   std::span<const std::size_t> schedule,
                                   std::optional<Vector> reference) {
  if (schedule.empty()) throw ConfigInvalid("convergence schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] == 0 || (i > 0 && schedule[i] <= schedule[i - 1])) {
      throw ConfigInvalid("convergence schedule must be strictly increasing and >= 1");
    }
  }
  if (reference && reference->size() != x0.size()) {
    throw DimensionError("reference has wrong dimension");
  }
  const std::size_t n_max = schedule.back();
  const bool schedule_on_params = cfg.mode == SmoothingMode::ng;
  const Batches b = draw_for(f, x0, cfg, schedule_on_params ? cfg.n_input : n_max,
                             schedule_on_params ? n_max : cfg.n_params);
  const auto s = evaluate(f, x0, b.inputs ? &*b.inputs : nullptr,
                          b.params ? &*b.params : nullptr, cfg.param_scaling, cfg.threads,
                          Quantity::gradient);
  const NanPolicy policy = cfg.effective_nan_policy();

  ConvergenceStudy study;
  for (std::size_t n : schedule) {
    ConvergenceRow row;
    row.n = n;
    row.result = schedule_on_params ? reduce(s, n, 1, policy) : reduce(s, s.outer, n, policy);
    study.rows.push_back(std::move(row));
  }
  study.reference_is_external = reference.has_value();
  study.reference = reference ? *reference : study.rows.back().result.estimate;
  for (auto& row : study.rows) {
    row.error_vs_reference.resize(x0.size());
    for (std::size_t j = 0; j < x0.size(); ++j) {
      row.error_vs_reference[j] = std::abs(row.result.estimate[j] - study.reference[j]);
    }
  }
  return study;
}

}  // namespace mollify
