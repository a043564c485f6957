#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "mollify/sampling.hpp"

namespace mollify {

using Vector = std::vector<double>;

/// A scalar function f(x; theta) with exact gradients.
///
/// Parameter access is optional: functions with param_dim() == 0 only support
/// input smoothing and throw CapabilityMissing from the parameter methods.
class DifferentiableFunction {
 public:
  virtual ~DifferentiableFunction() = default;

  virtual std::size_t input_dim() const = 0;
  virtual double eval(std::span<const double> x) const = 0;
  virtual Vector grad_input(std::span<const double> x) const = 0;

  virtual std::size_t param_dim() const { return 0; }
  virtual Vector params() const { return {}; }
  virtual Vector grad_params(std::span<const double> x) const;
  /// Copy of this function with parameters theta + delta.
  virtual std::unique_ptr<DifferentiableFunction> perturb_params(
      std::span<const double> delta) const;

  bool has_params() const { return param_dim() > 0; }
};

// ---------------------------------------------------------------------------
// Piecewise-linear toy function
//
//   f(x) = 0        x <= 0
//          2x       0 < x <= 1
//          4 - 2x   1 < x < 3/2
//          -1 + 2x  3/2 <= x < 3
//          8 - x    3 <= x < 4
//          4        x >= 4
//
// f is continuous except for a jump of +1 at x = 3/2.

double toy_eval(double x) noexcept;
/// Pointwise derivative away from the breakpoints (right-continuous choice
/// matching the branch intervals above).
double toy_derivative(double x) noexcept;
/// Closed-form Gaussian mollification (f * phi_eps)(x).
double toy_mollified(double x, double eps) noexcept;

inline constexpr std::array<double, 5> kToyBreakpoints = {0.0, 1.0, 1.5, 3.0, 4.0};

struct JumpDiscontinuity {
  double at;
  double size;  // f(at+) - f(at-)
};
inline constexpr std::array<JumpDiscontinuity, 1> kToyJumps = {JumpDiscontinuity{1.5, 1.0}};

class ToyFunction final : public DifferentiableFunction {
 public:
  std::size_t input_dim() const override { return 1; }
  double eval(std::span<const double> x) const override;
  Vector grad_input(std::span<const double> x) const override;
};

// ---------------------------------------------------------------------------
// Multi-layer perceptron

enum class Activation { relu, tanh };

std::string_view activation_name(Activation a) noexcept;
Activation parse_activation(std::string_view name);

/// Fully connected network with `activation` on hidden layers and a linear
/// output layer. `target` selects the scored output coordinate.
///
/// Parameters are flattened layer by layer as [W_0 (row-major, out x in),
/// b_0, W_1, b_1, ...]. ReLU uses subgradient 0 at the kink.
class MlpModel final : public DifferentiableFunction {
 public:
  MlpModel(std::vector<std::size_t> layer_dims, Activation activation,
           std::vector<Vector> weights, std::vector<Vector> biases, std::size_t target = 0);

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpModel initialize(std::vector<std::size_t> layer_dims, Activation activation,
                             RngState rng, std::size_t target = 0);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  Activation activation() const noexcept { return activation_; }
  const std::vector<Vector>& weights() const noexcept { return weights_; }
  const std::vector<Vector>& biases() const noexcept { return biases_; }
  std::size_t target() const noexcept { return target_; }
  std::size_t num_layers() const noexcept { return weights_.size(); }

  std::size_t input_dim() const override { return dims_.front(); }
  double eval(std::span<const double> x) const override;
  Vector grad_input(std::span<const double> x) const override;

  std::size_t param_dim() const override;
  Vector params() const override;
  Vector grad_params(std::span<const double> x) const override;
  std::unique_ptr<DifferentiableFunction> perturb_params(
      std::span<const double> delta) const override;

  /// Same architecture with parameters replaced by `theta`.
  MlpModel with_params(std::span<const double> theta) const;

  /// Full output vector (all coordinates of the last layer).
  Vector forward_all(std::span<const double> x) const;

  /// Both gradients of the target output in one backward pass.
  void gradients(std::span<const double> x, Vector* grad_x, Vector* grad_theta) const;

 private:
  struct Trace {
    std::vector<Vector> pre;   // pre-activations per layer
    std::vector<Vector> post;  // post[0] = input, post[l+1] = layer l output
  };
  Trace run(std::span<const double> x) const;
  void check_input(std::span<const double> x) const;

  std::vector<std::size_t> dims_;
  Activation activation_;
  std::vector<Vector> weights_;
  std::vector<Vector> biases_;
  std::size_t target_;
};

/// Structurally identical model with freshly initialized parameters.
MlpModel randomize_params(const MlpModel& model, RngState rng);

// ---------------------------------------------------------------------------
// Synthetic two-class data and training

struct Dataset {
  std::size_t dim = 0;
  std::vector<Vector> inputs;
  std::vector<int> labels;  // 0 or 1
};

/// Two isotropic Gaussian blobs (unit variance) centred at -mu and +mu with
/// mu = 1.5/sqrt(dim) per coordinate, `per_class` points each, interleaved by
/// class. Every input is offset by `shift` (empty = no shift).
Dataset make_blobs(std::size_t dim, std::size_t per_class, std::uint64_t seed,
                   std::span<const double> shift = {});

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 0.1;
};

/// Full-batch gradient descent on the logistic loss of the target output.
MlpModel train(const MlpModel& model, const Dataset& data, TrainOptions options = {});

/// Fraction of points whose sign(score) matches the label.
double accuracy(const MlpModel& model, const Dataset& data);

}  // namespace mollify
