#include "mollify/models.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "mollify/error.hpp"
#include "mollify/specfun.hpp"

namespace mollify {

Vector DifferentiableFunction::grad_params(std::span<const double>) const {
  throw CapabilityMissing("function does not expose parameters");
}

std::unique_ptr<DifferentiableFunction> DifferentiableFunction::perturb_params(
    std::span<const double>) const {
  throw CapabilityMissing("function does not expose parameters");
}

// ---------------------------------------------------------------------------
// Toy function

double toy_eval(double x) noexcept {
  if (x <= 0.0) return 0.0;
  if (x <= 1.0) return 2.0 * x;
  if (x < 1.5) return 4.0 - 2.0 * x;
  if (x < 3.0) return -1.0 + 2.0 * x;
  if (x < 4.0) return 8.0 - x;
  return 4.0;
}

double toy_derivative(double x) noexcept {
  if (x <= 0.0) return 0.0;
  if (x <= 1.0) return 2.0;
  if (x < 1.5) return -2.0;
  if (x < 3.0) return 2.0;
  if (x < 4.0) return -1.0;
  return 0.0;
}

double toy_mollified(double x, double eps) noexcept {
  const double s = std::numbers::sqrt2 * eps;
  const double e2 = 2.0 * eps * eps;
  const double erf_m4 = specfun::erf((x - 4.0) / s);
  const double erf_m3 = specfun::erf((x - 3.0) / s);
  const double erf_m1 = specfun::erf((x - 1.0) / s);
  const double erf_0 = specfun::erf(x / s);
  const double erf_half = specfun::erf((2.0 * x - 3.0) / (2.0 * s));
  const double erf_half_neg = specfun::erf((3.0 - 2.0 * x) / (2.0 * s));
  const double gauss = 2.0 * std::exp(-x * x / e2) +
                       4.0 * std::exp(-(3.0 - 2.0 * x) * (3.0 - 2.0 * x) / (4.0 * e2)) +
                       std::exp(-(x - 4.0) * (x - 4.0) / e2) -
                       3.0 * std::exp(-(x - 3.0) * (x - 3.0) / e2) -
                       4.0 * std::exp(-(x - 1.0) * (x - 1.0) / e2);
  return 0.5 * (x - 4.0) * erf_m4 - 1.5 * (x - 3.0) * erf_m3 + 2.0 * erf_m1 +
         x * (-2.0 * erf_m1 + erf_0 + 2.0 * erf_half) + 2.5 * erf_half_neg +
         eps * gauss / std::sqrt(2.0 * std::numbers::pi) + 2.0 * std::sqrt(1.0 / (eps * eps)) * eps;
}

double ToyFunction::eval(std::span<const double> x) const {
  if (x.size() != 1) throw DimensionError("toy function takes a scalar input");
  return toy_eval(x[0]);
}

Vector ToyFunction::grad_input(std::span<const double> x) const {
  if (x.size() != 1) throw DimensionError("toy function takes a scalar input");
  return {toy_derivative(x[0])};
}

// ---------------------------------------------------------------------------
// MLP

std::string_view activation_name(Activation a) noexcept {
  return a == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigInvalid("unknown activation '" + std::string(name) + "'; valid: relu, tanh");
}

MlpModel::MlpModel(std::vector<std::size_t> layer_dims, Activation activation,
                   std::vector<Vector> weights, std::vector<Vector> biases, std::size_t target)
    : dims_(std::move(layer_dims)),
      activation_(activation),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      target_(target) {
  if (dims_.size() < 2) throw DimensionError("MLP needs at least input and output layers");
  for (std::size_t d : dims_) {
    if (d == 0) throw DimensionError("MLP layer widths must be >= 1");
  }
  const std::size_t layers = dims_.size() - 1;
  if (weights_.size() != layers || biases_.size() != layers) {
    throw DimensionError("MLP expects " + std::to_string(layers) + " weight and bias arrays");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (weights_[l].size() != dims_[l] * dims_[l + 1]) {
      throw DimensionError("MLP layer " + std::to_string(l) + " weight array has " +
                           std::to_string(weights_[l].size()) + " entries, expected " +
                           std::to_string(dims_[l] * dims_[l + 1]));
    }
    if (biases_[l].size() != dims_[l + 1]) {
      throw DimensionError("MLP layer " + std::to_string(l) + " bias array has wrong length");
    }
  }
  if (target_ >= dims_.back()) throw DimensionError("MLP target index out of range");
}

MlpModel MlpModel::initialize(std::vector<std::size_t> layer_dims, Activation activation,
                              RngState rng, std::size_t target) {
  if (layer_dims.size() < 2) throw DimensionError("MLP needs at least input and output layers");
  std::vector<Vector> w, b;
  UniformStream stream(rng, 0);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[l]));
    Vector wl(layer_dims[l] * layer_dims[l + 1]);
    Vector bl(layer_dims[l + 1]);
    for (double& v : wl) v = bound * (2.0 * stream.next_open01() - 1.0);
    for (double& v : bl) v = bound * (2.0 * stream.next_open01() - 1.0);
    w.push_back(std::move(wl));
    b.push_back(std::move(bl));
  }
  return MlpModel(std::move(layer_dims), activation, std::move(w), std::move(b), target);
}

void MlpModel::check_input(std::span<const double> x) const {
  if (x.size() != dims_.front()) {
    throw DimensionError("MLP input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(dims_.front()));
  }
}

MlpModel::Trace MlpModel::run(std::span<const double> x) const {
  check_input(x);
  Trace t;
  const std::size_t layers = num_layers();
  t.pre.resize(layers);
  t.post.resize(layers + 1);
  t.post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = dims_[l];
    const std::size_t out = dims_[l + 1];
    const Vector& a = t.post[l];
    Vector z(biases_[l]);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = weights_[l].data() + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * a[i];
      z[o] += acc;
    }
    Vector h(z);
    if (l + 1 < layers) {
      for (double& v : h) v = activation_ == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
    }
    t.pre[l] = std::move(z);
    t.post[l + 1] = std::move(h);
  }
  return t;
}

Vector MlpModel::forward_all(std::span<const double> x) const { return run(x).post.back(); }

double MlpModel::eval(std::span<const double> x) const { return run(x).post.back()[target_]; }

void MlpModel::gradients(std::span<const double> x, Vector* grad_x, Vector* grad_theta) const {
  const Trace t = run(x);
  const std::size_t layers = num_layers();
  // delta = d(output_target)/d(pre-activation of layer l)
  Vector delta(dims_.back(), 0.0);
  delta[target_] = 1.0;
  if (grad_theta) grad_theta->assign(param_dim(), 0.0);
  // Offsets of each layer's block in the flattened parameter vector.
  std::vector<std::size_t> offset(layers, 0);
  for (std::size_t l = 1; l < layers; ++l) {
    offset[l] = offset[l - 1] + dims_[l - 1] * dims_[l] + dims_[l];
  }
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = dims_[l];
    const std::size_t out = dims_[l + 1];
    if (l + 1 < layers) {
      for (std::size_t o = 0; o < out; ++o) {
        const double z = t.pre[l][o];
        if (activation_ == Activation::relu) {
          delta[o] = z > 0.0 ? delta[o] : 0.0;
        } else {
          const double th = t.post[l + 1][o];
          delta[o] *= 1.0 - th * th;
        }
      }
    }
    if (grad_theta) {
      double* gw = grad_theta->data() + offset[l];
      double* gb = gw + in * out;
      const Vector& a = t.post[l];
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] = delta[o] * a[i];
        gb[o] = delta[o];
      }
    }
    Vector prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = weights_[l].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
    }
    delta = std::move(prev);
  }
  if (grad_x) *grad_x = std::move(delta);
}

Vector MlpModel::grad_input(std::span<const double> x) const {
  Vector g;
  gradients(x, &g, nullptr);
  return g;
}

Vector MlpModel::grad_params(std::span<const double> x) const {
  Vector g;
  gradients(x, nullptr, &g);
  return g;
}

std::size_t MlpModel::param_dim() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) n += dims_[l] * dims_[l + 1] + dims_[l + 1];
  return n;
}

Vector MlpModel::params() const {
  Vector theta;
  theta.reserve(param_dim());
  for (std::size_t l = 0; l < num_layers(); ++l) {
    theta.insert(theta.end(), weights_[l].begin(), weights_[l].end());
    theta.insert(theta.end(), biases_[l].begin(), biases_[l].end());
  }
  return theta;
}

MlpModel MlpModel::with_params(std::span<const double> theta) const {
  if (theta.size() != param_dim()) {
    throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                         " entries, model expects " + std::to_string(param_dim()));
  }
  std::vector<Vector> w(num_layers()), b(num_layers());
  auto it = theta.begin();
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto nw = static_cast<std::ptrdiff_t>(dims_[l] * dims_[l + 1]);
    const auto nb = static_cast<std::ptrdiff_t>(dims_[l + 1]);
    w[l].assign(it, it + nw);
    it += nw;
    b[l].assign(it, it + nb);
    it += nb;
  }
  return MlpModel(dims_, activation_, std::move(w), std::move(b), target_);
}

std::unique_ptr<DifferentiableFunction> MlpModel::perturb_params(
    std::span<const double> delta) const {
  Vector theta = params();
  if (delta.size() != theta.size()) {
    throw DimensionError("parameter perturbation has wrong length");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += delta[i];
  return std::make_unique<MlpModel>(with_params(theta));
}

MlpModel randomize_params(const MlpModel& model, RngState rng) {
  return MlpModel::initialize(model.layer_dims(), model.activation(), rng, model.target());
}

// ---------------------------------------------------------------------------
// Data and training

Dataset make_blobs(std::size_t dim, std::size_t per_class, std::uint64_t seed,
                   std::span<const double> shift) {
  if (dim == 0) throw DimensionError("blobs need dimension >= 1");
  if (!shift.empty() && shift.size() != dim) throw DimensionError("shift has wrong length");
  const KernelSpec unit_gauss(KernelKind::gaussian, 1.0);
  const double mu = 1.5 / std::sqrt(static_cast<double>(dim));
  Dataset d;
  d.dim = dim;
  const RngState rng{seed, 0x626c6f6273ULL};  // "blobs"
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    UniformStream stream(rng, i);
    Vector x(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = (label == 1 ? mu : -mu) + unit_gauss.inv_cdf(stream.next_open01());
      if (!shift.empty()) x[j] += shift[j];
    }
    d.inputs.push_back(std::move(x));
    d.labels.push_back(label);
  }
  return d;
}

MlpModel train(const MlpModel& model, const Dataset& data, TrainOptions options) {
  if (data.inputs.empty()) throw ConfigInvalid("training set is empty");
  if (data.dim != model.input_dim()) throw DimensionError("dataset and model dimensions differ");
  Vector theta = model.params();
  MlpModel current = model;
  Vector grad_theta;
  const double inv_n = 1.0 / static_cast<double>(data.inputs.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Vector total(theta.size(), 0.0);
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
      const double y = data.labels[i] == 1 ? 1.0 : -1.0;
      const double s = current.eval(data.inputs[i]);
      // d/ds log(1 + exp(-y s)) = -y / (1 + exp(y s))
      const double dloss = -y / (1.0 + std::exp(y * s));
      current.gradients(data.inputs[i], nullptr, &grad_theta);
      for (std::size_t k = 0; k < theta.size(); ++k) total[k] += dloss * grad_theta[k];
    }
    for (std::size_t k = 0; k < theta.size(); ++k) {
      theta[k] -= options.learning_rate * inv_n * total[k];
    }
    current = current.with_params(theta);
  }
  return current;
}

double accuracy(const MlpModel& model, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const bool positive = model.eval(data.inputs[i]) > 0.0;
    if (positive == (data.labels[i] == 1)) ++hits;
  }
  return data.inputs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.inputs.size());
}

}  // namespace mollify
