#include "mollify/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mollify/error.hpp"
#include "mollify/model_io.hpp"
#include "mollify/oracle.hpp"

namespace mollify {
namespace {

TEST(Toy, PiecewiseValues) {
  EXPECT_EQ(toy_eval(-1.0), 0.0);
  EXPECT_EQ(toy_eval(0.0), 0.0);
  EXPECT_EQ(toy_eval(0.5), 1.0);
  EXPECT_EQ(toy_eval(1.0), 2.0);
  EXPECT_EQ(toy_eval(1.25), 1.5);
  EXPECT_EQ(toy_eval(2.0), 3.0);
  EXPECT_EQ(toy_eval(3.0), 5.0);
  EXPECT_EQ(toy_eval(3.5), 4.5);
  EXPECT_EQ(toy_eval(4.0), 4.0);
  EXPECT_EQ(toy_eval(10.0), 4.0);
}

TEST(Toy, JumpAtThreeHalves) {
  const double left = toy_eval(std::nextafter(1.5, 0.0));
  const double right = toy_eval(1.5);
  EXPECT_NEAR(right - left, kToyJumps[0].size, 1e-12);
  EXPECT_EQ(kToyJumps[0].at, 1.5);
}

TEST(Toy, DerivativeMatchesSlopes) {
  for (double x : {-1.0, 0.5, 1.25, 2.0, 3.5, 5.0}) {
    const double h = 1e-6;
    EXPECT_NEAR(toy_derivative(x), (toy_eval(x + h) - toy_eval(x - h)) / (2 * h), 1e-8) << x;
  }
}

TEST(Toy, MollifiedKnownValues) {
  // 30-digit evaluations of the closed form.
  EXPECT_NEAR(toy_mollified(2.0, 0.3), 2.9757661461747153886, 1e-14);
  EXPECT_NEAR(toy_mollified(2.0, 0.2), 2.9953935695712089507, 1e-14);
}

TEST(Toy, MollifiedMatchesQuadrature) {
  const PiecewiseFunction f = toy_piecewise();
  for (double eps : {0.1, 0.3, 1.0}) {
    const KernelSpec k(KernelKind::gaussian, eps);
    for (int i = 0; i <= 60; ++i) {
      const double x = -1.0 + 0.1 * i;
      const double q = mollify_quadrature(f, k, x, false, {.abs_tol = 1e-13}).value;
      EXPECT_NEAR(toy_mollified(x, eps), q, 1e-10) << "x=" << x << " eps=" << eps;
    }
  }
}

TEST(Toy, MollifiedApproachesToyAsEpsShrinks) {
  for (double x : {0.5, 2.0, 3.5}) {
    EXPECT_NEAR(toy_mollified(x, 1e-3), toy_eval(x), 1e-6);
  }
}

TEST(Toy, NoParameters) {
  ToyFunction f;
  EXPECT_FALSE(f.has_params());
  const Vector x{1.0};
  EXPECT_THROW(f.grad_params(x), CapabilityMissing);
  EXPECT_THROW(f.perturb_params(Vector{}), CapabilityMissing);
  EXPECT_THROW(f.eval(Vector{1.0, 2.0}), DimensionError);
}

MlpModel small_model(Activation act) {
  return MlpModel::initialize({3, 5, 4, 2}, act, {17, 0}, 1);
}

TEST(Mlp, LinearModelExact) {
  MlpModel m({2, 1}, Activation::relu, {{0.5, -0.25}}, {{0.125}});
  EXPECT_EQ(m.eval(Vector{2.0, 4.0}), 0.125);
  EXPECT_EQ(m.grad_input(Vector{7.0, -3.0}), (Vector{0.5, -0.25}));
  EXPECT_EQ(m.grad_params(Vector{2.0, 4.0}), (Vector{2.0, 4.0, 1.0}));
  EXPECT_EQ(m.params(), (Vector{0.5, -0.25, 0.125}));
}

TEST(Mlp, RejectsBadShapes) {
  EXPECT_THROW(MlpModel({2}, Activation::relu, {}, {}), DimensionError);
  EXPECT_THROW(MlpModel({2, 1}, Activation::relu, {{1.0}}, {{0.0}}), DimensionError);
  EXPECT_THROW(MlpModel({2, 1}, Activation::relu, {{1.0, 2.0}}, {{0.0}}, 1), DimensionError);
  MlpModel m({2, 1}, Activation::relu, {{1.0, 2.0}}, {{0.0}});
  EXPECT_THROW(m.eval(Vector{1.0}), DimensionError);
  EXPECT_THROW(m.with_params(Vector{1.0}), DimensionError);
}

class MlpGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(MlpGradient, InputGradientMatchesFiniteDifferences) {
  const MlpModel m = small_model(GetParam());
  const Vector x{0.3, -0.7, 1.1};
  const Vector g = m.grad_input(x);
  ASSERT_EQ(g.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    Vector xp = x, xm = x;
    const double h = 1e-6;
    xp[i] += h;
    xm[i] -= h;
    EXPECT_NEAR(g[i], (m.eval(xp) - m.eval(xm)) / (2 * h), 1e-7);
  }
}

TEST_P(MlpGradient, ParamGradientMatchesFiniteDifferences) {
  const MlpModel m = small_model(GetParam());
  const Vector x{0.3, -0.7, 1.1};
  const Vector g = m.grad_params(x);
  const Vector theta = m.params();
  ASSERT_EQ(g.size(), m.param_dim());
  ASSERT_EQ(m.param_dim(), 3u * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Vector tp = theta, tm = theta;
    const double h = 1e-6;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (m.with_params(tp).eval(x) - m.with_params(tm).eval(x)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-7) << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, MlpGradient,
                         ::testing::Values(Activation::relu, Activation::tanh));

TEST(Mlp, TargetSelectsOutput) {
  const MlpModel m = small_model(Activation::tanh);
  const Vector x{0.1, 0.2, 0.3};
  EXPECT_EQ(m.eval(x), m.forward_all(x)[1]);
}

TEST(Mlp, PerturbParamsAddsDelta) {
  const MlpModel m = small_model(Activation::relu);
  Vector delta(m.param_dim(), 0.0);
  delta.back() = 0.25;  // output bias of the target coordinate
  const auto p = m.perturb_params(delta);
  const Vector x{0.5, 0.5, 0.5};
  EXPECT_NEAR(p->eval(x), m.eval(x) + 0.25, 1e-15);
  EXPECT_EQ(m.with_params(m.params()).params(), m.params());
}

TEST(Mlp, InitializeIsSeededAndBounded) {
  const MlpModel a = MlpModel::initialize({4, 8, 1}, Activation::relu, {1, 0});
  const MlpModel b = MlpModel::initialize({4, 8, 1}, Activation::relu, {1, 0});
  const MlpModel c = MlpModel::initialize({4, 8, 1}, Activation::relu, {2, 0});
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
  for (double w : a.weights()[0]) EXPECT_LE(std::abs(w), 0.5);
  for (double w : a.weights()[1]) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(8.0));
  const MlpModel r = randomize_params(a, {9, 0});
  EXPECT_EQ(r.layer_dims(), a.layer_dims());
  EXPECT_NE(r.params(), a.params());
}

TEST(Blobs, ShapeAndBalance) {
  const Dataset d = make_blobs(4, 50, 3);
  EXPECT_EQ(d.dim, 4u);
  ASSERT_EQ(d.inputs.size(), 100u);
  for (std::size_t i = 0; i < d.labels.size(); ++i) EXPECT_EQ(d.labels[i], static_cast<int>(i % 2));
  const Dataset again = make_blobs(4, 50, 3);
  EXPECT_EQ(d.inputs, again.inputs);
  const Vector shift(4, 10.0);
  const Dataset moved = make_blobs(4, 50, 3, shift);
  EXPECT_NEAR(moved.inputs[7][2], d.inputs[7][2] + 10.0, 1e-12);
  EXPECT_THROW(make_blobs(4, 5, 3, Vector(3, 0.0)), DimensionError);
}

TEST(Training, LearnsSeparableBlobs) {
  const Dataset d = make_blobs(2, 100, 11);
  const MlpModel init = MlpModel::initialize({2, 8, 1}, Activation::tanh, {4, 0});
  const MlpModel trained = train(init, d, {.epochs = 100, .learning_rate = 0.2});
  EXPECT_GT(accuracy(trained, d), 0.8);
  EXPECT_GE(accuracy(trained, d), accuracy(init, d));
}

TEST(ModelIo, JsonRoundTrip) {
  const MlpModel m = small_model(Activation::tanh);
  const MlpModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.layer_dims(), m.layer_dims());
  EXPECT_EQ(back.target(), 1u);
  EXPECT_EQ(back.activation(), Activation::tanh);

  const auto path = std::filesystem::temp_directory_path() / "mollify_models_test.json";
  save_model(m, path);
  EXPECT_EQ(load_model(path).params(), m.params());
  std::filesystem::remove(path);
}

TEST(ModelIo, SchemaErrors) {
  using nlohmann::json;
  EXPECT_THROW(model_from_json(json::array()), ConfigInvalid);
  EXPECT_THROW(model_from_json(json{{"layer_dims", {2, 1}}}), ConfigInvalid);
  json j = model_to_json(MlpModel({2, 1}, Activation::relu, {{1.0, 2.0}}, {{0.0}}));
  j["activation"] = "gelu";
  EXPECT_THROW(model_from_json(j), ConfigInvalid);
  j["activation"] = "relu";
  j["weights"] = json::array({json::array({1.0})});
  EXPECT_THROW(model_from_json(j), DimensionError);
  j["weights"] = "oops";
  EXPECT_THROW(model_from_json(j), ConfigInvalid);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

}  // namespace
}  // namespace mollify
