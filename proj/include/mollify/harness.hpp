#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mollify/estimator.hpp"
#include "mollify/metrics.hpp"
#include "mollify/models.hpp"

namespace mollify {

/// How an explainer picks its smoothing scale. Epsilon comes from the
/// confidence pair (r, alpha); for the input leg r defaults to
/// max(x) - mean(x) of the explained input.
struct ExplainerSpec {
  SmoothingMode mode = SmoothingMode::sg;
  KernelKind kernel = KernelKind::gaussian;
  double alpha = 0.9;
  std::optional<double> input_radius;  // unset: max(x) - mean(x)
  double param_radius = 0.01;
  std::size_t n_input = 50;
  std::size_t n_params = 50;
  std::uint64_t seed = 0;
  ParamScaling param_scaling = ParamScaling::relative;
  std::optional<NanPolicy> nan_policy;
};

/// max(x) - mean(x); the default input confidence radius.
double default_input_radius(std::span<const double> x);

/// Smoothing config for explaining `x` (the input radius depends on x).
SmoothingConfig explainer_config(const ExplainerSpec& spec, std::span<const double> x,
                                 std::size_t case_id);

/// Seed for case `case_id` derived from a base seed.
std::uint64_t case_seed(std::uint64_t seed, std::size_t case_id) noexcept;

/// Explainer returning the Monte Carlo mollified gradient.
Explainer smoothing_explainer(ExplainerSpec spec);

/// Explainer returning the plain gradient.
Explainer gradient_explainer();

// ---------------------------------------------------------------------------
// Synthetic blobs: consistency and invariance

struct BlobsOptions {
  std::size_t dim = 16;
  std::size_t hidden = 16;
  std::size_t per_class = 200;
  std::size_t cases = 20;
  double shift = 1.0;  // constant offset added to every feature
  std::uint64_t seed = 2024;
  TrainOptions training{};
};

struct BlobsHarness {
  MlpModel trained;
  MlpModel randomized;
  MlpModel shifted_trained;  // same initialization, trained on data + shift
  Vector shift;
  std::vector<Vector> inputs;
  double train_accuracy = 0.0;
};

BlobsHarness make_blobs_harness(const BlobsOptions& options = {});

// ---------------------------------------------------------------------------
// Synthetic images: localization and sparseness
//
// Each image is rows x cols with one bright target bump (known box), dimmer
// distractor bumps, and pixel noise. The model is a fixed ReLU detector whose
// hidden units are Gaussian templates tiled over every pixel plus one always
// active unit with random weights. Only templates near the target clear the
// activation threshold.

struct ImageOptions {
  std::size_t rows = 12;
  std::size_t cols = 12;
  std::size_t cases = 20;
  std::size_t distractors = 2;
  double bump_width = 1.2;
  double box_half_width = 2.0;
  double pixel_noise = 0.05;
  double weight_noise = 0.05;
  std::uint64_t seed = 7;
  bool whole_grid_boxes = false;
};

struct ImageHarness {
  std::size_t rows = 0;
  std::size_t cols = 0;
  MlpModel detector;
  std::vector<Vector> images;
  std::vector<BoundingBox> boxes;
};

ImageHarness make_image_harness(const ImageOptions& options = {});

// ---------------------------------------------------------------------------
// Runners

MetricReport run_consistency(const BlobsHarness& h, const Explainer& e, unsigned threads = 1);
MetricReport run_invariance(const BlobsHarness& h, const Explainer& e, unsigned threads = 1);

struct ImageReports {
  MetricReport localization;
  MetricReport sparseness;
};

/// Explains each image once and scores the point game (top-k) and the Gini
/// index on the same saliency.
ImageReports run_image_metrics(const ImageHarness& h, const Explainer& e, std::size_t k = 5,
                               bool want_localization = true, bool want_sparseness = true,
                               unsigned threads = 1);

}  // namespace mollify
