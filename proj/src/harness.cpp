#include "mollify/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mollify/error.hpp"
#include "mollify/parallel.hpp"

namespace mollify {

double default_input_radius(std::span<const double> x) {
  if (x.empty()) throw DimensionError("empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  return mx - mean;
}

std::uint64_t case_seed(std::uint64_t seed, std::size_t case_id) noexcept {
  return RngState{seed, 0}.derive(case_id).seed;
}

SmoothingConfig explainer_config(const ExplainerSpec& spec, std::span<const double> x,
                                 std::size_t case_id) {
  SmoothingConfig cfg;
  cfg.mode = spec.mode;
  cfg.n_input = spec.n_input;
  cfg.n_params = spec.n_params;
  cfg.seed = case_seed(spec.seed, case_id);
  cfg.param_scaling = spec.param_scaling;
  cfg.nan_policy = spec.nan_policy;
  if (spec.mode != SmoothingMode::ng) {
    const double r = spec.input_radius ? *spec.input_radius : default_input_radius(x);
    cfg.kernel_input = KernelSpec(spec.kernel, solve_epsilon(spec.kernel, {r, spec.alpha}));
  }
  if (spec.mode != SmoothingMode::sg) {
    cfg.kernel_params =
        KernelSpec(spec.kernel, solve_epsilon(spec.kernel, {spec.param_radius, spec.alpha}));
  }
  return cfg;
}

Explainer smoothing_explainer(ExplainerSpec spec) {
  return [spec](const DifferentiableFunction& f, std::span<const double> x, std::size_t case_id) {
    return smooth_gradient(f, x, explainer_config(spec, x, case_id)).estimate;
  };
}

Explainer gradient_explainer() {
  return [](const DifferentiableFunction& f, std::span<const double> x, std::size_t) {
    return f.grad_input(x);
  };
}

BlobsHarness make_blobs_harness(const BlobsOptions& o) {
  const RngState root{o.seed, 0};
  const MlpModel init =
      MlpModel::initialize({o.dim, o.hidden, 1}, Activation::relu, root.derive(1));
  const Dataset data = make_blobs(o.dim, o.per_class, root.derive(2).seed);
  const Vector shift(o.dim, o.shift);
  const Dataset shifted = make_blobs(o.dim, o.per_class, root.derive(2).seed, shift);

  BlobsHarness h{train(init, data, o.training), randomize_params(init, root.derive(3)),
                 train(init, shifted, o.training), shift, {}, 0.0};
  h.train_accuracy = accuracy(h.trained, data);
  const std::size_t n = std::min(o.cases, data.inputs.size());
  h.inputs.assign(data.inputs.begin(), data.inputs.begin() + static_cast<std::ptrdiff_t>(n));
  return h;
}

ImageHarness make_image_harness(const ImageOptions& o) {
  if (o.rows < 5 || o.cols < 5) throw ConfigInvalid("image harness needs at least 5x5 images");
  const std::size_t pixels = o.rows * o.cols;
  const RngState root{o.seed, 0};
  const KernelSpec unit_gauss(KernelKind::gaussian, 1.0);
  const double two_w2 = 2.0 * o.bump_width * o.bump_width;

  auto bump = [&](double cr, double cc, double amp, Vector& img) {
    for (std::size_t r = 0; r < o.rows; ++r) {
      for (std::size_t c = 0; c < o.cols; ++c) {
        const double dr = static_cast<double>(r) - cr;
        const double dc = static_cast<double>(c) - cc;
        const double d2 = dr * dr + dc * dc;
        img[r * o.cols + c] += amp * std::exp(-d2 / two_w2);
      }
    }
  };

  // Detector: one template unit per pixel, normalized so a unit-amplitude
  // bump centred on it responds with 1; threshold 0.7 keeps distractors
  // (amplitude 0.5) silent.
  const std::size_t hidden = pixels + 1;
  Vector w1(hidden * pixels, 0.0), b1(hidden, 0.0);
  UniformStream weight_noise(root.derive(11), 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    Vector tmpl(pixels, 0.0);
    bump(static_cast<double>(p / o.cols), static_cast<double>(p % o.cols), 1.0, tmpl);
    double norm2 = 0.0;
    for (double v : tmpl) norm2 += v * v;
    for (std::size_t q = 0; q < pixels; ++q) {
      w1[p * pixels + q] =
          tmpl[q] / norm2 + o.weight_noise * unit_gauss.inv_cdf(weight_noise.next_open01());
    }
    b1[p] = -0.7;
  }
  for (std::size_t q = 0; q < pixels; ++q) {
    w1[pixels * pixels + q] = o.weight_noise * unit_gauss.inv_cdf(weight_noise.next_open01());
  }
  b1[pixels] = 5.0;
  Vector w2(hidden, 1.0), b2(1, 0.0);
  w2[pixels] = 0.5;

  ImageHarness h{o.rows, o.cols,
                 MlpModel({pixels, hidden, 1}, Activation::relu, {std::move(w1), std::move(w2)},
                          {std::move(b1), std::move(b2)}),
                 {}, {}};

  const auto margin = static_cast<std::uint64_t>(std::ceil(o.box_half_width));
  for (std::size_t i = 0; i < o.cases; ++i) {
    UniformStream s(root.derive(12), i);
    auto pick = [&](std::uint64_t lo, std::uint64_t hi_exclusive) {
      return lo + s.next_u64() % (hi_exclusive - lo);
    };
    const auto tr = pick(margin, o.rows - margin);
    const auto tc = pick(margin, o.cols - margin);
    Vector img(pixels, 0.0);
    bump(static_cast<double>(tr), static_cast<double>(tc), 1.0, img);
    for (std::size_t d = 0; d < o.distractors; ++d) {
      std::uint64_t dr = 0, dc = 0;
      for (int attempt = 0; attempt < 100; ++attempt) {
        dr = pick(0, o.rows);
        dc = pick(0, o.cols);
        const double ddr = static_cast<double>(dr) - static_cast<double>(tr);
        const double ddc = static_cast<double>(dc) - static_cast<double>(tc);
        const double dist2 = ddr * ddr + ddc * ddc;
        if (dist2 >= 16.0) break;
      }
      bump(static_cast<double>(dr), static_cast<double>(dc), 0.5, img);
    }
    for (double& v : img) v += o.pixel_noise * unit_gauss.inv_cdf(s.next_open01());
    h.images.push_back(std::move(img));

    BoundingBox box;
    if (o.whole_grid_boxes) {
      box = {0, o.rows - 1, 0, o.cols - 1};
    } else {
      const auto hw = static_cast<std::size_t>(o.box_half_width);
      box = {tr - std::min<std::size_t>(tr, hw), std::min(o.rows - 1, tr + hw),
             tc - std::min<std::size_t>(tc, hw), std::min(o.cols - 1, tc + hw)};
    }
    h.boxes.push_back(box);
  }
  return h;
}

MetricReport run_consistency(const BlobsHarness& h, const Explainer& e, unsigned threads) {
  return consistency_metric(e, h.trained, h.randomized, h.inputs, threads);
}

MetricReport run_invariance(const BlobsHarness& h, const Explainer& e, unsigned threads) {
  return invariance_metric(e, h.trained, h.shifted_trained, h.inputs, h.shift, threads);
}

ImageReports run_image_metrics(const ImageHarness& h, const Explainer& e, std::size_t k,
                               bool want_localization, bool want_sparseness, unsigned threads) {
  ImageReports out;
  out.localization.metric = "localization";
  out.sparseness.metric = "sparseness";
  const std::size_t n = h.images.size();
  out.localization.cases.resize(n);
  out.sparseness.cases.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    MetricCase& loc = out.localization.cases[i];
    MetricCase& sp = out.sparseness.cases[i];
    loc.input_id = sp.input_id = i;
    Saliency s;
    try {
      s.values = e(h.detector, h.images[i], i);
      s.shape = {h.rows, h.cols};
      s.validate();
    } catch (const std::exception& ex) {
      loc.failure = sp.failure = ex.what();
      return;
    }
    if (want_localization) {
      try {
        loc.value = point_game(s, h.boxes[i], k);
      } catch (const std::exception& ex) {
        loc.failure = ex.what();
      }
    }
    if (want_sparseness) {
      try {
        sp.value = gini(s.values);
      } catch (const AllZero&) {
        sp.degenerate = true;
      } catch (const std::exception& ex) {
        sp.failure = ex.what();
      }
    }
  });
  if (!want_localization) out.localization.cases.clear();
  if (!want_sparseness) out.sparseness.cases.clear();
  finalize_report(out.localization);
  finalize_report(out.sparseness);
  return out;
}

}  // namespace mollify
