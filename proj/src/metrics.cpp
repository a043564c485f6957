#include "mollify/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mollify/error.hpp"
#include "mollify/parallel.hpp"

namespace mollify {

void Saliency::validate() const {
  if (!shape.empty()) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != values.size()) throw DimensionError("saliency shape does not match its length");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigInvalid("saliency values must be finite");
  }
}

Vector average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vector ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman inputs differ in length");
  if (a.size() < 2) throw DimensionError("spearman needs at least two observations");
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  // Average ranks always have mean (n + 1) / 2.
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    throw DegenerateInput("spearman is undefined for a constant input");
  }
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double gini(std::span<const double> v) {
  if (v.empty()) throw DimensionError("gini of an empty vector");
  Vector a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
  std::sort(a.begin(), a.end());
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  if (total == 0.0) throw AllZero("gini is undefined for an all-zero vector");
  const double n = static_cast<double>(a.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc += (2.0 * static_cast<double>(k + 1) - n - 1.0) * a[k];
  }
  return std::clamp(acc / (n * total), 0.0, 1.0);
}

double point_game(const Saliency& s, const BoundingBox& box, std::size_t k) {
  s.validate();
  if (s.shape.size() != 2) throw DimensionError("point game needs a 2-D saliency");
  const std::size_t rows = s.shape[0];
  const std::size_t cols = s.shape[1];
  if (k == 0 || k > s.values.size()) throw ConfigInvalid("point game k must be in [1, grid size]");
  if (box.row_min > box.row_max || box.col_min > box.col_max || box.row_max >= rows ||
      box.col_max >= cols) {
    throw DimensionError("bounding box lies outside the saliency grid");
  }
  std::vector<std::size_t> order(s.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = std::abs(s.values[a]);
                      const double vb = std::abs(s.values[b]);
                      return va != vb ? va > vb : a < b;
                    });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (box.contains(order[i] / cols, order[i] % cols)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

Vector normalize_min_max(std::span<const double> v) {
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  Vector out(v.size(), 0.0);
  if (range == 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

Vector normalize_abs_max(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  Vector out(v.size(), 0.0);
  if (m == 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]) / m;
  return out;
}

std::size_t MetricReport::valid_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [](const MetricCase& c) { return c.value.has_value(); }));
}

std::size_t MetricReport::degenerate_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [](const MetricCase& c) { return c.degenerate; }));
}

std::size_t MetricReport::failure_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      cases.begin(), cases.end(), [](const MetricCase& c) { return !c.failure.empty(); }));
}

void finalize_report(MetricReport& report) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : report.cases) {
    if (c.value) {
      sum += *c.value;
      ++n;
    }
  }
  report.value = n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

namespace {

// Mean over the two normalizations of spearman (or |spearman|).
double two_normalization_correlation(std::span<const double> a, std::span<const double> b,
                                     bool absolute) {
  const double r1 = spearman(normalize_min_max(a), normalize_min_max(b));
  const double r2 = spearman(normalize_abs_max(a), normalize_abs_max(b));
  return absolute ? 0.5 * (std::abs(r1) + std::abs(r2)) : 0.5 * (r1 + r2);
}

template <typename CaseFn>
MetricReport run_cases(std::string name, std::size_t count, unsigned threads, CaseFn&& fn) {
  MetricReport report;
  report.metric = std::move(name);
  report.cases.resize(count);
  parallel_for(count, threads, [&](std::size_t i) {
    MetricCase& c = report.cases[i];
    c.input_id = i;
    try {
      c.value = fn(i);
    } catch (const DegenerateInput&) {
      c.degenerate = true;
    } catch (const std::exception& e) {
      c.failure = e.what();
      if (c.failure.empty()) c.failure = "unknown error";
    }
  });
  finalize_report(report);
  return report;
}

}  // namespace

MetricReport consistency_metric(const Explainer& explainer, const DifferentiableFunction& trained,
                                const DifferentiableFunction& randomized,
                                std::span<const Vector> inputs, unsigned threads) {
  if (inputs.empty()) throw ConfigInvalid("consistency needs at least one input");
  return run_cases("consistency", inputs.size(), threads, [&](std::size_t i) {
    const Vector a = explainer(trained, inputs[i], i);
    const Vector b = explainer(randomized, inputs[i], i);
    return two_normalization_correlation(a, b, true);
  });
}

MetricReport consistency_metric(const Explainer& explainer, const MlpModel& trained,
                                std::span<const Vector> inputs, RngState rng, unsigned threads) {
  const MlpModel randomized = randomize_params(trained, rng);
  return consistency_metric(explainer, trained, randomized, inputs, threads);
}

MetricReport invariance_metric(const Explainer& explainer, const DifferentiableFunction& m1,
                               const DifferentiableFunction& m2, std::span<const Vector> inputs,
                               std::span<const double> shift, unsigned threads) {
  if (inputs.empty()) throw ConfigInvalid("invariance needs at least one input");
  if (m1.input_dim() != m2.input_dim()) throw DimensionError("models differ in input dimension");
  if (shift.size() != m1.input_dim()) throw DimensionError("shift has wrong length");
  for (double c : shift) {
    if (!std::isfinite(c)) throw ConfigInvalid("shift must be finite");
  }
  return run_cases("invariance", inputs.size(), threads, [&](std::size_t i) {
    Vector shifted = inputs[i];
    for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] += shift[j];
    const Vector a = explainer(m1, inputs[i], i);
    const Vector b = explainer(m2, shifted, i);
    return two_normalization_correlation(a, b, false);
  });
}

}  // namespace mollify
