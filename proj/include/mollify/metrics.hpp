#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mollify/models.hpp"

namespace mollify {

/// Attribution per input feature. An empty shape means flat; for the point
/// game the shape is {rows, cols} in row-major order.
struct Saliency {
  Vector values;
  std::vector<std::size_t> shape;

  /// Throws DimensionError or ConfigInvalid on shape mismatch or non-finite
  /// values.
  void validate() const;
};

/// Inclusive cell ranges on a rows x cols grid.
struct BoundingBox {
  std::size_t row_min = 0;
  std::size_t row_max = 0;
  std::size_t col_min = 0;
  std::size_t col_max = 0;

  bool contains(std::size_t row, std::size_t col) const noexcept {
    return row >= row_min && row <= row_max && col >= col_min && col <= col_max;
  }
};

/// Spearman rank correlation with average ranks for ties. Throws
/// DimensionError for unequal or too-short inputs and DegenerateInput when
/// either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Average ranks (1-based), ties share the mean of their positions.
Vector average_ranks(std::span<const double> v);

/// Gini index of |v|: sum_k (2k - n - 1) |v|_(k) / (n sum |v|) over ascending
/// order. 0 for a uniform vector, (n-1)/n for one-hot. Throws AllZero.
double gini(std::span<const double> v);

/// Fraction of the k largest |value| cells that fall inside `box`. Ties at
/// the cutoff go to the lowest flat index.
double point_game(const Saliency& s, const BoundingBox& box, std::size_t k);

/// (v - min) / (max - min)
Vector normalize_min_max(std::span<const double> v);
/// |v| / max |v|
Vector normalize_abs_max(std::span<const double> v);

/// Per-case outcome. Exactly one of value, degenerate, or failure applies.
struct MetricCase {
  std::size_t input_id = 0;
  std::optional<double> value;
  bool degenerate = false;
  std::string failure;
};

struct MetricReport {
  std::string metric;
  /// Mean over valid cases; NaN when no case is valid.
  double value = 0.0;
  std::vector<MetricCase> cases;

  std::size_t valid_count() const noexcept;
  std::size_t degenerate_count() const noexcept;
  std::size_t failure_count() const noexcept;
};

/// Saliency of `model` at `x`. `case_id` lets an explainer derive per-case
/// random streams, so one explainer gives the same draws to every model it
/// is asked about for that case.
using Explainer =
    std::function<Vector(const DifferentiableFunction& model, std::span<const double> x,
                         std::size_t case_id)>;

/// Mean over inputs of the average, over the two normalizations, of
/// |spearman(saliency(trained, x), saliency(randomized, x))|. Lower means the
/// explainer separates trained from random models better.
MetricReport consistency_metric(const Explainer& explainer, const DifferentiableFunction& trained,
                                const DifferentiableFunction& randomized,
                                std::span<const Vector> inputs, unsigned threads = 1);

/// Same, with the randomized model drawn from `rng`.
MetricReport consistency_metric(const Explainer& explainer, const MlpModel& trained,
                                std::span<const Vector> inputs, RngState rng,
                                unsigned threads = 1);

/// Mean over inputs of the average, over the two normalizations, of
/// spearman(saliency(m1, x), saliency(m2, x + shift)). Higher is better.
MetricReport invariance_metric(const Explainer& explainer, const DifferentiableFunction& m1,
                               const DifferentiableFunction& m2, std::span<const Vector> inputs,
                               std::span<const double> shift, unsigned threads = 1);

/// Averages the case values in place into report.value.
void finalize_report(MetricReport& report);

}  // namespace mollify
