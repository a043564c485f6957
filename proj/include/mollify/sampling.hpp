#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mollify/kernels.hpp"

namespace mollify {

/// Name and revision of the generator; golden tests depend on it.
inline constexpr const char* kPrngName = "philox4x64-10/v1";

/// Philox4x64 with 10 rounds (Salmon et al., SC'11): a counter-based
/// bijection from a 256-bit counter under a 128-bit key.
std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> counter,
                                        std::array<std::uint64_t, 2> key) noexcept;

/// Identifies one random stream. Equal states always yield equal sequences.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Independent child stream, e.g. for a separate leg of an experiment.
  RngState derive(std::uint64_t tag) const noexcept;

  friend bool operator==(const RngState&, const RngState&) = default;
};

/// Uniform doubles for one (stream, lane) pair. Lane `i` is the per-sample
/// substream: values for sample i never depend on how many samples exist or
/// which thread draws them.
class UniformStream {
 public:
  UniformStream(RngState rng, std::uint64_t lane) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [2^-53, 1 - 2^-53], so inverse CDFs stay finite.
  double next_open01() noexcept;

 private:
  std::array<std::uint64_t, 2> key_;
  std::uint64_t lane_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 4> buffer_{};
  unsigned used_ = 4;
};

/// N draws t_i in R^n with their log importance weights log phi(t_i) - log p(t_i).
struct SampleBatch {
  KernelSpec kernel;
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<double> points;       // row-major count x dim
  std::vector<double> log_weights;  // one per sample

  std::span<const double> point(std::size_t i) const noexcept {
    return {points.data() + i * dim, dim};
  }
  /// First `n` samples as a standalone batch.
  SampleBatch prefix(std::size_t n) const;
};

/// Draws `count` points from the product kernel by inverse transform. The
/// sampling density equals the kernel, so every log weight is exactly 0.
SampleBatch draw_batch(const KernelSpec& kernel, std::size_t dim, std::size_t count,
                       RngState rng, unsigned threads = 1);

/// One-sample Kolmogorov-Smirnov statistic of a 1-D batch against the
/// kernel's CDF. Throws DimensionError when dim != 1.
double ks_check(const SampleBatch& batch, const KernelSpec& kernel);

/// Asymptotic 99% critical value 1.628/sqrt(n) for the one-sample KS test.
double ks_critical_99(std::size_t n) noexcept;

}  // namespace mollify
