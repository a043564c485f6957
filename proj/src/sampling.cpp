#include "mollify/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "mollify/error.hpp"
#include "mollify/parallel.hpp"

namespace mollify {

namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kPhiloxW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPhiloxW1 = 0xBB67AE8584CAA73BULL;

__extension__ using uint128 = unsigned __int128;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const uint128 p = static_cast<uint128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> ctr,
                                        std::array<std::uint64_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

RngState RngState::derive(std::uint64_t tag) const noexcept {
  return {splitmix64(seed ^ splitmix64(tag + 0x5851F42D4C957F2DULL)), stream_id};
}

UniformStream::UniformStream(RngState rng, std::uint64_t lane) noexcept
    : key_{rng.seed, rng.stream_id}, lane_(lane) {}

std::uint64_t UniformStream::next_u64() noexcept {
  if (used_ == 4) {
    buffer_ = philox4x64({block_++, lane_, 0, 0}, key_);
    used_ = 0;
  }
  return buffer_[used_++];
}

double UniformStream::next_open01() noexcept {
  constexpr double kUnit = 0x1.0p-53;
  const double u = static_cast<double>(next_u64() >> 11) * kUnit;
  return std::clamp(u, kUnit, 1.0 - kUnit);
}

SampleBatch SampleBatch::prefix(std::size_t n) const {
  if (n > count) throw DimensionError("prefix longer than batch");
  SampleBatch out{kernel, dim, n, {}, {}};
  out.points.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n * dim));
  out.log_weights.assign(log_weights.begin(), log_weights.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

SampleBatch draw_batch(const KernelSpec& kernel, std::size_t dim, std::size_t count,
                       RngState rng, unsigned threads) {
  if (dim == 0) throw DimensionError("draw_batch: dimension must be >= 1");
  if (count == 0) throw ConfigInvalid("draw_batch: sample count must be >= 1");
  SampleBatch batch{kernel, dim, count, std::vector<double>(count * dim),
                    std::vector<double>(count, 0.0)};
  parallel_for(count, threads, [&](std::size_t i) {
    UniformStream stream(rng, i);
    double* row = batch.points.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) row[j] = kernel.inv_cdf(stream.next_open01());
  });
  return batch;
}

double ks_check(const SampleBatch& batch, const KernelSpec& kernel) {
  if (batch.dim != 1) throw DimensionError("ks_check requires a one-dimensional batch");
  std::vector<double> xs = batch.points;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = kernel.cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_99(std::size_t n) noexcept {
  return 1.628 / std::sqrt(static_cast<double>(n));
}

}  // namespace mollify
