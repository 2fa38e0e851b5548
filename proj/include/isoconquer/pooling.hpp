#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "isoconquer/isotonic.hpp"
#include "isoconquer/rng.hpp"

namespace isoconquer {

/// N points split into m blocks of n = floor(N / m); the remaining
/// N - m * n points are discarded.
struct SplitPlan {
  std::size_t total = 0;
  std::size_t blocks = 0;
  std::size_t block_size = 0;
  std::size_t discarded = 0;
};

SplitPlan make_split_plan(std::size_t total, std::size_t blocks);

struct Split {
  SplitPlan plan;
  std::vector<std::vector<std::size_t>> blocks;
};

/// Disjoint index blocks. With `shuffle`, indices are permuted by the stream
/// first; otherwise block j holds the contiguous range [j*n, (j+1)*n).
Split split(std::size_t total, std::size_t blocks, bool shuffle, StreamKey stream = {});

enum class FunctionalKind { mu_at, mu_inverse_at, cdf_at, quantile_at };

/// A pointwise functional of an isotonic fit. The regression functionals use
/// `direction`; cdf_at and quantile_at always fit the current-status NPMLE
/// (nondecreasing).
struct Functional {
  FunctionalKind kind = FunctionalKind::mu_inverse_at;
  double target = 0.5;
  Direction direction = Direction::nondecreasing;
};

struct FunctionalValue {
  double value = 0.0;
  /// Inverse functionals that fell back on the empty-set or full-range
  /// convention.
  bool flagged = false;
};

FunctionalValue apply_functional(const StepEstimate& fit, const Functional& functional);
/// Fits `sample` as the functional requires and extracts the value.
FunctionalValue estimate_functional(const SortedSample& sample, const Functional& functional);

struct PooledEstimate {
  double theta_bar = 0.0;
  std::vector<double> subsample_estimates;
  std::optional<double> sigma_hat;  // present when m >= 2
  double rate_rn = 1.0;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t flagged = 0;
};

/// Averages precomputed subsample estimates (fixed summation order) and
/// records sigma_hat when m >= 2. rate_rn defaults to n^(1/3).
PooledEstimate pool_estimates(std::vector<double> estimates, std::size_t n,
                              std::optional<double> rate_rn = std::nullopt, std::size_t flagged = 0);

PooledEstimate pooled_point_estimate(std::span<const SortedSample> samples, const Functional& functional);

/// sqrt( r_n^2 / (m - 1) * sum_j (theta_j - theta_bar)^2 ).
double sigma_hat(std::span<const double> estimates, double rate_rn);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// theta_bar -+ sigma_hat * z_{alpha/2} / (r_n sqrt(m)).
Interval confidence_interval(const PooledEstimate& pe, double alpha);

/// Quantiles of the standardized m-fold convolution used by exact_limit_ci.
struct ConvolutionQuantiles {
  double lower = 0.0;  // alpha/2 quantile
  double upper = 0.0;  // 1 - alpha/2 quantile
};

/// Interval from quantiles of sigma * sum_j Z~_j / sqrt(m) instead of normal
/// ones. `sigma` overrides sigma_hat (needed when m = 1).
Interval exact_limit_ci(const PooledEstimate& pe, const ConvolutionQuantiles& q,
                        std::optional<double> sigma = std::nullopt);
Interval exact_limit_ci(const PooledEstimate& pe, double alpha, std::span<const double> chernoff_draws,
                        StreamKey resample_stream, std::optional<double> sigma = std::nullopt);

/// m_n = round(n^(2 phi - delta)) with bias exponent phi and slack delta.
struct RateSchedule {
  double phi = 1.0 / 6.0;
  double delta = 0.0;
};

std::size_t choose_m(const RateSchedule& schedule, std::size_t n);

}  // namespace isoconquer
