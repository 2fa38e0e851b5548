#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "isoconquer/rng.hpp"

namespace isoconquer {

/// Discretized simulator of Chernoff's distribution, the law of
/// argmin_s { W(s) + s^2 } for a two-sided standard Brownian motion W.
///
/// Each path lives on the grid {-T, -T + h, ..., T}: two independent wings
/// of Gaussian increments (variance h) started at W(0) = 0. The discrete
/// argmin is refined by the vertex of the parabola through it and its two
/// neighbours. A minimum on the edge of the grid counts as a boundary hit and
/// the path is redrawn with the horizon doubled.
struct ChernoffSampler {
  double horizon = 2.5;
  double step = 0.005;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChernoffDraws {
  std::vector<double> values;
  std::size_t boundary_hits = 0;
};

ChernoffDraws sample_chernoff(const ChernoffSampler& sampler, std::size_t count, unsigned workers = 1);

/// Draws on the grids h and h/2 from the same Brownian paths: the coarse
/// path is the fine one observed at every second point.
struct RefinedChernoffDraws {
  ChernoffDraws coarse;
  ChernoffDraws fine;
};

RefinedChernoffDraws sample_chernoff_refined(const ChernoffSampler& sampler, std::size_t count,
                                             unsigned workers = 1);

/// |4 v^2 mu'(t0) / f(t0)|^(1/3): scale of the pointwise isotonic limit.
double kappa_forward(double v2, double mu_prime_t0, double f_t0);
/// |4 v^2 / (mu'(t0)^2 f(t0))|^(1/3): scale of the inverse-estimator limit.
double kappa_tilde_inverse(double v2, double mu_prime_t0, double f_t0);

/// Limit variance of the current-status NPMLE at t:
/// {4 F(t)(1 - F(t)) f_T(t) / f(t)}^(2/3) Var(Z).
double sigma2_current_status(double cdf_t, double failure_density_t, double exam_density_t,
                             double var_z);
/// Limit variance of the NPMLE quantile at level a, t_a = F^{-1}(a):
/// {4 a(1 - a) / (f_T(t_a)^2 f(t_a))}^(2/3) Var(Z).
double sigma2_current_status_quantile(double a, double failure_density_ta, double exam_density_ta,
                                      double var_z);

/// alpha-quantile of m^(-1/2) (Z~_1 + ... + Z~_m), where the Z~_j are drawn
/// with replacement from the draws standardized to mean zero and unit
/// variance. For m = 1
/// this is the empirical quantile of the standardized draws. Needs at least
/// 10^4 draws.
double mfold_quantile(std::span<const double> draws, std::size_t m, double alpha, StreamKey stream,
                      std::size_t resamples = 0);

/// Resampled m-fold convolution of the standardized draws, sorted ascending.
std::vector<double> mfold_distribution(std::span<const double> draws, std::size_t m, StreamKey stream,
                                       std::size_t resamples = 0);

inline constexpr std::size_t kMinChernoffDraws = 10000;

/// Flat binary cache: little-endian uint64 count followed by that many
/// IEEE-754 doubles.
void save_chernoff_cache(const std::filesystem::path& path, std::span<const double> draws);
std::vector<double> load_chernoff_cache(const std::filesystem::path& path);

/// Loads draws from $ISOCONQUER_CACHE when a matching file exists, otherwise
/// simulates them (and stores them there if the variable is set).
std::vector<double> cached_chernoff_draws(const ChernoffSampler& sampler, std::size_t count,
                                          unsigned workers = 1);

}  // namespace isoconquer
