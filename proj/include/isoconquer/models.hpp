#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "isoconquer/isotonic.hpp"
#include "isoconquer/rng.hpp"

namespace isoconquer {

/// Local bump of the super-efficiency alternatives:
/// B(u) = (1 - (|u| - 1)^2)^2 / 2 on |u| <= 2, zero elsewhere.
struct PerturbationBump {
  double x0 = 0.5;
  std::uint64_t scale_n = 1;

  static double shape(double u) noexcept;
};

/// mu_n(x) = x + n^(-1/3) B(n^(1/3) (x - x0)).
double perturbed_mu(const PerturbationBump& bump, double x) noexcept;

struct LinearMean {};
struct PerturbedMean {
  PerturbationBump bump;
};
/// Piecewise-linear mean through (xs[i], values[i]); xs must span [0, 1].
struct TabulatedMean {
  std::vector<double> xs;
  std::vector<double> values;
};

using MeanFunction = std::variant<LinearMean, PerturbedMean, TabulatedMean>;

/// Y = mu(X) + eps with X ~ Uniform(0, 1) and eps ~ N(0, noise_sd^2).
class RegressionModel {
 public:
  RegressionModel(MeanFunction mean, double noise_sd,
                  Direction direction = Direction::nondecreasing);

  double mean(double x) const;
  double noise_sd() const noexcept { return noise_sd_; }
  Direction direction() const noexcept { return direction_; }

 private:
  MeanFunction mean_;
  double noise_sd_;
  Direction direction_;
};

SortedSample draw_regression(const RegressionModel& model, std::size_t n, StreamKey stream);
SortedSample draw_regression(const RegressionModel& model, std::size_t n, Stream& stream);

/// Distribution function on [0, 1] given by a piecewise-linear table.
/// Mass not reached by F(1) lies beyond 1.
class TabulatedCdf {
 public:
  TabulatedCdf(std::vector<double> xs, std::vector<double> values);

  static TabulatedCdf uniform();
  /// All mass at 0: F(t) = 1 on [0, 1].
  static TabulatedCdf point_mass_at_zero();

  double operator()(double t) const;
  /// Inverse-CDF draw on a 2^12 grid with linear interpolation. Returns a
  /// value above 1 when u exceeds F(1).
  double sample(Stream& stream) const;

 private:
  std::vector<double> xs_;
  std::vector<double> values_;
  std::vector<double> grid_;  // F at k / 4096
};

struct CurrentStatusModel {
  TabulatedCdf failure = TabulatedCdf::uniform();
  TabulatedCdf exam = TabulatedCdf::uniform();
};

struct CurrentStatusData {
  std::vector<double> times;
  std::vector<int> indicators;
  std::vector<double> failure_times;  // latent T, kept for checking
};

CurrentStatusData draw_current_status(const CurrentStatusModel& model, std::size_t n, StreamKey stream);
CurrentStatusData draw_current_status(const CurrentStatusModel& model, std::size_t n, Stream& stream);

/// Sample of the current-status model as regression data (x = exam time,
/// y = indicator), ready for fit_isotonic in the nondecreasing direction.
SortedSample current_status_sample(const CurrentStatusData& data);

/// Zero-mean four-piece quartic bump on [-1, 1] used to perturb densities:
/// negative lobes centred at -3/4 and 3/4, positive lobes at -1/4 and 1/4,
/// each C * (1/16 - (u - c)^2)^2 on a half-width of 1/4.
struct KdeBump {
  double amplitude = 32.0;

  double operator()(double u) const noexcept;
  double max_abs() const noexcept { return amplitude / 256.0; }
};

/// Piecewise-linear density on [0, 1].
class TabulatedDensity {
 public:
  TabulatedDensity(std::vector<double> xs, std::vector<double> values);
  static TabulatedDensity uniform();

  double operator()(double t) const;
  double min_value() const noexcept;
  double sample(Stream& stream) const;

 private:
  std::vector<double> xs_;
  std::vector<double> values_;
  TabulatedCdf cdf_;
};

/// f_n(t) = f0(t) + n^(-1/3) B(n^(1/3) (t - t0)). Throws std::domain_error
/// when the result is negative.
double perturbed_density(const TabulatedDensity& f0, const KdeBump& bump, double t0, std::uint64_t n,
                         double t);

/// Rejection sampler for f_n with proposals from f0.
class PerturbedDensitySampler {
 public:
  PerturbedDensitySampler(TabulatedDensity f0, KdeBump bump, double t0, std::uint64_t n);

  double density(double t) const;
  double draw(Stream& stream) const;
  std::vector<double> draw(std::size_t count, Stream& stream) const;

 private:
  TabulatedDensity f0_;
  KdeBump bump_;
  double t0_;
  std::uint64_t n_;
  double envelope_;
};

}  // namespace isoconquer
