#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace isoconquer {

/// Compensated (Kahan-Neumaier) accumulator.
class KahanSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double normal_cdf(double x) noexcept;

/// Standard normal quantile. Rational approximation refined by one Halley
/// step; absolute error well below 1e-12 on (0, 1).
double normal_quantile(double p);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;
  double kurtosis = 0.0;  // non-excess
};

Moments moments(std::span<const double> xs);

/// Linear-interpolation (type 7) empirical quantile. Sorts a copy.
double empirical_quantile(std::span<const double> xs, double p);
/// Same, on data already sorted ascending.
double sorted_quantile(std::span<const double> sorted, double p);

/// Approximate standard error of the p-quantile: half the width of the
/// order-statistic interval spanning +-1 binomial SD around index p*n.
double quantile_standard_error(std::span<const double> sorted, double p);

/// Kolmogorov-Smirnov distance between the empirical law of xs and N(0,1).
double ks_distance_normal(std::span<const double> xs);

}  // namespace isoconquer
