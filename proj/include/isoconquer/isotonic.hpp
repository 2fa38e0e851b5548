#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace isoconquer {

enum class Direction { nonincreasing, nondecreasing };

/// Observations ordered by covariate.
///
/// Covariates are strictly ascending in [0, 1]. Each point carries a weight
/// (its multiplicity after tied covariates have been merged); freshly drawn
/// continuous data always has unit weights.
class SortedSample {
 public:
  /// Takes covariates that are already strictly ascending. Unit weights.
  SortedSample(std::vector<double> xs, std::vector<double> ys);
  SortedSample(std::vector<double> xs, std::vector<double> ys, std::vector<double> weights);

  /// Sorts by covariate and replaces every run of tied covariates by one
  /// point carrying the mean response and the run length as weight.
  static SortedSample from_unsorted(std::span<const double> xs, std::span<const double> ys);
  /// Union of several samples; tied covariates are merged by weighted mean.
  static SortedSample merge(std::span<const SortedSample> parts);

  std::span<const double> xs() const noexcept { return xs_; }
  std::span<const double> ys() const noexcept { return ys_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return xs_.size(); }
  /// Number of original observations (sum of weights).
  double total_weight() const noexcept { return total_weight_; }

 private:
  void validate();

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> weights_;
  double total_weight_ = 0.0;
};

/// Cumulative-sum diagram: knots at cumulative weight fractions (i/n for unit
/// weights) with values (1/n) * sum of the first i responses.
struct CumSumDiagram {
  std::vector<double> knots;
  std::vector<double> values;
};

CumSumDiagram build_cusum(const SortedSample& sample);

/// Left-hand slopes of the least concave majorant of the diagram on each
/// knot interval (knots[i-1], knots[i]], computed from the upper convex hull.
/// The slopes are nonincreasing.
std::vector<double> lcm_left_slopes(const CumSumDiagram& diagram);

struct InverseResult {
  double value = 0.0;
  /// True when the level set is empty (value 0) or covers all of [0, 1]
  /// (value 1), i.e. the target lies outside the fitted range.
  bool boundary = false;
};

/// Left-continuous monotone step function on [0, 1].
///
/// Level i holds on (breakpoints[i-1], breakpoints[i]], the first level also
/// at 0. The last breakpoint is always 1.
class StepEstimate {
 public:
  StepEstimate(std::vector<double> breakpoints, std::vector<double> levels, Direction direction);

  double evaluate(double t) const;

  /// Generalized inverse. For a nonincreasing estimate: the greatest t in
  /// [0, 1] with evaluate(t) >= a, or 0 if there is none. A nondecreasing
  /// estimate is handled through its reflection -est at -a, giving the
  /// greatest t with evaluate(t) <= a.
  double inverse(double a) const { return inverse_detail(a).value; }
  InverseResult inverse_detail(double a) const;

  StepEstimate negated() const;

  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  std::span<const double> levels() const noexcept { return levels_; }
  Direction direction() const noexcept { return direction_; }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> levels_;
  Direction direction_;
};

/// Weighted pool-adjacent-violators pass producing the nonincreasing
/// least-squares fit, one fitted value per input.
std::vector<double> pava_nonincreasing(std::span<const double> ys, std::span<const double> weights);

/// Isotonic least-squares fit. Breakpoints are the covariates X_(1..n-1)
/// followed by 1; the levels are the fitted values at the data points.
StepEstimate fit_isotonic(const SortedSample& sample, Direction direction);

/// Current-status NPMLE of the failure-time distribution function: the
/// negated nonincreasing fit of the negated indicators.
StepEstimate fit_current_status(std::span<const double> exam_times, std::span<const int> indicators);

}  // namespace isoconquer
