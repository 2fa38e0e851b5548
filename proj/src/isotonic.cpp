#include "isoconquer/isotonic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace isoconquer {

SortedSample::SortedSample(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)), weights_(xs_.size(), 1.0) {
  validate();
}

SortedSample::SortedSample(std::vector<double> xs, std::vector<double> ys, std::vector<double> weights)
    : xs_(std::move(xs)), ys_(std::move(ys)), weights_(std::move(weights)) {
  validate();
}

void SortedSample::validate() {
  if (xs_.empty()) throw std::invalid_argument("SortedSample: sample is empty");
  if (ys_.size() != xs_.size() || weights_.size() != xs_.size()) {
    throw std::invalid_argument("SortedSample: xs, ys and weights must have equal length");
  }
  total_weight_ = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (!(xs_[i] >= 0.0 && xs_[i] <= 1.0)) {
      throw std::invalid_argument("SortedSample: covariate " + std::to_string(xs_[i]) +
                                  " outside [0, 1]");
    }
    if (i > 0 && !(xs_[i] > xs_[i - 1])) {
      throw std::invalid_argument("SortedSample: covariates must be strictly ascending");
    }
    if (!std::isfinite(ys_[i])) throw std::invalid_argument("SortedSample: non-finite response");
    if (!(weights_[i] > 0.0)) throw std::invalid_argument("SortedSample: weights must be positive");
    total_weight_ += weights_[i];
  }
}

SortedSample SortedSample::from_unsorted(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("from_unsorted: length mismatch");
  if (xs.empty()) throw std::invalid_argument("SortedSample: sample is empty");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });

  std::vector<double> sx, sy, sw;
  sx.reserve(xs.size());
  sy.reserve(xs.size());
  sw.reserve(xs.size());
  for (std::size_t k = 0; k < order.size();) {
    const double x = xs[order[k]];
    double sum = 0.0;
    std::size_t run = 0;
    for (; k < order.size() && xs[order[k]] == x; ++k, ++run) sum += ys[order[k]];
    sx.push_back(x);
    sy.push_back(sum / static_cast<double>(run));
    sw.push_back(static_cast<double>(run));
  }
  return SortedSample(std::move(sx), std::move(sy), std::move(sw));
}

SortedSample SortedSample::merge(std::span<const SortedSample> parts) {
  std::vector<double> xs, ys, ws;
  for (const auto& p : parts) {
    xs.insert(xs.end(), p.xs().begin(), p.xs().end());
    ys.insert(ys.end(), p.ys().begin(), p.ys().end());
    ws.insert(ws.end(), p.weights().begin(), p.weights().end());
  }
  if (xs.empty()) throw std::invalid_argument("SortedSample: sample is empty");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });

  std::vector<double> sx, sy, sw;
  sx.reserve(xs.size());
  sy.reserve(xs.size());
  sw.reserve(xs.size());
  for (std::size_t k = 0; k < order.size();) {
    const double x = xs[order[k]];
    double sum = 0.0;
    double weight = 0.0;
    for (; k < order.size() && xs[order[k]] == x; ++k) {
      sum += ws[order[k]] * ys[order[k]];
      weight += ws[order[k]];
    }
    sx.push_back(x);
    sy.push_back(sum / weight);
    sw.push_back(weight);
  }
  return SortedSample(std::move(sx), std::move(sy), std::move(sw));
}

CumSumDiagram build_cusum(const SortedSample& sample) {
  const auto ys = sample.ys();
  const auto ws = sample.weights();
  const double total = sample.total_weight();
  CumSumDiagram out;
  out.knots.reserve(ys.size() + 1);
  out.values.reserve(ys.size() + 1);
  out.knots.push_back(0.0);
  out.values.push_back(0.0);
  double weight = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    weight += ws[i];
    sum += ws[i] * ys[i];
    out.knots.push_back(weight / total);
    out.values.push_back(sum / total);
  }
  out.knots.back() = 1.0;
  return out;
}

std::vector<double> lcm_left_slopes(const CumSumDiagram& diagram) {
  const auto& x = diagram.knots;
  const auto& y = diagram.values;
  if (x.size() < 2 || y.size() != x.size()) {
    throw std::invalid_argument("lcm_left_slopes: need at least two knots");
  }
  // upper hull, collinear points dropped
  std::vector<std::size_t> hull;
  hull.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (hull.size() >= 2) {
      const std::size_t o = hull[hull.size() - 2];
      const std::size_t a = hull.back();
      const double cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o]);
      if (cross < 0.0) break;
      hull.pop_back();
    }
    hull.push_back(i);
  }
  std::vector<double> slopes(x.size() - 1);
  for (std::size_t h = 1; h < hull.size(); ++h) {
    const std::size_t lo = hull[h - 1];
    const std::size_t hi = hull[h];
    const double slope = (y[hi] - y[lo]) / (x[hi] - x[lo]);
    std::fill(slopes.begin() + static_cast<std::ptrdiff_t>(lo),
              slopes.begin() + static_cast<std::ptrdiff_t>(hi), slope);
  }
  return slopes;
}

StepEstimate::StepEstimate(std::vector<double> breakpoints, std::vector<double> levels,
                           Direction direction)
    : breakpoints_(std::move(breakpoints)), levels_(std::move(levels)), direction_(direction) {
  if (levels_.empty()) throw std::invalid_argument("StepEstimate: no levels");
  if (breakpoints_.size() != levels_.size()) {
    throw std::invalid_argument("StepEstimate: one breakpoint per level required");
  }
  if (breakpoints_.back() != 1.0) throw std::invalid_argument("StepEstimate: last breakpoint must be 1");
  if (!(breakpoints_.front() >= 0.0)) throw std::invalid_argument("StepEstimate: breakpoints below 0");
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1])) {
      throw std::invalid_argument("StepEstimate: breakpoints must be strictly ascending");
    }
    const bool ordered = direction_ == Direction::nonincreasing ? levels_[i] <= levels_[i - 1]
                                                                : levels_[i] >= levels_[i - 1];
    if (!ordered) throw std::invalid_argument("StepEstimate: levels violate the declared direction");
  }
}

double StepEstimate::evaluate(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("StepEstimate::evaluate: t outside [0, 1]");
  const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), t);
  return levels_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

InverseResult StepEstimate::inverse_detail(double a) const {
  std::size_t count;
  if (direction_ == Direction::nonincreasing) {
    count = static_cast<std::size_t>(
        std::partition_point(levels_.begin(), levels_.end(), [a](double l) { return l >= a; }) -
        levels_.begin());
  } else {
    count = static_cast<std::size_t>(
        std::partition_point(levels_.begin(), levels_.end(), [a](double l) { return l <= a; }) -
        levels_.begin());
  }
  if (count == 0) return {0.0, true};
  return {breakpoints_[count - 1], count == levels_.size()};
}

StepEstimate StepEstimate::negated() const {
  std::vector<double> levels(levels_.size());
  std::transform(levels_.begin(), levels_.end(), levels.begin(), [](double l) { return -l; });
  return StepEstimate(breakpoints_, std::move(levels),
                      direction_ == Direction::nonincreasing ? Direction::nondecreasing
                                                             : Direction::nonincreasing);
}

std::vector<double> pava_nonincreasing(std::span<const double> ys, std::span<const double> weights) {
  if (ys.size() != weights.size()) throw std::invalid_argument("pava: length mismatch");
  struct Block {
    double sum;
    double weight;
    std::size_t count;
    double mean() const { return sum / weight; }
  };
  std::vector<Block> stack;
  stack.reserve(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    stack.push_back({weights[i] * ys[i], weights[i], 1});
    // a block may stay only if its mean is <= the mean of the block before it
    while (stack.size() >= 2 && stack[stack.size() - 2].mean() < stack.back().mean()) {
      const Block top = stack.back();
      stack.pop_back();
      stack.back().sum += top.sum;
      stack.back().weight += top.weight;
      stack.back().count += top.count;
    }
  }
  std::vector<double> fitted;
  fitted.reserve(ys.size());
  for (const Block& b : stack) fitted.insert(fitted.end(), b.count, b.mean());
  return fitted;
}

StepEstimate fit_isotonic(const SortedSample& sample, Direction direction) {
  const auto xs = sample.xs();
  const std::size_t n = xs.size();
  std::vector<double> levels;
  if (direction == Direction::nonincreasing) {
    levels = pava_nonincreasing(sample.ys(), sample.weights());
  } else {
    std::vector<double> negated(n);
    std::transform(sample.ys().begin(), sample.ys().end(), negated.begin(), [](double y) { return -y; });
    levels = pava_nonincreasing(negated, sample.weights());
    for (double& l : levels) l = -l;
  }
  // the last data interval extends to 1
  std::vector<double> breakpoints(xs.begin(), xs.end());
  breakpoints.back() = 1.0;
  return StepEstimate(std::move(breakpoints), std::move(levels), direction);
}

StepEstimate fit_current_status(std::span<const double> exam_times, std::span<const int> indicators) {
  if (exam_times.empty()) throw std::invalid_argument("fit_current_status: empty input");
  if (exam_times.size() != indicators.size()) {
    throw std::invalid_argument("fit_current_status: times and indicators differ in length");
  }
  std::vector<double> ys(indicators.size());
  for (std::size_t i = 0; i < indicators.size(); ++i) {
    if (indicators[i] != 0 && indicators[i] != 1) {
      throw std::invalid_argument("fit_current_status: indicators must be 0 or 1");
    }
    ys[i] = indicators[i];
  }
  return fit_isotonic(SortedSample::from_unsorted(exam_times, ys), Direction::nondecreasing);
}

}  // namespace isoconquer
