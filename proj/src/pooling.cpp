#include "isoconquer/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "isoconquer/limit_dist.hpp"
#include "isoconquer/stats.hpp"

namespace isoconquer {

SplitPlan make_split_plan(std::size_t total, std::size_t blocks) {
  if (blocks == 0) throw std::invalid_argument("split: m must be >= 1");
  if (blocks > total) {
    throw std::invalid_argument("split: m = " + std::to_string(blocks) + " exceeds N = " + std::to_string(total) +
                                " (need N >= m)");
  }
  SplitPlan plan;
  plan.total = total;
  plan.blocks = blocks;
  plan.block_size = total / blocks;
  plan.discarded = total - blocks * plan.block_size;
  return plan;
}

Split split(std::size_t total, std::size_t blocks, bool shuffle, StreamKey stream) {
  Split out;
  out.plan = make_split_plan(total, blocks);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Stream s(stream);
    for (std::size_t i = total; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(s.below(i));
      std::swap(order[i - 1], order[j]);
    }
  }
  const std::size_t n = out.plan.block_size;
  out.blocks.resize(blocks);
  for (std::size_t j = 0; j < blocks; ++j) {
    out.blocks[j].assign(order.begin() + static_cast<std::ptrdiff_t>(j * n),
                         order.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
  }
  return out;
}

namespace {

// inf { t : F(t) >= a } for a nondecreasing step estimate
double lower_inverse(const StepEstimate& fit, double a) {
  const auto bp = fit.breakpoints();
  const auto lv = fit.levels();
  const std::size_t i = static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), a) - lv.begin());
  if (i == lv.size()) return 1.0;
  return i == 0 ? 0.0 : bp[i - 1];
}

}  // namespace

FunctionalValue apply_functional(const StepEstimate& fit, const Functional& functional) {
  switch (functional.kind) {
    case FunctionalKind::mu_at:
    case FunctionalKind::cdf_at:
      return {fit.evaluate(functional.target), false};
    case FunctionalKind::mu_inverse_at: {
      const InverseResult r = fit.inverse_detail(functional.target);
      return {r.value, r.boundary};
    }
    case FunctionalKind::quantile_at: {
      // Binary responses make F_hat = a on a whole block with positive
      // probability; take the midpoint of that level set.
      if (fit.direction() != Direction::nondecreasing) {
        throw std::invalid_argument("quantile_at: needs a nondecreasing fit");
      }
      const InverseResult r = fit.inverse_detail(functional.target);
      const double lo = lower_inverse(fit, functional.target);
      return {0.5 * (lo + r.value), r.boundary};
    }
  }
  throw std::logic_error("apply_functional: unknown functional");
}

FunctionalValue estimate_functional(const SortedSample& sample, const Functional& functional) {
  const bool current_status =
      functional.kind == FunctionalKind::cdf_at || functional.kind == FunctionalKind::quantile_at;
  if (current_status && !(functional.target > 0.0 && functional.target < 1.0) &&
      functional.kind == FunctionalKind::quantile_at) {
    throw std::domain_error("quantile_at: level a must lie in (0, 1)");
  }
  const Direction dir = current_status ? Direction::nondecreasing : functional.direction;
  return apply_functional(fit_isotonic(sample, dir), functional);
}

double sigma_hat(std::span<const double> estimates, double rate_rn) {
  if (estimates.size() < 2) throw std::invalid_argument("sigma_hat: needs m >= 2 subsample estimates");
  KahanSum total;
  for (double e : estimates) total.add(e);
  const double mean = total.value() / static_cast<double>(estimates.size());
  KahanSum ss;
  for (double e : estimates) ss.add((e - mean) * (e - mean));
  const double var = rate_rn * rate_rn * ss.value() / static_cast<double>(estimates.size() - 1);
  return std::sqrt(var);
}

PooledEstimate pool_estimates(std::vector<double> estimates, std::size_t n, std::optional<double> rate_rn,
                              std::size_t flagged) {
  if (estimates.empty()) throw std::invalid_argument("pool_estimates: no subsample estimates");
  if (n == 0) throw std::invalid_argument("pool_estimates: subsample size must be >= 1");
  PooledEstimate pe;
  pe.m = estimates.size();
  pe.n = n;
  pe.rate_rn = rate_rn.value_or(std::cbrt(static_cast<double>(n)));
  pe.flagged = flagged;
  KahanSum total;
  for (double e : estimates) total.add(e);
  pe.theta_bar = total.value() / static_cast<double>(pe.m);
  if (pe.m >= 2) pe.sigma_hat = sigma_hat(estimates, pe.rate_rn);
  pe.subsample_estimates = std::move(estimates);
  return pe;
}

PooledEstimate pooled_point_estimate(std::span<const SortedSample> samples, const Functional& functional) {
  if (samples.empty()) throw std::invalid_argument("pooled_point_estimate: m must be >= 1");
  std::vector<double> estimates;
  estimates.reserve(samples.size());
  std::size_t flagged = 0;
  std::size_t n = samples.front().size();
  for (const auto& s : samples) {
    const FunctionalValue v = estimate_functional(s, functional);
    estimates.push_back(v.value);
    flagged += v.flagged;
    n = std::min(n, static_cast<std::size_t>(std::llround(s.total_weight())));
  }
  return pool_estimates(std::move(estimates), n, std::nullopt, flagged);
}

Interval confidence_interval(const PooledEstimate& pe, double alpha) {
  if (!pe.sigma_hat) throw std::invalid_argument("confidence_interval: sigma_hat unavailable (m < 2)");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("confidence_interval: alpha must lie in (0, 1]");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double half = *pe.sigma_hat * z / (pe.rate_rn * std::sqrt(static_cast<double>(pe.m)));
  return {pe.theta_bar - half, pe.theta_bar + half};
}

Interval exact_limit_ci(const PooledEstimate& pe, const ConvolutionQuantiles& q, std::optional<double> sigma) {
  const std::optional<double> s = sigma ? sigma : pe.sigma_hat;
  if (!s) throw std::invalid_argument("exact_limit_ci: no sigma (m < 2 and no override)");
  const double scale = *s / (pe.rate_rn * std::sqrt(static_cast<double>(pe.m)));
  // theta0 lies in [theta_bar - upper * scale, theta_bar - lower * scale]
  return {pe.theta_bar - q.upper * scale, pe.theta_bar - q.lower * scale};
}

Interval exact_limit_ci(const PooledEstimate& pe, double alpha, std::span<const double> chernoff_draws,
                        StreamKey resample_stream, std::optional<double> sigma) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("exact_limit_ci: alpha must lie in (0, 1)");
  const auto dist = mfold_distribution(chernoff_draws, pe.m, resample_stream);
  ConvolutionQuantiles q;
  q.lower = sorted_quantile(dist, alpha / 2.0);
  q.upper = sorted_quantile(dist, 1.0 - alpha / 2.0);
  return exact_limit_ci(pe, q, sigma);
}

std::size_t choose_m(const RateSchedule& schedule, std::size_t n) {
  if (!(schedule.phi > 0.0)) throw std::invalid_argument("choose_m: phi must be positive");
  if (schedule.delta < 0.0 || schedule.delta > 2.0 * schedule.phi) {
    throw std::invalid_argument("choose_m: delta must lie in [0, 2 phi]");
  }
  if (n < 2) return 1;
  const double m = std::round(std::pow(static_cast<double>(n), 2.0 * schedule.phi - schedule.delta));
  return std::max<std::size_t>(1, static_cast<std::size_t>(m));
}

}  // namespace isoconquer
