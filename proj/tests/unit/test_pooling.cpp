#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "isoconquer/limit_dist.hpp"
#include "isoconquer/models.hpp"
#include "isoconquer/pooling.hpp"
#include "isoconquer/stats.hpp"

using namespace isoconquer;

namespace {

const std::vector<double>& shared_draws() {
  static const std::vector<double> draws = sample_chernoff({2.5, 0.005, 99}, 20000).values;
  return draws;
}

}  // namespace

TEST_CASE("split plans") {
  auto p = make_split_plan(50000, 50);
  CHECK(p.block_size == 1000);
  CHECK(p.discarded == 0);
  p = make_split_plan(10, 3);
  CHECK(p.block_size == 3);
  CHECK(p.discarded == 1);
  p = make_split_plan(17, 1);
  CHECK(p.blocks == 1);
  CHECK(p.block_size == 17);
  CHECK_THROWS(make_split_plan(3, 4));
  CHECK_THROWS(make_split_plan(3, 0));

  for (bool shuffle : {false, true}) {
    const auto s = split(103, 10, shuffle, {1, 2, 3, 4});
    std::set<std::size_t> seen;
    for (const auto& b : s.blocks) {
      CHECK(b.size() == 10);
      for (auto i : b) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 100);
    CHECK(*seen.rbegin() < 103);
  }
  const auto contiguous = split(10, 3, false);
  CHECK(contiguous.blocks[1] == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("pool_estimates and sigma_hat") {
  auto pe = pool_estimates({1, 2, 3}, 1000, 1.0);
  CHECK(pe.theta_bar == 2.0);
  REQUIRE(pe.sigma_hat);
  CHECK(*pe.sigma_hat == doctest::Approx(1.0));
  CHECK(sigma_hat(std::vector<double>{1, 2, 3}, 1.0) == doctest::Approx(1.0));
  CHECK(sigma_hat(std::vector<double>{4, 4, 4, 4}, 10.0) == 0.0);
  CHECK_THROWS(sigma_hat(std::vector<double>{1}, 1.0));
  CHECK(pool_estimates({0.3}, 1000).theta_bar == 0.3);
  CHECK_FALSE(pool_estimates({0.3}, 1000).sigma_hat);
  CHECK(pool_estimates({1, 2, 3}, 1000).rate_rn == doctest::Approx(10.0));

  // permutation invariance of theta_bar
  std::vector<double> e{0.1, 0.7, 0.35, 0.9, 0.2};
  const double ref = pool_estimates(e, 10).theta_bar;
  std::sort(e.begin(), e.end());
  do {
    CHECK(pool_estimates(e, 10).theta_bar == doctest::Approx(ref).epsilon(1e-15));
  } while (std::next_permutation(e.begin(), e.end()));
}

TEST_CASE("pooled_point_estimate") {
  const RegressionModel noiseless(LinearMean{}, 0.0);
  std::vector<SortedSample> blocks;
  for (std::uint32_t j = 0; j < 5; ++j) blocks.push_back(draw_regression(noiseless, 200, StreamKey{1, 7, 0, j}));
  const Functional f{FunctionalKind::mu_inverse_at, 0.5};
  const auto pe = pooled_point_estimate(blocks, f);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto xs = blocks[j].xs();
    double gap = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i - 1] <= 0.5 || xs[i] >= 0.5) gap = std::max(gap, xs[i] - xs[i - 1]);
    }
    CHECK(std::abs(pe.subsample_estimates[j] - 0.5) <= gap);
  }
  const auto single = pooled_point_estimate(std::span(blocks).first(1), f);
  CHECK(single.theta_bar == estimate_functional(blocks[0], f).value);
  CHECK(pe.m == 5);
  CHECK(pe.n == 200);
}

TEST_CASE("flagged inverse functionals are kept") {
  const RegressionModel noiseless(LinearMean{}, 0.0);
  std::vector<SortedSample> blocks{draw_regression(noiseless, 50, StreamKey{2, 0, 0, 0}),
                                   draw_regression(noiseless, 50, StreamKey{2, 0, 0, 1})};
  const auto pe = pooled_point_estimate(blocks, {FunctionalKind::mu_inverse_at, 5.0});
  CHECK(pe.flagged == 2);
  CHECK(pe.subsample_estimates.size() == 2);
}

TEST_CASE("confidence intervals") {
  PooledEstimate pe;
  pe.theta_bar = 0.5;
  pe.sigma_hat = 0.54;
  pe.rate_rn = 10.0;
  pe.m = 50;
  pe.n = 1000;
  auto ci = confidence_interval(pe, 0.05);
  CHECK(ci.hi - 0.5 == doctest::Approx(0.014966).epsilon(1e-4));
  CHECK(0.5 - ci.lo == doctest::Approx(ci.hi - 0.5));
  ci = confidence_interval(pe, 1.0);
  CHECK(ci.width() == doctest::Approx(0.0).scale(1.0));

  // width scales exactly like 1 / (r_n sqrt(m))
  PooledEstimate quad = pe;
  quad.m = 200;
  CHECK(confidence_interval(pe, 0.05).width() / confidence_interval(quad, 0.05).width() ==
        doctest::Approx(2.0).epsilon(1e-12));

  pe.sigma_hat = 0.0;
  ci = confidence_interval(pe, 0.05);
  CHECK(ci.lo == 0.5);
  CHECK(ci.hi == 0.5);
  pe.sigma_hat.reset();
  CHECK_THROWS(confidence_interval(pe, 0.05));
  pe.sigma_hat = 1.0;
  CHECK_THROWS(confidence_interval(pe, 0.0));
}

TEST_CASE("normal quantile accuracy") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == 0.0);
  for (double p = 0.001; p < 1.0; p += 0.001) CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12);
}

TEST_CASE("exact limit intervals") {
  const auto& draws = shared_draws();
  PooledEstimate pe;
  pe.theta_bar = 0.5;
  pe.sigma_hat = 0.3;
  pe.rate_rn = 10.0;
  pe.m = 100;
  const auto exact = exact_limit_ci(pe, 0.05, draws, {1, 0, 0, 0});
  const auto normal = confidence_interval(pe, 0.05);
  CHECK(exact.width() == doctest::Approx(normal.width()).epsilon(0.02));
  CHECK(std::abs((exact.hi - 0.5) - (0.5 - exact.lo)) <= 0.05 * exact.width());

  PooledEstimate one = pe;
  one.m = 1;
  one.sigma_hat.reset();
  const auto single = exact_limit_ci(one, 0.05, draws, {1, 0, 0, 0}, 0.3);
  const auto md = moments(draws);
  const double sd = std::sqrt(md.variance);
  const double scale = 0.3 / 10.0;
  CHECK(single.lo == doctest::Approx(0.5 - (empirical_quantile(draws, 0.975) - md.mean) / sd * scale).epsilon(1e-9));
  CHECK(single.hi == doctest::Approx(0.5 - (empirical_quantile(draws, 0.025) - md.mean) / sd * scale).epsilon(1e-9));

  CHECK_THROWS(exact_limit_ci(pe, 0.05, std::span(draws).first(9999), {1, 0, 0, 0}));
}

TEST_CASE("choose_m") {
  CHECK(choose_m({1.0 / 6, 0.0}, 1000) == 10);
  for (std::size_t n : {2ul, 100ul, 5000ul, 1000000ul}) CHECK(choose_m({2.0 / 15, 4.0 / 15}, n) == 1);
  CHECK(choose_m({2.0 / 15, 2.0 / 15}, 1000000) == static_cast<std::size_t>(std::lround(std::pow(1e6, 2.0 / 15))));
  CHECK(choose_m({2.0 / 15, 0.0}, 100000) > choose_m({2.0 / 15, 0.0}, 1000));
}

TEST_CASE("sigma_hat matches the limit variance on the fixed model") {
  // n = 1000, m = 10: sigma_hat^2 estimates kappa_tilde^2 Var(Z)
  const auto& draws = shared_draws();
  const auto mz = moments(draws);
  const double kt = kappa_tilde_inverse(0.04, 1.0, 1.0);
  const double want = kt * kt * mz.variance;
  // Var of the sample variance, approximated with the kurtosis of the draws
  const double want_se = kt * kt * mz.variance * std::sqrt((mz.kurtosis - 1.0) / draws.size());

  const RegressionModel model(LinearMean{}, 0.2);
  const std::size_t reps = 400;
  std::vector<double> s2(reps);
  for (std::uint32_t r = 0; r < reps; ++r) {
    std::vector<SortedSample> blocks;
    for (std::uint32_t j = 0; j < 10; ++j) blocks.push_back(draw_regression(model, 1000, StreamKey{5, 77, r, j}));
    const auto pe = pooled_point_estimate(blocks, {FunctionalKind::mu_inverse_at, 0.5});
    s2[r] = *pe.sigma_hat * *pe.sigma_hat;
  }
  const auto ms = moments(s2);
  const double se = std::sqrt(ms.variance / reps + want_se * want_se);
  CHECK(std::abs(ms.mean - want) <= 3 * se);
}
