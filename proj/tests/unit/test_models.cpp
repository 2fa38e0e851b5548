#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "isoconquer/kde.hpp"
#include "isoconquer/models.hpp"
#include "isoconquer/stats.hpp"

using namespace isoconquer;

namespace {

// composite Simpson on [lo, hi]
template <typename F>
double simpson(F f, double lo, double hi, int panels = 20000) {
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("Philox known-answer vectors") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  Stream a({5, 1, 2, 3}), b({5, 1, 2, 3}), c({5, 1, 2, 4});
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
  CHECK(domain_tag("table1-left") != domain_tag("table1-right"));
  CHECK(domain_tag("x", 1) != domain_tag("x", 2));
}

TEST_CASE("draw_regression") {
  const RegressionModel linear(LinearMean{}, 0.0);
  const auto s = draw_regression(linear, 3, StreamKey{1, 2, 3, 4});
  REQUIRE(s.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.ys()[i] == s.xs()[i]);
  for (std::size_t i = 1; i < 3; ++i) CHECK(s.xs()[i] > s.xs()[i - 1]);

  const double v = 0.2;
  const RegressionModel noisy(LinearMean{}, v);
  const auto big = draw_regression(noisy, 100000, StreamKey{9, 1, 0, 0});
  double resid = 0.0;
  for (std::size_t i = 0; i < big.size(); ++i) resid += big.ys()[i] - big.xs()[i];
  resid /= static_cast<double>(big.size());
  CHECK(std::abs(resid) <= 4 * v / std::sqrt(1e5));

  const auto again = draw_regression(noisy, 100000, StreamKey{9, 1, 0, 0});
  CHECK(std::equal(big.ys().begin(), big.ys().end(), again.ys().begin()));
  CHECK(std::equal(big.xs().begin(), big.xs().end(), again.xs().begin()));
  CHECK_THROWS(draw_regression(noisy, 0, StreamKey{}));
}

TEST_CASE("perturbation bump") {
  CHECK(PerturbationBump::shape(0.0) == 0.0);
  CHECK(PerturbationBump::shape(1.0) == 0.5);
  CHECK(PerturbationBump::shape(2.5) == 0.0);
  for (double u = 0.0; u <= 2.5; u += 0.01) CHECK(PerturbationBump::shape(u) == PerturbationBump::shape(-u));

  const PerturbationBump b{0.5, 1000};
  CHECK(perturbed_mu(b, 0.5) == 0.5);
  CHECK(perturbed_mu(b, 0.6) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(perturbed_mu(b, 0.75) == 0.75);
  CHECK(perturbed_mu(b, 0.1) == 0.1);

  for (std::uint64_t n : {1ull, 8ull, 50ull, 1000ull, 10000ull, 1000000ull}) {
    const PerturbationBump bn{0.5, n};
    const double reach = 2.0 / std::cbrt(static_cast<double>(n));
    double prev = perturbed_mu(bn, 0.0);
    for (int k = 1; k <= 10000; ++k) {
      const double x = k / 10000.0;
      const double y = perturbed_mu(bn, x);
      REQUIRE(y >= prev);
      if (std::abs(x - 0.5) >= reach) REQUIRE(y == x);
      prev = y;
    }
  }
}

TEST_CASE("current-status draws") {
  CurrentStatusModel at_zero;
  at_zero.failure = TabulatedCdf::point_mass_at_zero();
  const auto d0 = draw_current_status(at_zero, 500, StreamKey{1, 0, 0, 0});
  for (int i : d0.indicators) CHECK(i == 1);

  const auto d = draw_current_status(CurrentStatusModel{}, 40000, StreamKey{2, 0, 0, 0});
  double ones = 0;
  for (std::size_t i = 0; i < d.times.size(); ++i) {
    ones += d.indicators[i];
    REQUIRE(d.indicators[i] == (d.failure_times[i] <= d.times[i] ? 1 : 0));
  }
  CHECK(std::abs(ones / 40000.0 - 0.5) <= 4.0 / std::sqrt(4e4));

  const auto again = draw_current_status(CurrentStatusModel{}, 40000, StreamKey{2, 0, 0, 0});
  CHECK(again.times == d.times);
  CHECK(again.indicators == d.indicators);
  CHECK_THROWS(draw_current_status(CurrentStatusModel{}, 0, StreamKey{}));
}

TEST_CASE("perturbed densities") {
  const auto f0 = TabulatedDensity::uniform();
  const KdeBump bump{32.0};
  CHECK(perturbed_density(f0, bump, 0.5, 1000, 0.5) == doctest::Approx(f0(0.5)));
  const double diff = simpson([&](double t) { return perturbed_density(f0, bump, 0.5, 1000, t) - f0(t); }, 0, 1);
  CHECK(std::abs(diff) <= 1e-8);
  CHECK(bump(0.0) == 0.0);

  const KdeBump unit{1.0};
  const Kernel biweight{KernelKind::biweight};
  CHECK(simpson([&](double u) { return unit(u); }, -1, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(simpson([&](double u) { return unit(u) * biweight(u); }, -1, 1) > 0.0);

  CHECK_THROWS_AS(perturbed_density(f0, KdeBump{1e6}, 0.5, 8, 0.875), std::domain_error);

  // sampler mean matches the density's first moment
  const PerturbedDensitySampler sampler(f0, KdeBump{32.0}, 0.5, 8);
  Stream s({4, 0, 0, 0});
  const auto xs = sampler.draw(100000, s);
  const double want = simpson([&](double t) { return t * sampler.density(t); }, 0, 1);
  CHECK(std::abs(moments(xs).mean - want) <= 4 * std::sqrt(1.0 / 12 / 1e5));
}
