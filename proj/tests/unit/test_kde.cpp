#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "isoconquer/kde.hpp"
#include "isoconquer/rng.hpp"

using namespace isoconquer;

namespace {

template <typename F>
double simpson(F f, double lo, double hi, int panels = 20000) {
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("kernels") {
  for (auto kind : {KernelKind::biweight, KernelKind::epanechnikov}) {
    const Kernel k{kind};
    CHECK(std::abs(simpson(k, -1, 1) - 1.0) <= 1e-8);
    CHECK(std::abs(simpson([&](double u) { return k(u) * k(u); }, -1, 1) - k.roughness()) <= 1e-8);
    CHECK(k.roughness() > 0.0);
    CHECK(k(1.2) == 0.0);
    CHECK(k(-1.0) == 0.0);
    for (double u = 0; u < 1.1; u += 0.05) CHECK(k(u) == k(-u));
    CHECK(kernel_from_name(k.name()).kind == kind);
  }
  CHECK(Kernel{KernelKind::biweight}.roughness() == doctest::Approx(5.0 / 7));
  CHECK(Kernel{KernelKind::epanechnikov}.roughness() == doctest::Approx(3.0 / 5));
  CHECK(Kernel{}.kind == KernelKind::biweight);
  CHECK_THROWS(kernel_from_name("gaussian"));
}

TEST_CASE("kde_at_point") {
  const Kernel k;
  CHECK(kde_at_point(std::vector<double>{0.5}, 0.5, 0.2) == doctest::Approx(k(0.0) / 0.2));
  CHECK(kde_at_point(std::vector<double>{0.1, 0.9}, 0.5, 0.2) == 0.0);
  CHECK_THROWS(kde_at_point(std::vector<double>{0.5}, 0.5, 0.0));
  CHECK_THROWS(kde_at_point(std::vector<double>{}, 0.5, 0.1));

  Stream s({1, domain_tag("unit-kde"), 0, 0});
  const std::size_t n = 100000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = s.uniform();
  const double h = std::pow(static_cast<double>(n), -1.0 / 3);
  const double est = kde_at_point(xs, 0.5, h);
  CHECK(std::abs(est - 1.0) <= 4 * std::sqrt(k.roughness() / (n * h)));
  CHECK(est >= 0.0);

  auto shuffled = xs;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(kde_at_point(shuffled, 0.5, h) == doctest::Approx(est).epsilon(1e-12));
}

TEST_CASE("pooled kde") {
  Stream s({2, domain_tag("unit-kde"), 0, 0});
  std::vector<std::vector<double>> blocks(8, std::vector<double>(125));
  std::vector<double> all;
  for (auto& b : blocks) {
    for (auto& x : b) {
      x = s.uniform();
      all.push_back(x);
    }
  }
  // undersmoothed pooling is the global estimate at h = N^(-1/3)
  const double h = std::pow(1000.0, -1.0 / 3);
  CHECK(pooled_kde(blocks, 0.5, BandwidthPolicy::undersmoothed) == doctest::Approx(kde_at_point(all, 0.5, h)).epsilon(1e-12));
  CHECK(policy_bandwidth(BandwidthPolicy::fixed_subsample, 125, 8) == doctest::Approx(0.2));
  CHECK(policy_bandwidth(BandwidthPolicy::undersmoothed, 125, 8) == doctest::Approx(0.1));

  std::vector<std::vector<double>> one{all};
  CHECK(pooled_kde(one, 0.5, BandwidthPolicy::fixed_subsample) ==
        pooled_kde(one, 0.5, BandwidthPolicy::undersmoothed));

  blocks[3].pop_back();
  CHECK_THROWS(pooled_kde(blocks, 0.5, BandwidthPolicy::fixed_subsample));
  std::vector<std::vector<double>> empty{{}};
  CHECK_THROWS(pooled_kde(empty, 0.5, BandwidthPolicy::fixed_subsample));
}
