// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "isoconquer/experiments.hpp"
#include "isoconquer/isotonic.hpp"
#include "isoconquer/rng.hpp"

namespace ic = isoconquer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned workers() {
  if (const char* w = std::getenv("ISOCONQUER_WORKERS")) return static_cast<unsigned>(std::atoi(w));
  return 1;
}

ic::ExperimentConfig config_for(const std::string& name) {
  auto c = ic::default_config(name);
  c.workers = workers();
  return c;
}

// Perturbed (1000, 90) feeds both criterion 2 and criterion 12.
const ic::RatioCell& perturbed_1000_90() {
  static const ic::RatioCell cell = [] {
    auto c = config_for("table1-right");
    c.ns = {1000};
    c.ms = {90};
    return *ic::run_ratio_table(c).find(1000, 90);
  }();
  return cell;
}

Outcome table_left() {
  const auto t0 = std::chrono::steady_clock::now();
  auto c = config_for("table1-left");
  c.ns = {200, 1000};
  c.ms = {10, 30};
  const auto t = ic::run_ratio_table(c);
  const auto* a = t.find(1000, 30);
  const auto* b = t.find(200, 10);
  const double secs = seconds_since(t0);
  return {a->ratio >= 2.0 && a->ratio <= 4.0 && b->ratio >= 1.4 && b->ratio <= 2.9 && secs < 600,
          fmt("(1000,30) ratio %.3f +- %.3f in [2.0, 4.0]; (200,10) ratio %.3f +- %.3f in [1.4, 2.9]; %.0f s",
              a->ratio, a->mc_se, b->ratio, b->mc_se, secs)};
}

Outcome table_right() {
  const auto& big = perturbed_1000_90();
  auto c = config_for("table1-right");
  c.ns = {50};
  c.ms = {5};
  const auto small = *ic::run_ratio_table(c).find(50, 5);
  return {big.ratio < 0.5 && small.ratio >= 1.0 && small.ratio <= 2.1,
          fmt("(1000,90) ratio %.3f +- %.3f < 0.5; (50,5) ratio %.3f +- %.3f in [1.0, 2.1]", big.ratio,
              big.mc_se, small.ratio, small.mc_se)};
}

Outcome cube_root_law() {
  auto c = config_for("table1-left");
  c.ns = {1000};
  c.ms = {8, 27};
  const auto t = ic::run_ratio_table(c);
  const auto* a = t.find(1000, 8);
  const auto* b = t.find(1000, 27);
  const bool ok = std::abs(a->ratio / 2.0 - 1.0) <= 0.35 && std::abs(b->ratio / 3.0 - 1.0) <= 0.35;
  return {ok, fmt("m=8 ratio %.3f +- %.3f (target 2 +-35%%); m=27 ratio %.3f +- %.3f (target 3 +-35%%)", a->ratio,
                  a->mc_se, b->ratio, b->mc_se)};
}

std::vector<double> brute_force_nonincreasing(const std::vector<double>& ys) {
  const std::size_t n = ys.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_fit;
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<double> fit(n);
    std::size_t start = 0;
    double prev = std::numeric_limits<double>::infinity();
    bool feasible = true;
    for (std::size_t i = 0; i < n && feasible; ++i) {
      if (i != n - 1 && !((mask >> i) & 1u)) continue;
      double s = 0.0;
      for (std::size_t j = start; j <= i; ++j) s += ys[j];
      const double mean = s / static_cast<double>(i - start + 1);
      feasible = mean <= prev;
      for (std::size_t j = start; j <= i; ++j) fit[j] = mean;
      prev = mean;
      start = i + 1;
    }
    if (!feasible) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += (ys[i] - fit[i]) * (ys[i] - fit[i]);
    if (sse < best) {
      best = sse;
      best_fit = fit;
    }
  }
  return best_fit;
}

Outcome pava_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const double alphabet[] = {-1, 0, 1, 2};
  std::size_t count = 0, mismatches = 0;
  double worst = 0.0;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 4;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<double> ys(n), xs(n);
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 4) {
        ys[i] = alphabet[c % 4];
        xs[i] = (i + 1.0) / static_cast<double>(n);
      }
      const auto fit = ic::fit_isotonic(ic::SortedSample(xs, ys), ic::Direction::nonincreasing);
      const auto want = brute_force_nonincreasing(ys);
      bool bad = false;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(fit.levels()[i] - want[i]);
        worst = std::max(worst, d);
        bad = bad || d > 1e-9;
      }
      mismatches += bad;
      ++count;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60,
          fmt("%zu sequences, %zu mismatches, max |diff| %.2g (tol 1e-9), %.2f s", count, mismatches, worst, secs)};
}

Outcome switching() {
  ic::Stream s({2024, ic::domain_tag("acceptance-switching"), 0, 0});
  std::size_t violations = 0;
  const std::size_t trials = 10000;
  for (std::size_t k = 0; k < trials; ++k) {
    const std::size_t n = 1 + s.below(40);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = s.uniform();
      ys[i] = s.below(2) ? s.normal() : static_cast<double>(s.below(4));
    }
    const auto fit = ic::fit_isotonic(ic::SortedSample::from_unsorted(xs, ys), ic::Direction::nonincreasing);
    const std::size_t size = fit.levels().size();
    const double t = s.below(3) == 0 ? fit.breakpoints()[s.below(size)] : 1.0 - s.uniform();
    const double a = s.below(3) == 0 ? fit.levels()[s.below(size)] : 6.0 * s.uniform() - 2.5;
    if ((fit.evaluate(t) >= a) != (t <= fit.inverse(a))) ++violations;
  }
  return {violations == 0, fmt("%zu triples, %zu violations (t in (0, 1])", trials, violations)};
}

Outcome chernoff() {
  auto c = config_for("chernoff");
  const auto r = ic::run_chernoff_check(c);
  const bool ok = r.count >= 100000 && std::abs(r.mean) <= 3 * r.se_mean &&
                  std::abs(r.q_lower + r.q_upper) <= 2 * r.q_se &&
                  std::abs(r.sd_coarse - r.sd_fine) <= 2 * r.sd_combined_se && r.boundary_rate < 1e-3;
  return {ok, fmt("%zu draws: mean %.4f (3 SE %.4f); q.025 %.4f q.975 %.4f (2 SE %.4f); sd h %.5f vs h/2 %.5f "
                  "(2 SE %.5f); boundary rate %.5f; Var(Z) %.4f",
                  r.count, r.mean, 3 * r.se_mean, r.q_lower, r.q_upper, 2 * r.q_se, r.sd_coarse, r.sd_fine,
                  2 * r.sd_combined_se, r.boundary_rate, r.sd * r.sd)};
}

Outcome normality() {
  auto c = config_for("normality");
  const auto r = ic::run_normality_check(c);
  return {r.n == 1000 && r.m == 10 && r.ks_distance < 0.05,
          fmt("n=%zu m=%zu KS %.4f < 0.05 (skew %.3f, kurt %.3f)", r.n, r.m, r.ks_distance, r.skewness, r.kurtosis)};
}

Outcome coverage() {
  auto c = config_for("coverage");
  const auto r = ic::run_coverage(c);
  return {r.empirical_coverage >= 0.92 && r.empirical_coverage <= 0.98,
          fmt("n=%zu m=%zu coverage %.4f in [0.92, 0.98] (exact-limit CI %.4f), avg width %.5f", r.n, r.m,
              r.empirical_coverage, r.exact_coverage, r.avg_width)};
}

Outcome current_status() {
  auto c = config_for("current-status");
  const auto r = ic::run_current_status(c);
  const auto* cell = r.table.find(1000, 27);
  const bool ok = cell && std::abs(cell->ratio / 3.0 - 1.0) <= 0.35 && r.quantile_normality.ks_distance < 0.05;
  return {ok, fmt("m=27 ratio %.3f +- %.3f (target 3 +-35%%); quantile KS %.4f < 0.05 at m=%zu",
                  cell ? cell->ratio : 0.0, cell ? cell->mc_se : 0.0, r.quantile_normality.ks_distance,
                  r.quantile_normality.m)};
}

Outcome kde() {
  auto c = config_for("kde-supeff");
  const auto r = ic::run_kde_supeff(c);
  bool ok = false, under_ok = true;
  double fixed27 = 0.0, se27 = 0.0, worst_under = 1.0;
  for (const auto& row : r.rows) {
    if (row.m == 27) {
      fixed27 = row.ratio_fixed_policy;
      se27 = row.ratio_fixed_policy_se;
      ok = std::abs(fixed27 / 3.0 - 1.0) <= 0.20;
    }
    if (std::abs(row.ratio_undersmoothed - 1.0) > std::abs(worst_under - 1.0)) worst_under = row.ratio_undersmoothed;
    under_ok = under_ok && std::abs(row.ratio_undersmoothed - 1.0) <= 0.15;
  }
  return {ok && under_ok, fmt("fixed-bandwidth variance ratio at m=27 %.3f +- %.3f (target 3 +-20%%); undersmoothed "
                              "MSE ratio furthest from 1: %.4f (tol 15%%)",
                              fixed27, se27, worst_under)};
}

Outcome bias() {
  auto c = config_for("bias-scan");
  const auto r = ic::run_bias_scan(c);
  bool ok = r.rows.size() == 3;
  std::string detail;
  for (const auto& row : r.rows) {
    const double bound = 2 * row.se + 0.5 / std::sqrt(static_cast<double>(row.n));
    ok = ok && std::abs(row.bias_hat) <= bound;
    detail += fmt("n=%zu |b| %.2e <= %.2e; ", row.n, std::abs(row.bias_hat), bound);
  }
  return {ok, detail + fmt("R=%zu", c.replicates)};
}

Outcome maximal_risk() {
  const auto& cell = perturbed_1000_90();
  const double factor = cell.mse_pooled / cell.mse_global;
  const double se = cell.mc_se / (cell.ratio * cell.ratio);
  return {factor >= 2.0, fmt("(1000,90) pooled / global scaled risk %.3f +- %.3f >= 2", factor, se)};
}

// Criterion 13 goes through the command-line tool and compares written files.
int run_cli(const std::string& args) {
  const int status = std::system((std::string("'") + ISOCONQUER_CLI + "' " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("isoconquer-accept-" + std::to_string(::getpid()));
  const std::vector<std::string> runs{
      "table1 --experiment table1-right --ns 50,200 --ms 1,5,10 --replicates 200",
      "coverage --ns 500 --ms 10 --replicates 200 --limit-draws 10000",
      "normality --ns 500 --replicates 200",
      "current-status --ns 300 --ms 1,7 --replicates 100 --limit-draws 10000",
      "kde-supeff --ns 300 --ms 1,8 --replicates 200",
      "bias-scan --bias-ns 100,400 --replicates 200",
      "chernoff --chernoff-draws 3000",
      "pool --total-n 5000 --ms 10 --limit-draws 10000",
      "fit --ns 300",
  };
  std::size_t compared = 0, differing = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto a = dir / std::to_string(i) / "w1";
    const auto b = dir / std::to_string(i) / "w4";
    run_cli(runs[i] + " --workers 1 --out '" + a.string() + "'");
    run_cli(runs[i] + " --workers 4 --out '" + b.string() + "'");
    bool any = false;
    if (fs::exists(a)) {
      for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        any = true;
        ++compared;
        if (slurp(e.path()) != slurp(b / e.path().filename())) ++differing;
      }
    }
    if (!any) ++differing;
  }
  fs::remove_all(dir);
  return {differing == 0 && compared >= runs.size(),
          fmt("%zu CSV files from %zu subcommands, workers 1 vs 4: %zu differ", compared, runs.size(), differing)};
}

}  // namespace

// --allow-fail K (repeatable) names criteria documented as unattainable; they
// still print FAIL but do not set the exit status.
int main(int argc, char** argv) {
  std::vector<std::size_t> allowed;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) != "--allow-fail") {
      std::fprintf(stderr, "usage: %s [--allow-fail K]...\n", argv[0]);
      return 2;
    }
    allowed.push_back(static_cast<std::size_t>(std::atoi(argv[i + 1])));
  }
  if (argc % 2 == 0) {
    std::fprintf(stderr, "usage: %s [--allow-fail K]...\n", argv[0]);
    return 2;
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"table1-left", table_left},
      {"table1-right", table_right},
      {"cube-root-law", cube_root_law},
      {"pava-oracle", pava_oracle},
      {"switching-relation", switching},
      {"chernoff-sampler", chernoff},
      {"normality", normality},
      {"ci-coverage", coverage},
      {"current-status", current_status},
      {"kde-appendix", kde},
      {"bias-order", bias},
      {"maximal-risk", maximal_risk},
      {"determinism", determinism},
  };
  int failed = 0, blocking = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    if (!o.pass && std::find(allowed.begin(), allowed.end(), i + 1) == allowed.end()) ++blocking;
    std::printf("%s criterion %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed, %d outside the allowed list\n", failed, criteria.size(), blocking);
  return blocking == 0 ? 0 : 1;
}
