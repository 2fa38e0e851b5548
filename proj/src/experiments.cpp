#include "isoconquer/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "isoconquer/limit_dist.hpp"
#include "isoconquer/models.hpp"
#include "isoconquer/parallel.hpp"
#include "isoconquer/stats.hpp"

namespace isoconquer {

namespace {

constexpr std::size_t kMaxPointsPerReplicate = 50'000'000;

const char* model_name(ModelKind kind) { return kind == ModelKind::perturbed ? "perturbed" : "fixed"; }

const char* functional_name(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::mu_at:
      return "mu_at";
    case FunctionalKind::mu_inverse_at:
      return "mu_inverse_at";
    case FunctionalKind::cdf_at:
      return "cdf_at";
    case FunctionalKind::quantile_at:
      return "quantile_at";
  }
  return "?";
}

bool is_inverse(FunctionalKind kind) {
  return kind == FunctionalKind::mu_inverse_at || kind == FunctionalKind::quantile_at;
}

std::string cell_name(std::string_view family, const ExperimentConfig& c, std::size_t n, std::size_t m) {
  std::ostringstream os;
  os << family << '|' << model_name(c.model) << '|' << functional_name(c.functional) << '|' << n << '|' << m;
  return os.str();
}

RegressionModel regression_model(const ExperimentConfig& c, std::size_t n) {
  if (c.model == ModelKind::perturbed) {
    return RegressionModel(PerturbedMean{PerturbationBump{c.x0, n}}, c.noise_sd);
  }
  return RegressionModel(LinearMean{}, c.noise_sd);
}

// mu^{-1}(a) for a continuous increasing mean, by bisection.
double invert_mean(const RegressionModel& model, double a) {
  double lo = 0.0, hi = 1.0;
  if (model.mean(lo) >= a) return 0.0;
  if (model.mean(hi) < a) return 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (model.mean(mid) < a ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Draws one block of n observations for the regression or current-status
// problem, and knows the true value of the functional.
struct Problem {
  std::function<SortedSample(std::size_t, Stream&)> draw;
  Functional functional;
  double truth = 0.0;
};

Problem make_problem(const ExperimentConfig& c, std::size_t n) {
  Problem p;
  p.functional.kind = c.functional;
  p.functional.direction = Direction::nondecreasing;
  const bool inverse = is_inverse(c.functional);
  p.functional.target = inverse ? c.a : c.t0;
  if (c.functional == FunctionalKind::cdf_at || c.functional == FunctionalKind::quantile_at) {
    // F_T uniform, exam times uniform: F_T(t) = t and F_T^{-1}(a) = a
    auto model = std::make_shared<CurrentStatusModel>();
    p.draw = [model](std::size_t size, Stream& s) {
      return current_status_sample(draw_current_status(*model, size, s));
    };
    p.truth = inverse ? c.a : c.t0;
    return p;
  }
  auto model = std::make_shared<RegressionModel>(regression_model(c, n));
  p.draw = [model](std::size_t size, Stream& s) { return draw_regression(*model, size, s); };
  p.truth = inverse ? invert_mean(*model, c.a) : model->mean(c.t0);
  return p;
}

struct Replicate {
  double global = 0.0;
  double pooled = 0.0;
  std::optional<double> sigma_hat;
  double rate_rn = 1.0;
  std::size_t flagged = 0;
  std::string error;
};

Replicate pooled_replicate(const Problem& p, std::size_t n, std::size_t m, StreamKey key, bool want_global) {
  Replicate out;
  std::vector<SortedSample> blocks;
  blocks.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    key.substream = static_cast<std::uint32_t>(j);
    Stream stream(key);
    blocks.push_back(p.draw(n, stream));
  }
  const PooledEstimate pe = pooled_point_estimate(blocks, p.functional);
  out.pooled = pe.theta_bar;
  out.sigma_hat = pe.sigma_hat;
  out.rate_rn = pe.rate_rn;
  out.flagged = pe.flagged;
  if (want_global) {
    // with m = 1 the pooled estimator is the global one
    out.global = m == 1 ? pe.theta_bar : estimate_functional(SortedSample::merge(blocks), p.functional).value;
  }
  return out;
}

std::vector<Replicate> run_replicates(const ExperimentConfig& c, const Problem& p, std::size_t n, std::size_t m,
                                      std::uint32_t domain, bool want_global) {
  std::vector<Replicate> out(c.replicates);
  parallel_for(c.replicates, c.workers, [&](std::size_t r) {
    try {
      out[r] = pooled_replicate(p, n, m, {c.seed, domain, static_cast<std::uint32_t>(r), 0}, want_global);
    } catch (const std::exception& e) {
      out[r].error = e.what();
    }
  });
  return out;
}

void collect_errors(const std::vector<Replicate>& reps, const std::string& where, std::vector<std::string>& failures) {
  std::size_t count = 0;
  std::string first;
  for (const auto& r : reps) {
    if (!r.error.empty()) {
      if (count == 0) first = r.error;
      ++count;
    }
  }
  if (count > 0) {
    failures.push_back(where + ": " + std::to_string(count) + " replicate(s) failed, first: " + first);
  }
}

double mean_of(std::span<const double> xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

// Sample variance of xs with leave-one-out jackknife values of the variance.
struct VarianceJack {
  double variance = 0.0;
  std::vector<double> leave_one_out;
};

VarianceJack jackknife_variance(std::span<const double> xs) {
  const std::size_t r = xs.size();
  const double centre = mean_of(xs);
  KahanSum s1, s2;
  for (double x : xs) {
    s1.add(x - centre);
    s2.add((x - centre) * (x - centre));
  }
  const double rr = static_cast<double>(r);
  VarianceJack out;
  out.variance = (s2.value() - s1.value() * s1.value() / rr) / (rr - 1.0);
  out.leave_one_out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double d = xs[i] - centre;
    const double a1 = s1.value() - d;
    const double a2 = s2.value() - d * d;
    out.leave_one_out[i] = (a2 - a1 * a1 / (rr - 1.0)) / (rr - 2.0);
  }
  return out;
}

double jackknife_se(std::span<const double> leave_one_out) {
  const std::size_t r = leave_one_out.size();
  const double centre = mean_of(leave_one_out);
  KahanSum ss;
  for (double v : leave_one_out) ss.add((v - centre) * (v - centre));
  return std::sqrt(static_cast<double>(r - 1) / static_cast<double>(r) * ss.value());
}

NormalityReport normality_from(const ExperimentConfig& c, const Problem& p, std::size_t n, std::size_t m,
                               const std::string& family) {
  NormalityReport rep;
  rep.n = n;
  rep.m = m;
  const auto reps = run_replicates(c, p, n, m, domain_tag(cell_name(family, c, n, m)), false);
  collect_errors(reps, family, rep.failures);
  std::vector<double> stats;
  stats.reserve(reps.size());
  KahanSum sigma2;
  std::size_t used = 0;
  for (const auto& r : reps) {
    if (!r.error.empty()) continue;
    rep.flagged += r.flagged;
    const double scaled = std::sqrt(static_cast<double>(m)) * r.rate_rn * (r.pooled - p.truth);
    if (m == 1) {
      stats.push_back(scaled);
      continue;
    }
    sigma2.add(*r.sigma_hat * *r.sigma_hat);
    ++used;
    if (!(*r.sigma_hat > 0.0)) {
      ++rep.degenerate;
      continue;
    }
    stats.push_back(scaled / *r.sigma_hat);
  }
  if (used > 0) rep.mean_sigma2_hat = sigma2.value() / static_cast<double>(used);
  if (rep.degenerate > 0) {
    rep.failures.push_back(family + ": " + std::to_string(rep.degenerate) + " replicate(s) with sigma_hat = 0");
  }
  if (stats.size() < 2) {
    rep.failures.push_back(family + ": fewer than two usable replicates");
    return rep;
  }
  if (m == 1) {
    // no sigma_hat: standardize by the spread across replicates
    const Moments mo = moments(stats);
    for (double& s : stats) s = (s - mo.mean) / std::sqrt(mo.variance);
  }
  const Moments mo = moments(stats);
  rep.skewness = mo.skewness;
  rep.kurtosis = mo.kurtosis;
  rep.ks_distance = ks_distance_normal(stats);
  rep.pass = m >= 2 && rep.ks_distance < c.ks_threshold && rep.degenerate == 0;
  if (m == 1) {
    rep.failures.push_back(family + ": m = 1, the limit is Chernoff-type and normality is not expected");
  } else if (rep.ks_distance >= c.ks_threshold) {
    std::ostringstream os;
    os << family << ": KS distance " << rep.ks_distance << " >= " << c.ks_threshold << " at n = " << n
       << ", m = " << m;
    rep.failures.push_back(os.str());
  }
  return rep;
}

std::size_t first_m(const ExperimentConfig& c, std::size_t n) {
  return c.ms.empty() ? choose_m({c.phi, c.delta}, n) : c.ms.front();
}

ChernoffSampler limit_sampler(const ExperimentConfig& c) {
  return {c.chernoff_horizon, c.chernoff_step, c.seed};
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const char* key, const std::string& msg) { throw InvalidConfig(key, msg); };
  if (replicates < 2) fail("replicates", "replicates must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "alpha must lie in (0, 1)");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) fail("noise_sd", "noise_sd must be finite and >= 0");
  if (!(x0 > 0.0 && x0 < 1.0)) fail("x0", "x0 must lie in (0, 1)");
  if (!(t0 > 0.0 && t0 < 1.0)) fail("t0", "t0 must lie in (0, 1)");
  if ((functional == FunctionalKind::quantile_at || functional == FunctionalKind::cdf_at) &&
      !(a > 0.0 && a < 1.0)) {
    fail("a", "a must lie in (0, 1) for current-status functionals");
  }
  if (direction != Direction::nondecreasing && experiment != "fit") {
    fail("direction", "direction = nonincreasing is only supported by fit");
  }
  if (ns.empty() && !total_n) fail("ns", "grid needs at least one n (ns) or total_n");
  for (auto n : ns) {
    if (n == 0) fail("ns", "every n must be >= 1");
  }
  if (total_n && *total_n == 0) fail("total_n", "total_n must be >= 1");
  for (auto m : ms) {
    if (m == 0) fail("ms", "every m must be >= 1");
    if (total_n && m > *total_n) {
      fail("ms", "m = " + std::to_string(m) + " exceeds N = total_n = " + std::to_string(*total_n) +
                     " (constraint: m <= N)");
    }
  }
  if (total_n && ms.empty()) fail("ms", "total_n needs an explicit list of m values");
  if (!(phi > 0.0)) fail("phi", "phi must be positive");
  if (delta < 0.0 || delta > 2.0 * phi) fail("delta", "delta must lie in [0, 2 phi]");
  if (!(ks_threshold > 0.0)) fail("ks_threshold", "ks_threshold must be positive");
  for (auto n : bias_ns) {
    if (n < 2) fail("bias_ns", "every bias_n must be >= 2");
  }
  if (!(kde_amplitude >= 0.0)) fail("kde_amplitude", "kde_amplitude must be >= 0");
  try {
    ChernoffSampler{chernoff_horizon, chernoff_step, seed}.validate();
  } catch (const std::invalid_argument& e) {
    fail("chernoff_step", e.what());
  }
  if (chernoff_draws == 0) fail("chernoff_draws", "chernoff_draws must be >= 1");
  if (limit_draws < kMinChernoffDraws) fail("limit_draws", "limit_draws must be >= 10000");
  for (auto [n, m] : cells()) {
    if (n == 0) fail("ms", "m = " + std::to_string(m) + " leaves n = floor(N / m) = 0");
    if (n * m > kMaxPointsPerReplicate) fail("ns", "n * m exceeds the memory budget of 5e7 points per replicate");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> ExperimentConfig::cells() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (total_n) {
    for (auto m : ms) out.emplace_back(m == 0 ? 0 : *total_n / m, m);
    return out;
  }
  for (auto n : ns) {
    if (ms.empty()) {
      out.emplace_back(n, choose_m({phi, delta}, n));
    } else {
      for (auto m : ms) out.emplace_back(n, m);
    }
  }
  return out;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  const std::vector<std::size_t> table_ns{50, 100, 200, 500, 1000, 3000, 10000};
  const std::vector<std::size_t> table_ms{5, 10, 15, 30, 45, 60, 90};
  if (experiment == "table1-left" || experiment == "table1") {
    c.ns = table_ns;
    c.ms = table_ms;
  } else if (experiment == "table1-right") {
    c.model = ModelKind::perturbed;
    c.ns = table_ns;
    c.ms = table_ms;
  } else if (experiment == "coverage") {
    c.ns = {1000};
    c.ms = {50};
  } else if (experiment == "normality") {
    c.ns = {1000};
    c.ms = {};
  } else if (experiment == "bias-scan") {
    c.replicates = 10000;
  } else if (experiment == "kde-supeff") {
    c.ns = {1000};
    c.ms = {1, 8, 27};
  } else if (experiment == "current-status") {
    c.functional = FunctionalKind::quantile_at;
    c.ns = {1000};
    c.ms = {1, 27};
  } else if (experiment == "chernoff") {
  } else if (experiment == "fit") {
    c.ms = {1};
  } else if (experiment == "pool") {
    c.ns = {};
    c.total_n = 50000;
    c.ms = {50};
  } else {
    throw std::invalid_argument("unknown experiment '" + experiment + "'");
  }
  return c;
}

RatioEstimate jackknife_ratio(std::span<const double> num, std::span<const double> den) {
  if (num.size() != den.size() || num.size() < 2) {
    throw std::invalid_argument("jackknife_ratio: need two equal-length series of length >= 2");
  }
  KahanSum a, b;
  for (std::size_t i = 0; i < num.size(); ++i) {
    a.add(num[i]);
    b.add(den[i]);
  }
  RatioEstimate out;
  out.ratio = a.value() / b.value();
  std::vector<double> loo(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) loo[i] = (a.value() - num[i]) / (b.value() - den[i]);
  out.se = jackknife_se(loo);
  return out;
}

const RatioCell* RatioTable::find(std::size_t n, std::size_t m) const {
  for (const auto& c : cells) {
    if (c.n == n && c.m == m) return &c;
  }
  return nullptr;
}

RatioTable run_ratio_table(const ExperimentConfig& config) {
  config.validate();
  RatioTable table;
  std::set<std::size_t> rows, cols;
  for (auto [n, m] : config.cells()) {
    rows.insert(n);
    cols.insert(m);
  }
  table.rows.assign(rows.begin(), rows.end());
  table.cols.assign(cols.begin(), cols.end());

  for (auto [n, m] : config.cells()) {
    const Problem p = make_problem(config, n);
    const std::string where = "cell n=" + std::to_string(n) + " m=" + std::to_string(m);
    const auto reps = run_replicates(config, p, n, m, domain_tag(cell_name("ratio", config, n, m)), true);
    collect_errors(reps, where, table.failures);
    std::vector<double> num, den;
    RatioCell cell;
    cell.n = n;
    cell.m = m;
    for (const auto& r : reps) {
      if (!r.error.empty()) continue;
      num.push_back((r.global - p.truth) * (r.global - p.truth));
      den.push_back((r.pooled - p.truth) * (r.pooled - p.truth));
      cell.flagged += r.flagged;
    }
    if (num.size() < 2) {
      table.failures.push_back(where + ": fewer than two usable replicates");
      table.cells.push_back(cell);
      continue;
    }
    cell.mse_global = mean_of(num);
    cell.mse_pooled = mean_of(den);
    if (!(cell.mse_pooled > 0.0)) {
      table.failures.push_back(where + ": pooled MSE is zero, ratio undefined");
    } else {
      const RatioEstimate est = jackknife_ratio(num, den);
      cell.ratio = est.ratio;
      cell.mc_se = est.se;
    }
    if (!(cell.ratio > 0.0) || !std::isfinite(cell.ratio) || !(cell.mc_se >= 0.0)) {
      table.failures.push_back(where + ": ratio or mc_se out of range");
    }
    if (m == 1 && cell.ratio != 1.0) table.failures.push_back(where + ": m = 1 ratio differs from 1");
    table.cells.push_back(cell);
  }

  if (config.model == ModelKind::fixed_linear && !config.total_n) {
    // ratios should not fall as m grows, up to 2 MC standard errors
    for (auto n : table.rows) {
      const RatioCell* prev = nullptr;
      for (auto m : table.cols) {
        const RatioCell* cur = table.find(n, m);
        if (cur == nullptr) continue;
        if (prev != nullptr) {
          const double tol = 2.0 * std::hypot(prev->mc_se, cur->mc_se);
          if (cur->ratio < prev->ratio - tol) {
            std::ostringstream os;
            os << "trend: n=" << n << " ratio falls from " << prev->ratio << " (m=" << prev->m << ") to "
               << cur->ratio << " (m=" << m << ") by more than 2 MC SE";
            table.failures.push_back(os.str());
          }
        }
        prev = cur;
      }
    }
  }
  return table;
}

NormalityReport run_normality_check(const ExperimentConfig& config) {
  config.validate();
  const std::size_t n = config.total_n ? *config.total_n / first_m(config, 0) : config.ns.front();
  const std::size_t m = first_m(config, n);
  return normality_from(config, make_problem(config, n), n, m, "normality");
}

CoverageReport run_coverage(const ExperimentConfig& config) {
  config.validate();
  CoverageReport rep;
  const auto cell = config.cells().front();
  const std::size_t n = cell.first, m = cell.second;
  rep.n = n;
  rep.m = m;
  rep.alpha = config.alpha;
  if (m < 2) {
    rep.failures.push_back("coverage: needs m >= 2");
    return rep;
  }
  const Problem p = make_problem(config, n);
  const auto reps = run_replicates(config, p, n, m, domain_tag(cell_name("coverage", config, n, m)), false);
  collect_errors(reps, "coverage", rep.failures);

  const auto draws = cached_chernoff_draws(limit_sampler(config), config.limit_draws, config.workers);
  const auto dist = mfold_distribution(draws, m, {config.seed, domain_tag("mfold", static_cast<std::uint32_t>(m))});
  const ConvolutionQuantiles q{sorted_quantile(dist, config.alpha / 2.0), sorted_quantile(dist, 1.0 - config.alpha / 2.0)};

  std::size_t used = 0, hit = 0, exact_hit = 0;
  KahanSum width, exact_width;
  for (const auto& r : reps) {
    if (!r.error.empty()) continue;
    PooledEstimate pe;
    pe.theta_bar = r.pooled;
    pe.sigma_hat = r.sigma_hat;
    pe.rate_rn = r.rate_rn;
    pe.m = m;
    pe.n = n;
    const Interval ci = confidence_interval(pe, config.alpha);
    const Interval ex = exact_limit_ci(pe, q);
    ++used;
    hit += ci.contains(p.truth);
    exact_hit += ex.contains(p.truth);
    width.add(ci.width());
    exact_width.add(ex.width());
    rep.flagged += r.flagged;
  }
  if (used == 0) {
    rep.failures.push_back("coverage: no usable replicates");
    return rep;
  }
  const double u = static_cast<double>(used);
  rep.empirical_coverage = static_cast<double>(hit) / u;
  rep.avg_width = width.value() / u;
  rep.exact_coverage = static_cast<double>(exact_hit) / u;
  rep.exact_avg_width = exact_width.value() / u;
  return rep;
}

BiasReport run_bias_scan(const ExperimentConfig& config) {
  config.validate();
  BiasReport rep;
  rep.pass = true;
  for (std::size_t n : config.bias_ns) {
    const auto model = regression_model(config, n);
    const double inv_truth = invert_mean(model, config.a);
    const double fwd_truth = model.mean(config.t0);
    std::vector<double> inv(config.replicates), fwd(config.replicates);
    std::vector<std::string> errors(config.replicates);
    const std::uint32_t domain = domain_tag(cell_name("bias", config, n, 1));
    parallel_for(config.replicates, config.workers, [&](std::size_t r) {
      try {
        const auto sample = draw_regression(model, n, StreamKey{config.seed, domain, static_cast<std::uint32_t>(r), 0});
        const StepEstimate fit = fit_isotonic(sample, Direction::nondecreasing);
        inv[r] = fit.inverse(config.a) - inv_truth;
        fwd[r] = fit.evaluate(config.t0) - fwd_truth;
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    });
    for (const auto& e : errors) {
      if (!e.empty()) {
        rep.failures.push_back("bias n=" + std::to_string(n) + ": " + e);
        rep.pass = false;
        break;
      }
    }
    const double rr = static_cast<double>(config.replicates);
    const Moments mi = moments(inv);
    const Moments mf = moments(fwd);
    BiasRow row;
    row.n = n;
    row.bias_hat = mi.mean;
    row.se = std::sqrt(mi.variance / rr);
    row.scaled = std::abs(mi.mean) * std::sqrt(static_cast<double>(n));
    row.within_bound = std::abs(row.bias_hat) <= 2.0 * row.se + 0.5 / std::sqrt(static_cast<double>(n));
    row.forward_bias = mf.mean;
    row.forward_se = std::sqrt(mf.variance / rr);
    row.forward_scaled = std::abs(mf.mean) * std::cbrt(static_cast<double>(n));
    if (!row.within_bound) {
      std::ostringstream os;
      os << "bias n=" << n << ": |bias_hat| = " << std::abs(row.bias_hat) << " exceeds 2 se + 0.5 n^(-1/2)";
      rep.failures.push_back(os.str());
      rep.pass = false;
    }
    rep.rows.push_back(row);
  }
  rep.scaled_nonincreasing = true;
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    const auto& a = rep.rows[k - 1];
    const auto& b = rep.rows[k];
    const double noise = 2.0 * (a.se * std::sqrt(static_cast<double>(a.n)) + b.se * std::sqrt(static_cast<double>(b.n)));
    if (b.scaled > a.scaled + noise) rep.scaled_nonincreasing = false;
  }
  return rep;
}

KdeReport run_kde_supeff(const ExperimentConfig& config) {
  config.validate();
  KdeReport rep;
  const Kernel kernel{config.kernel};
  const TabulatedDensity f0 = TabulatedDensity::uniform();
  const double truth = f0(config.t0);
  for (auto [n, m] : config.cells()) {
    const std::size_t total = n * m;
    const double edge = std::min(config.t0, 1.0 - config.t0);
    if (!(policy_bandwidth(BandwidthPolicy::fixed_subsample, n, m) < edge)) {
      rep.failures.push_back("kde n=" + std::to_string(n) + ": bandwidth n^(-1/3) reaches the boundary");
      continue;
    }
    const PerturbedDensitySampler perturbed(f0, KdeBump{config.kde_amplitude}, config.t0, n);
    const double h_global = policy_bandwidth(BandwidthPolicy::undersmoothed, n, m);
    std::vector<double> global(config.replicates), fixed(config.replicates), under(config.replicates);
    std::vector<double> p_fixed(config.replicates), p_under(config.replicates);
    const std::uint32_t domain = domain_tag(cell_name("kde", config, n, m));
    parallel_for(config.replicates, config.workers, [&](std::size_t r) {
      std::vector<std::vector<double>> blocks(m);
      std::vector<double> all;
      all.reserve(total);
      for (std::size_t j = 0; j < m; ++j) {
        Stream s({config.seed, domain, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(j)});
        blocks[j].resize(n);
        for (double& x : blocks[j]) x = f0.sample(s);
        all.insert(all.end(), blocks[j].begin(), blocks[j].end());
      }
      global[r] = kde_at_point(all, config.t0, h_global, kernel);
      fixed[r] = pooled_kde(blocks, config.t0, BandwidthPolicy::fixed_subsample, kernel);
      under[r] = pooled_kde(blocks, config.t0, BandwidthPolicy::undersmoothed, kernel);
      for (std::size_t j = 0; j < m; ++j) {
        Stream s({config.seed, domain, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(m + j)});
        blocks[j] = perturbed.draw(n, s);
      }
      p_fixed[r] = pooled_kde(blocks, config.t0, BandwidthPolicy::fixed_subsample, kernel);
      p_under[r] = pooled_kde(blocks, config.t0, BandwidthPolicy::undersmoothed, kernel);
    });

    KdeRow row;
    row.n = n;
    row.m = m;
    const VarianceJack vg = jackknife_variance(global);
    const VarianceJack vf = jackknife_variance(fixed);
    row.ratio_fixed_policy = vg.variance / vf.variance;
    std::vector<double> loo(config.replicates);
    for (std::size_t i = 0; i < loo.size(); ++i) loo[i] = vg.leave_one_out[i] / vf.leave_one_out[i];
    row.ratio_fixed_policy_se = jackknife_se(loo);

    std::vector<double> se_under(config.replicates), se_global(config.replicates);
    for (std::size_t i = 0; i < se_under.size(); ++i) {
      se_under[i] = (under[i] - truth) * (under[i] - truth);
      se_global[i] = (global[i] - truth) * (global[i] - truth);
    }
    const RatioEstimate ru = jackknife_ratio(se_under, se_global);
    row.ratio_undersmoothed = ru.ratio;
    row.ratio_undersmoothed_se = ru.se;

    const double cube_n = std::cbrt(static_cast<double>(n));
    const double scale_total = std::pow(static_cast<double>(total), 2.0 / 3.0);
    const Moments mp = moments(p_fixed);
    row.perturbed_scaled_bias_fixed = cube_n * (mp.mean - truth);
    row.perturbed_scaled_bias_fixed_se = cube_n * std::sqrt(mp.variance / static_cast<double>(config.replicates));
    KahanSum rf, ru2;
    for (std::size_t i = 0; i < p_fixed.size(); ++i) {
      rf.add((p_fixed[i] - truth) * (p_fixed[i] - truth));
      ru2.add((p_under[i] - truth) * (p_under[i] - truth));
    }
    row.perturbed_risk_fixed = scale_total * rf.value() / static_cast<double>(config.replicates);
    row.perturbed_risk_undersmoothed = scale_total * ru2.value() / static_cast<double>(config.replicates);

    if (m == 1 && (row.ratio_fixed_policy != 1.0 || row.ratio_undersmoothed != 1.0)) {
      rep.failures.push_back("kde n=" + std::to_string(n) + " m=1: ratios differ from 1");
    }
    rep.rows.push_back(row);
  }
  return rep;
}

CurrentStatusReport run_current_status(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  if (c.functional != FunctionalKind::quantile_at && c.functional != FunctionalKind::cdf_at) {
    c.functional = FunctionalKind::quantile_at;
  }
  c.validate();
  CurrentStatusReport rep;
  c.functional = FunctionalKind::quantile_at;
  rep.table = run_ratio_table(c);
  for (const auto& f : rep.table.failures) rep.failures.push_back(f);

  const std::size_t n = c.ns.empty() ? c.cells().front().first : c.ns.front();
  const std::size_t m = choose_m({c.phi, c.delta}, n);
  rep.quantile_normality = normality_from(c, make_problem(c, n), n, m, "current-status quantile");
  for (const auto& f : rep.quantile_normality.failures) rep.failures.push_back(f);
  c.functional = FunctionalKind::cdf_at;
  rep.cdf_normality = normality_from(c, make_problem(c, n), n, m, "current-status cdf");

  // F_T(t) = t with uniform exam times: f_T = f = 1 everywhere
  const auto draws = cached_chernoff_draws(limit_sampler(c), c.limit_draws, c.workers);
  rep.var_z = moments(draws).variance;
  rep.sigma2_quantile_theory = sigma2_current_status_quantile(c.a, 1.0, 1.0, rep.var_z);
  rep.sigma2_cdf_theory = sigma2_current_status(c.t0, 1.0, 1.0, rep.var_z);
  return rep;
}

ChernoffReport run_chernoff_check(const ExperimentConfig& config) {
  config.validate();
  ChernoffReport rep;
  const ChernoffSampler sampler = limit_sampler(config);
  const ChernoffDraws draws = sample_chernoff(sampler, config.chernoff_draws, config.workers);
  rep.count = draws.values.size();
  const double count = static_cast<double>(rep.count);
  if (rep.count < 2) {
    rep.failures.push_back("chernoff: need at least two draws");
    return rep;
  }
  const Moments mo = moments(draws.values);
  rep.mean = mo.mean;
  rep.sd = std::sqrt(mo.variance);
  rep.se_mean = rep.sd / std::sqrt(count);
  rep.skewness = mo.skewness;
  rep.kurtosis = mo.kurtosis;
  std::vector<double> sorted = draws.values;
  std::sort(sorted.begin(), sorted.end());
  rep.q_lower = sorted_quantile(sorted, 0.025);
  rep.q_upper = sorted_quantile(sorted, 0.975);
  rep.q_se = std::hypot(quantile_standard_error(sorted, 0.025), quantile_standard_error(sorted, 0.975));
  rep.boundary_rate = static_cast<double>(draws.boundary_hits) / count;

  const RefinedChernoffDraws refined = sample_chernoff_refined(sampler, config.chernoff_draws, config.workers);
  auto sd_and_se = [](const std::vector<double>& xs) {
    const Moments m = moments(xs);
    const double sd = std::sqrt(m.variance);
    return std::pair{sd, sd * std::sqrt((m.kurtosis - 1.0) / (4.0 * static_cast<double>(xs.size())))};
  };
  const auto [sdc, sec] = sd_and_se(refined.coarse.values);
  const auto [sdf, sef] = sd_and_se(refined.fine.values);
  rep.sd_coarse = sdc;
  rep.sd_fine = sdf;
  rep.sd_combined_se = std::hypot(sec, sef);

  rep.mean_ok = std::abs(rep.mean) <= 3.0 * rep.se_mean;
  rep.symmetric = std::abs(rep.q_lower + rep.q_upper) <= 2.0 * rep.q_se;
  rep.refinement_ok = std::abs(sdc - sdf) <= 2.0 * rep.sd_combined_se;
  rep.boundary_ok = rep.boundary_rate < 1e-3;
  if (!rep.mean_ok) rep.failures.push_back("chernoff: |mean| exceeds 3 SE");
  if (!rep.symmetric) rep.failures.push_back("chernoff: quantiles not symmetric within 2 SE");
  if (!rep.refinement_ok) rep.failures.push_back("chernoff: SD at h and h/2 differ by more than 2 SE");
  if (!rep.boundary_ok) rep.failures.push_back("chernoff: boundary-hit rate >= 0.1%");
  if (rep.count >= 100000 && std::abs(rep.skewness) > 0.05) {
    rep.failures.push_back("chernoff: skewness outside +-0.05");
  }
  return rep;
}

}  // namespace isoconquer
