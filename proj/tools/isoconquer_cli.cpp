// Batch front-end: parses the config, runs one experiment and writes the
// requested tables. Exit status 0 only when the run and all its checks pass.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isoconquer/config.hpp"
#include "isoconquer/emit.hpp"
#include "isoconquer/experiments.hpp"
#include "isoconquer/limit_dist.hpp"
#include "isoconquer/models.hpp"
#include "isoconquer/pooling.hpp"

namespace ic = isoconquer;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --key value / --key=value pairs left over after the fixed flags
std::vector<ic::ConfigEntry> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<ic::ConfigEntry> out;
  std::map<std::string, bool> seen;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string token = extras[i];
    if (token.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + token + "'");
    token = token.substr(2);
    std::string value;
    if (const auto eq = token.find('='); eq != std::string::npos) {
      value = token.substr(eq + 1);
      token = token.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("flag --" + token + " needs a value");
      value = extras[++i];
    }
    std::replace(token.begin(), token.end(), '-', '_');
    if (!ic::is_config_key(token)) throw UsageError("unknown flag --" + token);
    if (seen[token]) throw UsageError("flag --" + token + " given twice");
    seen[token] = true;
    out.push_back({token, value, 0, "command line"});
  }
  return out;
}

ic::SortedSample read_xy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file " + path);
  std::string line;
  std::vector<double> xs, ys;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find_first_not_of("0123456789+-.eE, \t") != std::string::npos) continue;
    }
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',')) {
      throw std::runtime_error("data file " + path + ": expected 'x,y' rows");
    }
    xs.push_back(std::stod(a));
    ys.push_back(std::stod(b));
  }
  return ic::SortedSample::from_unsorted(xs, ys);
}

ic::SortedSample model_sample(const ic::ExperimentConfig& c, std::size_t n, ic::Stream& stream) {
  if (c.functional == ic::FunctionalKind::cdf_at || c.functional == ic::FunctionalKind::quantile_at) {
    return ic::current_status_sample(ic::draw_current_status(ic::CurrentStatusModel{}, n, stream));
  }
  const ic::MeanFunction mean = c.model == ic::ModelKind::perturbed
                                    ? ic::MeanFunction{ic::PerturbedMean{ic::PerturbationBump{c.x0, n}}}
                                    : ic::MeanFunction{ic::LinearMean{}};
  return ic::draw_regression(ic::RegressionModel(mean, c.noise_sd), n, stream);
}

ic::RunResults run_fit(const ic::ExperimentConfig& c, const std::string& data_path) {
  ic::Stream stream({c.seed, ic::domain_tag("fit"), 0, 0});
  const ic::SortedSample sample = data_path.empty() ? model_sample(c, c.ns.front(), stream) : read_xy_csv(data_path);
  const ic::StepEstimate fit = ic::fit_isotonic(sample, c.direction);
  ic::ResultTable t;
  t.name = "fit";
  t.columns = {"breakpoint", "level"};
  for (std::size_t i = 0; i < fit.levels().size(); ++i) t.rows.push_back({fit.breakpoints()[i], fit.levels()[i]});
  return {"fit", {t}, {}};
}

ic::RunResults run_pool(const ic::ExperimentConfig& c) {
  const auto [n, m] = c.cells().front();
  const std::size_t total = c.total_n.value_or(n * m);
  ic::Stream stream({c.seed, ic::domain_tag("pool"), 0, 0});
  const ic::SortedSample all = model_sample(c, total, stream);
  const ic::Split parts = ic::split(all.size(), m, true, {c.seed, ic::domain_tag("pool-split"), 0, 0});
  std::vector<ic::SortedSample> blocks;
  for (const auto& idx : parts.blocks) {
    std::vector<double> xs, ys;
    for (auto i : idx) {
      xs.push_back(all.xs()[i]);
      ys.push_back(all.ys()[i]);
    }
    blocks.push_back(ic::SortedSample::from_unsorted(xs, ys));
  }
  ic::Functional f;
  f.kind = c.functional;
  f.target = (c.functional == ic::FunctionalKind::mu_at || c.functional == ic::FunctionalKind::cdf_at) ? c.t0 : c.a;
  const ic::PooledEstimate pe = ic::pooled_point_estimate(blocks, f);

  ic::ResultTable t;
  t.name = "pool";
  t.columns = {"N", "n", "m", "discarded", "theta_bar", "sigma_hat", "ci_lo", "ci_hi", "exact_lo", "exact_hi",
               "flagged"};
  ic::RunResults out{"pool", {}, {}};
  if (pe.m >= 2) {
    const ic::Interval ci = ic::confidence_interval(pe, c.alpha);
    const auto draws =
        ic::cached_chernoff_draws({c.chernoff_horizon, c.chernoff_step, c.seed}, c.limit_draws, c.workers);
    const ic::Interval ex = ic::exact_limit_ci(pe, c.alpha, draws, {c.seed, ic::domain_tag("mfold", 0), 0, 0});
    t.rows.push_back({std::int64_t(total), std::int64_t(parts.plan.block_size), std::int64_t(m),
                      std::int64_t(parts.plan.discarded), pe.theta_bar, *pe.sigma_hat, ci.lo, ci.hi, ex.lo, ex.hi,
                      std::int64_t(pe.flagged)});
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.rows.push_back({std::int64_t(total), std::int64_t(parts.plan.block_size), std::int64_t(m),
                      std::int64_t(parts.plan.discarded), pe.theta_bar, nan, nan, nan, nan, nan,
                      std::int64_t(pe.flagged)});
    out.failures.push_back("pool: m = 1 gives no sigma_hat and no interval");
  }
  out.tables.push_back(std::move(t));
  return out;
}

ic::RunResults run(const std::string& command, const ic::ExperimentConfig& c, const std::string& data_path) {
  if (command == "fit") return run_fit(c, data_path);
  if (command == "pool") return run_pool(c);
  if (command == "chernoff") return ic::to_results(ic::run_chernoff_check(c));
  if (command == "table1") return ic::to_results(c.experiment, ic::run_ratio_table(c));
  if (command == "coverage") return ic::to_results(ic::run_coverage(c));
  if (command == "normality") return ic::to_results(ic::run_normality_check(c));
  if (command == "bias-scan") return ic::to_results(ic::run_bias_scan(c));
  if (command == "kde-supeff") return ic::to_results(ic::run_kde_supeff(c));
  if (command == "current-status") return ic::to_results(ic::run_current_status(c));
  throw UsageError("unknown subcommand " + command);
}

void print_failures(const std::vector<std::string>& failures) {
  std::cerr << nlohmann::json{{"failures", failures}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divide-and-conquer inference for isotonic regression: experiments and tables"};
  app.require_subcommand(1);
  app.allow_extras();
  app.fallthrough();

  std::string config_path, out_dir = "out", data_path;
  std::vector<std::string> formats;
  std::string seed, workers;
  app.add_option("--config", config_path, "Config file (key = value with [sections])");
  app.add_option("--seed", seed, "Master seed (u64)");
  app.add_option("--workers", workers, "Parallel width; results do not depend on it");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--format", formats, "csv | json | svg (repeatable; default csv)");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"fit", "Isotonic fit of one sample (from the model or --data)"},
      {"pool", "Pooled estimate, sigma_hat and intervals on N = total_n points"},
      {"chernoff", "Chernoff sampler checks"},
      {"table1", "MSE-ratio table (experiment = table1-left | table1-right)"},
      {"coverage", "Coverage of the pooled confidence intervals"},
      {"normality", "KS distance of the studentized pooled statistic"},
      {"bias-scan", "Bias of the inverse and forward functionals across n"},
      {"kde-supeff", "Pooled KDE with fixed and undersmoothed bandwidths"},
      {"current-status", "Current-status NPMLE: ratio table and normality"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    if (name == "fit") sub->add_option("--data", data_path, "CSV with x,y columns");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    std::vector<ic::ConfigEntry> entries;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ic::ConfigError(config_path, 0, "", "cannot open config file");
      entries = ic::read_config_entries(in, config_path);
    }
    std::vector<std::string> extras = app.remaining(true);
    if (!seed.empty()) extras.insert(extras.end(), {"--seed", seed});
    if (!workers.empty()) extras.insert(extras.end(), {"--workers", workers});
    for (auto& e : parse_overrides(extras)) entries.push_back(std::move(e));

    std::string hint = command == "table1" ? "table1-left" : command;
    for (const auto& e : entries) {
      if (e.key != "experiment") continue;
      const bool table = e.value == "table1" || e.value == "table1-left" || e.value == "table1-right";
      if ((command == "table1" && !table) || (command != "table1" && e.value != command)) {
        throw ic::ConfigError(e.source, e.line, e.key,
                              "experiment '" + e.value + "' does not match subcommand '" + command + "'");
      }
    }
    const ic::ExperimentConfig config = ic::build_config(entries, hint);

    std::vector<ic::Format> fmts;
    for (const auto& f : formats) fmts.push_back(ic::format_from_name(f));
    if (fmts.empty()) fmts.push_back(ic::Format::csv);

    ic::RunManifest manifest;
    manifest.config_hash = ic::config_hash(config);
    manifest.seed = config.seed;
    manifest.tool_version = ic::kToolVersion;
    manifest.config_text = ic::canonical_config_text(config);
    manifest.started = ic::utc_timestamp();
    ic::RunResults results = run(command, config, data_path);
    manifest.finished = ic::utc_timestamp();

    for (const auto& p : ic::write_outputs(out_dir, results, manifest, fmts)) std::cout << p.string() << '\n';
    if (!results.ok()) {
      print_failures(results.failures);
      return 1;
    }
    return 0;
  } catch (const ic::ConfigError& e) {
    print_failures({std::string("config: ") + e.what()});
    return 2;
  } catch (const UsageError& e) {
    print_failures({std::string("usage: ") + e.what()});
    return 2;
  } catch (const std::exception& e) {
    print_failures({std::string("error: ") + e.what()});
    return 1;
  }
}
