#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isoconquer/kde.hpp"
#include "isoconquer/pooling.hpp"

namespace isoconquer {

enum class ModelKind { fixed_linear, perturbed };

/// Invariant violation in an ExperimentConfig, naming the offending key.
class InvalidConfig : public std::invalid_argument {
 public:
  InvalidConfig(std::string key, const std::string& message)
      : std::invalid_argument(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct ExperimentConfig {
  std::string experiment = "table1-left";
  ModelKind model = ModelKind::fixed_linear;
  FunctionalKind functional = FunctionalKind::mu_inverse_at;
  Direction direction = Direction::nondecreasing;  // used by `fit`

  double noise_sd = 0.2;
  double a = 0.5;   // level of inverse and quantile functionals
  double x0 = 0.5;  // centre of the regression bump
  double t0 = 0.5;  // point of forward functionals and of the KDE
  double alpha = 0.05;

  // Grid: the cross product ns x ms, or (floor(total_n / m), m) for each m
  // when total_n is set. An empty ms asks for m = choose_m(phi, delta, n).
  std::vector<std::size_t> ns{1000};
  std::vector<std::size_t> ms{30};
  std::optional<std::size_t> total_n;
  double phi = 1.0 / 6.0;
  double delta = 0.0;

  std::size_t replicates = 2000;
  std::uint64_t seed = 1;
  unsigned workers = 1;

  double ks_threshold = 0.05;
  std::vector<std::size_t> bias_ns{500, 2000, 8000};

  KernelKind kernel = KernelKind::biweight;
  double kde_amplitude = 32.0;

  double chernoff_horizon = 2.5;
  double chernoff_step = 0.005;
  std::size_t chernoff_draws = 100000;
  // Draws behind the exact-limit interval and the Var(Z) estimate.
  std::size_t limit_draws = 20000;

  void validate() const;
  std::vector<std::pair<std::size_t, std::size_t>> cells() const;
};

/// Defaults of a named experiment: table1-left, table1-right, coverage,
/// normality, bias-scan, kde-supeff, current-status, chernoff, fit, pool.
ExperimentConfig default_config(const std::string& experiment);

/// Ratio of two MC risks and its jackknife standard error.
struct RatioEstimate {
  double ratio = 1.0;
  double se = 0.0;
};

/// sum(num) / sum(den) with leave-one-out jackknife SE.
RatioEstimate jackknife_ratio(std::span<const double> num, std::span<const double> den);

struct RatioCell {
  std::size_t n = 0;
  std::size_t m = 0;
  double ratio = 1.0;
  double mc_se = 0.0;
  double mse_global = 0.0;
  double mse_pooled = 0.0;
  std::size_t flagged = 0;
};

struct RatioTable {
  std::vector<std::size_t> rows;  // n values
  std::vector<std::size_t> cols;  // m values
  std::vector<RatioCell> cells;   // row-major over the grid actually run
  std::vector<std::string> failures;

  const RatioCell* find(std::size_t n, std::size_t m) const;
};

RatioTable run_ratio_table(const ExperimentConfig& config);

struct NormalityReport {
  std::size_t n = 0;
  std::size_t m = 0;
  double ks_distance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  bool pass = false;
  std::size_t degenerate = 0;  // replicates with sigma_hat == 0
  std::size_t flagged = 0;
  double mean_sigma2_hat = 0.0;
  std::vector<std::string> failures;
};

NormalityReport run_normality_check(const ExperimentConfig& config);

struct CoverageReport {
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.05;
  double empirical_coverage = 0.0;
  double avg_width = 0.0;
  double exact_coverage = 0.0;
  double exact_avg_width = 0.0;
  std::size_t flagged = 0;
  std::vector<std::string> failures;
};

CoverageReport run_coverage(const ExperimentConfig& config);

struct BiasRow {
  std::size_t n = 0;
  double bias_hat = 0.0;  // inverse functional at a
  double se = 0.0;
  double scaled = 0.0;  // |bias_hat| * n^(1/2)
  bool within_bound = false;
  double forward_bias = 0.0;  // forward functional at t0
  double forward_se = 0.0;
  double forward_scaled = 0.0;  // |forward_bias| * n^(1/3)
};

struct BiasReport {
  std::vector<BiasRow> rows;
  bool scaled_nonincreasing = false;
  bool pass = false;
  std::vector<std::string> failures;
};

BiasReport run_bias_scan(const ExperimentConfig& config);

struct KdeRow {
  std::size_t n = 0;
  std::size_t m = 0;
  double ratio_fixed_policy = 1.0;  // Var(global) / Var(pooled, fixed bandwidth)
  double ratio_fixed_policy_se = 0.0;
  double ratio_undersmoothed = 1.0;  // MSE(pooled, undersmoothed) / MSE(global)
  double ratio_undersmoothed_se = 0.0;
  // Under the perturbed densities f_n:
  double perturbed_scaled_bias_fixed = 0.0;  // n^(1/3) * bias of the fixed policy
  double perturbed_scaled_bias_fixed_se = 0.0;
  double perturbed_risk_fixed = 0.0;  // N^(2/3) * MSE
  double perturbed_risk_undersmoothed = 0.0;
};

struct KdeReport {
  std::vector<KdeRow> rows;
  std::vector<std::string> failures;
};

KdeReport run_kde_supeff(const ExperimentConfig& config);

struct CurrentStatusReport {
  RatioTable table;  // quantile functional at a
  NormalityReport quantile_normality;
  NormalityReport cdf_normality;
  double var_z = 0.0;
  double sigma2_quantile_theory = 0.0;
  double sigma2_cdf_theory = 0.0;
  std::vector<std::string> failures;
};

CurrentStatusReport run_current_status(const ExperimentConfig& config);

struct ChernoffReport {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double se_mean = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double q_lower = 0.0;  // 0.025 quantile
  double q_upper = 0.0;  // 0.975 quantile
  double q_se = 0.0;
  double boundary_rate = 0.0;
  double sd_coarse = 0.0;
  double sd_fine = 0.0;
  double sd_combined_se = 0.0;
  bool mean_ok = false;
  bool symmetric = false;
  bool refinement_ok = false;
  bool boundary_ok = false;
  std::vector<std::string> failures;
};

ChernoffReport run_chernoff_check(const ExperimentConfig& config);

}  // namespace isoconquer
