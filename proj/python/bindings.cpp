#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isoconquer/config.hpp"
#include "isoconquer/emit.hpp"
#include "isoconquer/experiments.hpp"
#include "isoconquer/isotonic.hpp"
#include "isoconquer/kde.hpp"
#include "isoconquer/limit_dist.hpp"
#include "isoconquer/pooling.hpp"

namespace py = pybind11;
namespace ic = isoconquer;

namespace {

ic::Direction direction_from(const std::string& name) {
  if (name == "nondecreasing") return ic::Direction::nondecreasing;
  if (name == "nonincreasing") return ic::Direction::nonincreasing;
  throw py::value_error("direction must be 'nondecreasing' or 'nonincreasing'");
}

ic::FunctionalKind functional_from(const std::string& name) {
  if (name == "mu_at") return ic::FunctionalKind::mu_at;
  if (name == "mu_inverse_at") return ic::FunctionalKind::mu_inverse_at;
  if (name == "cdf_at") return ic::FunctionalKind::cdf_at;
  if (name == "quantile_at") return ic::FunctionalKind::quantile_at;
  throw py::value_error("unknown functional '" + name + "'");
}

// Runs an experiment in-process; the result is the JSON document the CLI
// would write, as a string (callers json.loads it).
std::string run_experiment(const std::string& config_text, const std::string& experiment_hint) {
  const auto entries = [&] {
    std::istringstream in(config_text);
    return ic::read_config_entries(in, "<python>");
  }();
  const ic::ExperimentConfig c =
      ic::build_config(entries, experiment_hint.empty() ? std::nullopt : std::optional(experiment_hint));
  ic::RunResults r;
  {
    py::gil_scoped_release release;
    const std::string& e = c.experiment;
    if (e == "table1" || e == "table1-left" || e == "table1-right") {
      r = ic::to_results(e, ic::run_ratio_table(c));
    } else if (e == "coverage") {
      r = ic::to_results(ic::run_coverage(c));
    } else if (e == "normality") {
      r = ic::to_results(ic::run_normality_check(c));
    } else if (e == "bias-scan") {
      r = ic::to_results(ic::run_bias_scan(c));
    } else if (e == "kde-supeff") {
      r = ic::to_results(ic::run_kde_supeff(c));
    } else if (e == "current-status") {
      r = ic::to_results(ic::run_current_status(c));
    } else if (e == "chernoff") {
      r = ic::to_results(ic::run_chernoff_check(c));
    } else {
      throw std::invalid_argument("run_experiment: '" + e + "' is only available from the command line");
    }
  }
  ic::RunManifest m;
  m.config_hash = ic::config_hash(c);
  m.seed = c.seed;
  m.tool_version = ic::kToolVersion;
  m.config_text = ic::canonical_config_text(c);
  return ic::to_json(r, m);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Isotonic fits, pooled estimators and the Chernoff limit";

  py::register_exception<ic::ConfigError>(mod, "ConfigError", PyExc_ValueError);

  py::class_<ic::StepEstimate>(mod, "StepEstimate")
      .def("evaluate", &ic::StepEstimate::evaluate, py::arg("t"))
      .def("inverse", &ic::StepEstimate::inverse, py::arg("a"))
      .def_property_readonly("breakpoints",
                             [](const ic::StepEstimate& s) {
                               return std::vector<double>(s.breakpoints().begin(), s.breakpoints().end());
                             })
      .def_property_readonly("levels",
                             [](const ic::StepEstimate& s) {
                               return std::vector<double>(s.levels().begin(), s.levels().end());
                             })
      .def_property_readonly("direction", [](const ic::StepEstimate& s) {
        return s.direction() == ic::Direction::nondecreasing ? "nondecreasing" : "nonincreasing";
      });

  mod.def(
      "fit_isotonic",
      [](const std::vector<double>& xs, const std::vector<double>& ys, const std::string& direction) {
        return ic::fit_isotonic(ic::SortedSample::from_unsorted(xs, ys), direction_from(direction));
      },
      py::arg("xs"), py::arg("ys"), py::arg("direction") = "nondecreasing",
      "Least-squares monotone fit; tied covariates are averaged.");

  mod.def(
      "fit_current_status",
      [](const std::vector<double>& times, const std::vector<int>& indicators) {
        return ic::fit_current_status(times, indicators);
      },
      py::arg("times"), py::arg("indicators"));

  py::class_<ic::PooledEstimate>(mod, "PooledEstimate")
      .def_readonly("theta_bar", &ic::PooledEstimate::theta_bar)
      .def_readonly("subsample_estimates", &ic::PooledEstimate::subsample_estimates)
      .def_readonly("sigma_hat", &ic::PooledEstimate::sigma_hat)
      .def_readonly("rate_rn", &ic::PooledEstimate::rate_rn)
      .def_readonly("m", &ic::PooledEstimate::m)
      .def_readonly("n", &ic::PooledEstimate::n)
      .def_readonly("flagged", &ic::PooledEstimate::flagged);

  mod.def(
      "pool",
      [](const std::vector<std::vector<double>>& xs, const std::vector<std::vector<double>>& ys,
         const std::string& functional, double target) {
        if (xs.size() != ys.size()) throw py::value_error("xs and ys need the same number of blocks");
        std::vector<ic::SortedSample> blocks;
        for (std::size_t j = 0; j < xs.size(); ++j) blocks.push_back(ic::SortedSample::from_unsorted(xs[j], ys[j]));
        return ic::pooled_point_estimate(blocks, {functional_from(functional), target});
      },
      py::arg("xs"), py::arg("ys"), py::arg("functional") = "mu_inverse_at", py::arg("target") = 0.5,
      "Fits every block, extracts the functional and averages.");

  mod.def(
      "pool_estimates",
      [](std::vector<double> estimates, std::size_t n, std::optional<double> rate_rn) {
        return ic::pool_estimates(std::move(estimates), n, rate_rn);
      },
      py::arg("estimates"), py::arg("n"), py::arg("rate_rn") = py::none());

  mod.def(
      "sigma_hat", [](const std::vector<double>& e, double r) { return ic::sigma_hat(e, r); }, py::arg("estimates"),
      py::arg("rate_rn"));

  mod.def(
      "confidence_interval",
      [](const ic::PooledEstimate& pe, double alpha) {
        const auto ci = ic::confidence_interval(pe, alpha);
        return py::make_tuple(ci.lo, ci.hi);
      },
      py::arg("estimate"), py::arg("alpha") = 0.05);

  mod.def(
      "choose_m", [](double phi, double delta, std::size_t n) { return ic::choose_m({phi, delta}, n); },
      py::arg("phi"), py::arg("delta"), py::arg("n"));

  mod.def(
      "sample_chernoff",
      [](std::size_t count, std::uint64_t seed, double horizon, double step, unsigned workers) {
        py::gil_scoped_release release;
        return ic::sample_chernoff({horizon, step, seed}, count, workers).values;
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("horizon") = 2.5, py::arg("step") = 0.005,
      py::arg("workers") = 1);

  mod.def(
      "mfold_quantile",
      [](const std::vector<double>& draws, std::size_t m, double alpha, std::uint64_t seed) {
        return ic::mfold_quantile(draws, m, alpha, {seed, ic::domain_tag("mfold"), 0, 0});
      },
      py::arg("draws"), py::arg("m"), py::arg("alpha"), py::arg("seed") = 0);

  mod.def("kappa_forward", &ic::kappa_forward, py::arg("v2"), py::arg("mu_prime_t0"), py::arg("f_t0"));
  mod.def("kappa_tilde_inverse", &ic::kappa_tilde_inverse, py::arg("v2"), py::arg("mu_prime_t0"), py::arg("f_t0"));

  mod.def(
      "kde_at_point",
      [](const std::vector<double>& sample, double t0, double h, const std::string& kernel) {
        return ic::kde_at_point(sample, t0, h, ic::kernel_from_name(kernel));
      },
      py::arg("sample"), py::arg("t0"), py::arg("h"), py::arg("kernel") = "biweight");

  mod.def("run_experiment", &run_experiment, py::arg("config_text"), py::arg("experiment") = "",
          "Runs an experiment from config text and returns the JSON results document.");

  mod.attr("__version__") = "0.1.0";
}
