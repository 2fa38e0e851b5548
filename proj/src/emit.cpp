#include "isoconquer/emit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace isoconquer {

const char* const kToolVersion = "isoconquer 0.1.0";

namespace {

using json = nlohmann::json;

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

ResultTable normality_table(const NormalityReport& r, std::string name) {
  ResultTable t;
  t.name = std::move(name);
  t.columns = {"n", "m", "ks_distance", "skewness", "kurtosis", "pass", "degenerate", "flagged", "mean_sigma2_hat"};
  t.rows.push_back({as_int(r.n), as_int(r.m), r.ks_distance, r.skewness, r.kurtosis, r.pass, as_int(r.degenerate),
                    as_int(r.flagged), r.mean_sigma2_hat});
  return t;
}

std::string csv_field(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.6g", x);
          return buf;
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else {
          if (x.find_first_of(",\"\n") == std::string::npos) return x;
          std::string out = "\"";
          for (char c : x) {
            if (c == '"') out += '"';
            out += c;
          }
          return out + "\"";
        }
      },
      v);
}

json value_to_json(const Value& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

Value value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw std::runtime_error("from_json: unsupported value " + j.dump());
}

std::string file_stem(const RunResults& results, const ResultTable& table) {
  if (results.tables.size() == 1) return results.experiment;
  return results.experiment + "_" + table.name;
}

bool has_ratio_grid(const ResultTable& t) {
  auto has = [&](const char* c) { return std::find(t.columns.begin(), t.columns.end(), c) != t.columns.end(); };
  return has("n") && has("m") && has("ratio");
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ResultTable ratio_table_result(const RatioTable& table, std::string name) {
  ResultTable t;
  t.name = std::move(name);
  t.columns = {"n", "m", "ratio", "mc_se"};
  for (const auto& c : table.cells) t.rows.push_back({as_int(c.n), as_int(c.m), c.ratio, c.mc_se});
  return t;
}

RunResults to_results(const std::string& experiment, const RatioTable& table) {
  RunResults r;
  r.experiment = experiment;
  r.tables.push_back(ratio_table_result(table));
  r.failures = table.failures;
  return r;
}

RunResults to_results(const NormalityReport& report) {
  RunResults r;
  r.experiment = "normality";
  r.tables.push_back(normality_table(report, "normality"));
  r.failures = report.failures;
  return r;
}

RunResults to_results(const CoverageReport& report) {
  RunResults r;
  r.experiment = "coverage";
  ResultTable t;
  t.name = "coverage";
  t.columns = {"n", "m", "alpha", "empirical_coverage", "avg_width", "exact_coverage", "exact_avg_width", "flagged"};
  t.rows.push_back({as_int(report.n), as_int(report.m), report.alpha, report.empirical_coverage, report.avg_width,
                    report.exact_coverage, report.exact_avg_width, as_int(report.flagged)});
  r.tables.push_back(std::move(t));
  r.failures = report.failures;
  return r;
}

RunResults to_results(const BiasReport& report) {
  RunResults r;
  r.experiment = "bias-scan";
  ResultTable t;
  t.name = "bias";
  t.columns = {"n", "bias_hat", "se", "scaled", "within_bound", "forward_bias", "forward_se", "forward_scaled"};
  for (const auto& row : report.rows) {
    t.rows.push_back({as_int(row.n), row.bias_hat, row.se, row.scaled, row.within_bound, row.forward_bias,
                      row.forward_se, row.forward_scaled});
  }
  r.tables.push_back(std::move(t));
  ResultTable s;
  s.name = "summary";
  s.columns = {"scaled_nonincreasing", "pass"};
  s.rows.push_back({report.scaled_nonincreasing, report.pass});
  r.tables.push_back(std::move(s));
  r.failures = report.failures;
  return r;
}

RunResults to_results(const KdeReport& report) {
  RunResults r;
  r.experiment = "kde-supeff";
  ResultTable t;
  t.name = "kde";
  t.columns = {"n",
               "m",
               "ratio_fixed_policy",
               "ratio_fixed_policy_se",
               "ratio_undersmoothed",
               "ratio_undersmoothed_se",
               "perturbed_scaled_bias_fixed",
               "perturbed_scaled_bias_fixed_se",
               "perturbed_risk_fixed",
               "perturbed_risk_undersmoothed"};
  for (const auto& row : report.rows) {
    t.rows.push_back({as_int(row.n), as_int(row.m), row.ratio_fixed_policy, row.ratio_fixed_policy_se,
                      row.ratio_undersmoothed, row.ratio_undersmoothed_se, row.perturbed_scaled_bias_fixed,
                      row.perturbed_scaled_bias_fixed_se, row.perturbed_risk_fixed,
                      row.perturbed_risk_undersmoothed});
  }
  r.tables.push_back(std::move(t));
  r.failures = report.failures;
  return r;
}

RunResults to_results(const CurrentStatusReport& report) {
  RunResults r;
  r.experiment = "current-status";
  r.tables.push_back(ratio_table_result(report.table));
  r.tables.push_back(normality_table(report.quantile_normality, "quantile_normality"));
  r.tables.push_back(normality_table(report.cdf_normality, "cdf_normality"));
  ResultTable v;
  v.name = "variance";
  v.columns = {"var_z", "sigma2_quantile_theory", "sigma2_quantile_hat", "sigma2_cdf_theory", "sigma2_cdf_hat"};
  v.rows.push_back({report.var_z, report.sigma2_quantile_theory, report.quantile_normality.mean_sigma2_hat,
                    report.sigma2_cdf_theory, report.cdf_normality.mean_sigma2_hat});
  r.tables.push_back(std::move(v));
  r.failures = report.failures;
  return r;
}

RunResults to_results(const ChernoffReport& report) {
  RunResults r;
  r.experiment = "chernoff";
  ResultTable t;
  t.name = "chernoff";
  t.columns = {"count", "mean",     "sd",         "se_mean",   "skewness",  "kurtosis",      "q_lower",
               "q_upper", "q_se",   "boundary_rate", "sd_coarse", "sd_fine", "sd_combined_se"};
  t.rows.push_back({as_int(report.count), report.mean, report.sd, report.se_mean, report.skewness, report.kurtosis,
                    report.q_lower, report.q_upper, report.q_se, report.boundary_rate, report.sd_coarse,
                    report.sd_fine, report.sd_combined_se});
  r.tables.push_back(std::move(t));
  r.failures = report.failures;
  return r;
}

std::string to_csv(const ResultTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_field(Value{table.columns[i]});
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const RunResults& results, const RunManifest& manifest) {
  json tables = json::array();
  for (const auto& t : results.tables) {
    json rows = json::array();
    for (const auto& row : t.rows) {
      json r = json::array();
      for (const auto& v : row) r.push_back(value_to_json(v));
      rows.push_back(std::move(r));
    }
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", std::move(rows)}});
  }
  json doc;
  doc["manifest"] = {
      {"config_hash", manifest.config_hash},
      {"seed", manifest.seed},
      {"tool_version", manifest.tool_version},
      {"started", manifest.started},
      {"finished", manifest.finished},
      {"outputs", manifest.outputs},
      {"config_text", manifest.config_text},
      {"experiment", results.experiment},
      {"tables", std::move(tables)},
      {"failures", results.failures},
  };
  return doc.dump(2) + "\n";
}

void from_json(std::string_view text, RunResults& results, RunManifest& manifest) {
  const json doc = json::parse(text);
  const json& m = doc.at("manifest");
  manifest.config_hash = m.at("config_hash").get<std::string>();
  manifest.seed = m.at("seed").get<std::uint64_t>();
  manifest.tool_version = m.at("tool_version").get<std::string>();
  manifest.started = m.at("started").get<std::string>();
  manifest.finished = m.at("finished").get<std::string>();
  manifest.outputs = m.at("outputs").get<std::vector<std::string>>();
  manifest.config_text = m.at("config_text").get<std::string>();
  results = RunResults{};
  results.experiment = m.at("experiment").get<std::string>();
  results.failures = m.at("failures").get<std::vector<std::string>>();
  for (const auto& t : m.at("tables")) {
    ResultTable table;
    table.name = t.at("name").get<std::string>();
    table.columns = t.at("columns").get<std::vector<std::string>>();
    for (const auto& row : t.at("rows")) {
      std::vector<Value> values;
      for (const auto& v : row) values.push_back(value_from_json(v));
      table.rows.push_back(std::move(values));
    }
    results.tables.push_back(std::move(table));
  }
}

std::string to_svg(const ResultTable& table) {
  if (!has_ratio_grid(table)) throw std::invalid_argument("to_svg: table needs n, m and ratio columns");
  auto col = [&](const char* name) {
    return static_cast<std::size_t>(std::find(table.columns.begin(), table.columns.end(), name) - table.columns.begin());
  };
  const std::size_t cn = col("n"), cm = col("m"), cr = col("ratio");
  auto num = [](const Value& v) -> double {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::numeric_limits<double>::quiet_NaN();
  };
  std::set<std::int64_t> ns, ms;
  std::map<std::pair<std::int64_t, std::int64_t>, double> ratio;
  for (const auto& row : table.rows) {
    const auto n = static_cast<std::int64_t>(num(row[cn]));
    const auto m = static_cast<std::int64_t>(num(row[cm]));
    ns.insert(n);
    ms.insert(m);
    ratio[{n, m}] = num(row[cr]);
  }
  const int cw = 72, ch = 32, left = 80, top = 56;
  const int width = left + cw * static_cast<int>(ms.size()) + 20;
  const int height = top + ch * static_cast<int>(ns.size()) + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">MSE(global) / MSE(pooled)</text>\n";
  os << "<text x=\"8\" y=\"" << top - 8 << "\">n \\ m</text>\n";
  int j = 0;
  for (auto m : ms) {
    os << "<text x=\"" << left + j * cw + cw / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">" << m
       << "</text>\n";
    ++j;
  }
  int i = 0;
  for (auto n : ns) {
    const int y = top + i * ch;
    os << "<text x=\"" << left - 8 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"end\">" << n << "</text>\n";
    j = 0;
    for (auto m : ms) {
      const int x = left + j * cw;
      const auto it = ratio.find({n, m});
      if (it != ratio.end() && std::isfinite(it->second) && it->second > 0.0) {
        // log2 ratio clamped to [-2, 2]: blue below 1, red above
        const double s = std::clamp(std::log2(it->second) / 2.0, -1.0, 1.0);
        const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(s))));
        const int r = s >= 0 ? 255 : fade, g = fade, b = s >= 0 ? fade : 255;
        char label[32];
        std::snprintf(label, sizeof label, "%.2f", it->second);
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"rgb("
           << r << ',' << g << ',' << b << ")\" stroke=\"#888\"/>\n";
        os << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"middle\">" << label
           << "</text>\n";
      } else {
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
           << "\" fill=\"#eee\" stroke=\"#888\"/>\n";
      }
      ++j;
    }
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

Format format_from_name(std::string_view name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  if (name == "svg") return Format::svg;
  throw std::invalid_argument("unknown format '" + std::string(name) + "' (csv | json | svg)");
}

std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const RunResults& results,
                                                 RunManifest& manifest, const std::vector<Format>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  auto wants = [&](Format f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };

  std::vector<std::pair<std::filesystem::path, std::string>> files;
  if (wants(Format::csv)) {
    for (const auto& t : results.tables) files.emplace_back(dir / (file_stem(results, t) + ".csv"), to_csv(t));
  }
  if (wants(Format::svg)) {
    for (const auto& t : results.tables) {
      if (has_ratio_grid(t)) files.emplace_back(dir / (file_stem(results, t) + ".svg"), to_svg(t));
    }
  }
  const auto config_path = dir / "config.ini";
  const auto manifest_path = dir / "manifest.json";
  const auto json_path = dir / (results.experiment + ".json");

  manifest.outputs.clear();
  for (const auto& [p, text] : files) manifest.outputs.push_back(p.string());
  if (wants(Format::json)) manifest.outputs.push_back(json_path.string());
  manifest.outputs.push_back(config_path.string());
  manifest.outputs.push_back(manifest_path.string());

  std::vector<std::filesystem::path> written;
  for (const auto& [p, text] : files) {
    write_file(p, text);
    written.push_back(p);
  }
  if (wants(Format::json)) {
    write_file(json_path, to_json(results, manifest));
    written.push_back(json_path);
  }
  write_file(config_path, manifest.config_text);
  written.push_back(config_path);
  RunResults summary;
  summary.experiment = results.experiment;
  summary.failures = results.failures;
  write_file(manifest_path, to_json(summary, manifest));
  written.push_back(manifest_path);
  return written;
}

}  // namespace isoconquer
