#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isoconquer/experiments.hpp"

namespace isoconquer {

using Value = std::variant<std::int64_t, double, bool, std::string>;

struct ResultTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;

  bool operator==(const ResultTable&) const = default;
};

struct RunResults {
  std::string experiment;
  std::vector<ResultTable> tables;
  std::vector<std::string> failures;

  bool ok() const noexcept { return failures.empty(); }
  bool operator==(const RunResults&) const = default;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started;   // ISO-8601 UTC
  std::string finished;  // ISO-8601 UTC
  std::vector<std::string> outputs;
  std::string config_text;

  bool operator==(const RunManifest&) const = default;
};

extern const char* const kToolVersion;

std::string utc_timestamp();

ResultTable ratio_table_result(const RatioTable& table, std::string name = "ratio_table");
RunResults to_results(const std::string& experiment, const RatioTable& table);
RunResults to_results(const NormalityReport& report);
RunResults to_results(const CoverageReport& report);
RunResults to_results(const BiasReport& report);
RunResults to_results(const KdeReport& report);
RunResults to_results(const CurrentStatusReport& report);
RunResults to_results(const ChernoffReport& report);

/// Header row, then one row per entry. Numbers with 6 significant digits,
/// LF line endings.
std::string to_csv(const ResultTable& table);

/// Results nested under the manifest. Doubles use the shortest text that
/// reads back to the same value.
std::string to_json(const RunResults& results, const RunManifest& manifest);
void from_json(std::string_view text, RunResults& results, RunManifest& manifest);

/// Heat grid of a table with integer columns n and m and a ratio column.
std::string to_svg(const ResultTable& table);

enum class Format { csv, json, svg };

Format format_from_name(std::string_view name);

/// Writes every requested format into `dir` (created if needed) and returns
/// the written paths; the manifest's output list is filled in before the
/// JSON file is produced. Throws std::runtime_error on unwritable paths.
std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const RunResults& results,
                                                 RunManifest& manifest, const std::vector<Format>& formats);

}  // namespace isoconquer
