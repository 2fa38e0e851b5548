#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "isoconquer/experiments.hpp"

namespace isoconquer {

/// Parse or validation error pointing at a key (and its line when the key
/// came from a file; line 0 means the command line or a default).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string key, const std::string& message);
  const std::string& source() const noexcept { return source_; }
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::string source_;
  int line_;
  std::string key_;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
  std::string source;
};

/// Reads `key = value` lines with optional [section] headers and # comments.
/// Keys are unique; each may appear at top level or in its home section.
std::vector<ConfigEntry> read_config_entries(std::istream& in, const std::string& source);

/// Applies entries over the defaults of the experiment they name (or of
/// `experiment_hint`), then validates. Later entries override earlier ones
/// coming from a different source.
ExperimentConfig build_config(const std::vector<ConfigEntry>& entries,
                              std::optional<std::string> experiment_hint = std::nullopt);

ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text, const std::string& source = "<text>");

bool is_config_key(std::string_view key);

/// Every key in a fixed order with full-precision numbers; parsing it back
/// yields the same config. `workers` is omitted since results do not
/// depend on it.
std::string canonical_config_text(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace isoconquer
