#include "isoconquer/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace isoconquer {

namespace {

struct KeyInfo {
  std::string_view key;
  std::string_view section;  // home section; "" = top level only
};

constexpr std::array<KeyInfo, 25> kKeys{{
    {"experiment", ""},
    {"seed", ""},
    {"workers", ""},
    {"replicates", ""},
    {"alpha", ""},
    {"model", "model"},
    {"functional", "model"},
    {"direction", "model"},
    {"noise_sd", "model"},
    {"a", "model"},
    {"x0", "model"},
    {"t0", "model"},
    {"ns", "grid"},
    {"ms", "grid"},
    {"total_n", "grid"},
    {"phi", "grid"},
    {"delta", "grid"},
    {"ks_threshold", "normality"},
    {"bias_ns", "bias"},
    {"kernel", "kde"},
    {"kde_amplitude", "kde"},
    {"chernoff_horizon", "chernoff"},
    {"chernoff_step", "chernoff"},
    {"chernoff_draws", "chernoff"},
    {"limit_draws", "chernoff"},
}};

const KeyInfo* find_key(std::string_view key) {
  for (const auto& k : kKeys) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

[[noreturn]] void bad(const ConfigEntry& e, const std::string& msg) { throw ConfigError(e.source, e.line, e.key, msg); }

std::uint64_t parse_uint(const ConfigEntry& e, std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) bad(e, "expected a nonnegative integer, got '" + std::string(text) + "'");
  return v;
}

double parse_double(const ConfigEntry& e, std::string_view text) {
  // also accepts a ratio p/q, e.g. phi = 1/6
  const auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    const double num = parse_double(e, trim(text.substr(0, slash)));
    const double den = parse_double(e, trim(text.substr(slash + 1)));
    if (den == 0.0) bad(e, "division by zero in '" + std::string(text) + "'");
    return num / den;
  }
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) bad(e, "expected a number, got '" + std::string(text) + "'");
  return v;
}

std::vector<std::size_t> parse_list(const ConfigEntry& e) {
  std::vector<std::size_t> out;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) out.push_back(static_cast<std::size_t>(parse_uint(e, token)));
    token.clear();
  };
  for (char c : e.value) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c != '[' && c != ']') {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

void apply(ExperimentConfig& c, const ConfigEntry& e) {
  const std::string& k = e.key;
  const std::string& v = e.value;
  if (k == "experiment") {
    // handled before defaults are chosen
  } else if (k == "seed") {
    c.seed = parse_uint(e, v);
  } else if (k == "workers") {
    const auto w = parse_uint(e, v);
    if (w == 0 || w > 1024) bad(e, "workers must lie in [1, 1024]");
    c.workers = static_cast<unsigned>(w);
  } else if (k == "replicates") {
    c.replicates = static_cast<std::size_t>(parse_uint(e, v));
  } else if (k == "alpha") {
    c.alpha = parse_double(e, v);
  } else if (k == "model") {
    if (v == "fixed_linear" || v == "fixed" || v == "linear") {
      c.model = ModelKind::fixed_linear;
    } else if (v == "perturbed") {
      c.model = ModelKind::perturbed;
    } else {
      bad(e, "model must be fixed_linear or perturbed");
    }
  } else if (k == "functional") {
    if (v == "mu_at") {
      c.functional = FunctionalKind::mu_at;
    } else if (v == "mu_inverse_at") {
      c.functional = FunctionalKind::mu_inverse_at;
    } else if (v == "cdf_at") {
      c.functional = FunctionalKind::cdf_at;
    } else if (v == "quantile_at") {
      c.functional = FunctionalKind::quantile_at;
    } else {
      bad(e, "functional must be one of mu_at, mu_inverse_at, cdf_at, quantile_at");
    }
  } else if (k == "direction") {
    if (v == "nondecreasing") {
      c.direction = Direction::nondecreasing;
    } else if (v == "nonincreasing") {
      c.direction = Direction::nonincreasing;
    } else {
      bad(e, "direction must be nondecreasing or nonincreasing");
    }
  } else if (k == "noise_sd") {
    c.noise_sd = parse_double(e, v);
  } else if (k == "a") {
    c.a = parse_double(e, v);
  } else if (k == "x0") {
    c.x0 = parse_double(e, v);
  } else if (k == "t0") {
    c.t0 = parse_double(e, v);
  } else if (k == "ns") {
    c.ns = parse_list(e);
  } else if (k == "ms") {
    c.ms = parse_list(e);
  } else if (k == "total_n") {
    if (v.empty() || v == "none") {
      c.total_n.reset();
    } else {
      c.total_n = static_cast<std::size_t>(parse_uint(e, v));
    }
  } else if (k == "phi") {
    c.phi = parse_double(e, v);
  } else if (k == "delta") {
    c.delta = parse_double(e, v);
  } else if (k == "ks_threshold") {
    c.ks_threshold = parse_double(e, v);
  } else if (k == "bias_ns") {
    c.bias_ns = parse_list(e);
  } else if (k == "kernel") {
    try {
      c.kernel = kernel_from_name(v).kind;
    } catch (const std::invalid_argument& ex) {
      bad(e, ex.what());
    }
  } else if (k == "kde_amplitude") {
    c.kde_amplitude = parse_double(e, v);
  } else if (k == "chernoff_horizon") {
    c.chernoff_horizon = parse_double(e, v);
  } else if (k == "chernoff_step") {
    c.chernoff_step = parse_double(e, v);
  } else if (k == "chernoff_draws") {
    c.chernoff_draws = static_cast<std::size_t>(parse_uint(e, v));
  } else if (k == "limit_draws") {
    c.limit_draws = static_cast<std::size_t>(parse_uint(e, v));
  } else {
    bad(e, "unknown key");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(xs[i]);
  }
  return out;
}

const char* functional_text(FunctionalKind k) {
  switch (k) {
    case FunctionalKind::mu_at:
      return "mu_at";
    case FunctionalKind::mu_inverse_at:
      return "mu_inverse_at";
    case FunctionalKind::cdf_at:
      return "cdf_at";
    case FunctionalKind::quantile_at:
      return "quantile_at";
  }
  return "mu_inverse_at";
}

}  // namespace

ConfigError::ConfigError(std::string source, int line, std::string key, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         (key.empty() ? std::string() : ": key '" + key + "'") + ": " + message),
      source_(std::move(source)),
      line_(line),
      key_(std::move(key)) {}

bool is_config_key(std::string_view key) { return find_key(key) != nullptr; }

std::vector<ConfigEntry> read_config_entries(std::istream& in, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::map<std::string, int> seen;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string text = trim(raw);
    if (text.empty() || text.front() == '#' || text.front() == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(source, line, "", "malformed section header '" + text + "'");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      static constexpr std::array<std::string_view, 6> sections{"model", "grid", "normality", "bias", "kde",
                                                                "chernoff"};
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        throw ConfigError(source, line, "", "unknown section [" + section + "]");
      }
      continue;
    }
    // strip a trailing comment outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '"') quoted = !quoted;
      if (!quoted && text[i] == '#') {
        text = trim(std::string_view(text).substr(0, i));
        break;
      }
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "", "expected 'key = value', got '" + text + "'");
    ConfigEntry e;
    e.key = trim(std::string_view(text).substr(0, eq));
    e.value = unquote(trim(std::string_view(text).substr(eq + 1)));
    e.line = line;
    e.source = source;
    const KeyInfo* info = find_key(e.key);
    if (info == nullptr) throw ConfigError(source, line, e.key, "unknown key");
    if (!section.empty() && info->section != section) {
      throw ConfigError(source, line, e.key,
                        "key does not belong in section [" + section + "]" +
                            (info->section.empty() ? std::string(" (top level only)")
                                                   : " (home section [" + std::string(info->section) + "])"));
    }
    if (const auto it = seen.find(e.key); it != seen.end()) {
      throw ConfigError(source, line, e.key, "duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    seen.emplace(e.key, line);
    out.push_back(std::move(e));
  }
  return out;
}

ExperimentConfig build_config(const std::vector<ConfigEntry>& entries, std::optional<std::string> experiment_hint) {
  std::string experiment = experiment_hint.value_or("table1-left");
  const ConfigEntry* experiment_entry = nullptr;
  for (const auto& e : entries) {
    if (!is_config_key(e.key)) bad(e, "unknown key");
    if (e.key == "experiment") {
      experiment = e.value;
      experiment_entry = &e;
    }
  }
  ExperimentConfig c;
  try {
    c = default_config(experiment);
  } catch (const std::invalid_argument& ex) {
    if (experiment_entry != nullptr) bad(*experiment_entry, ex.what());
    throw ConfigError("<defaults>", 0, "experiment", ex.what());
  }
  for (const auto& e : entries) apply(c, e);
  try {
    c.validate();
  } catch (const InvalidConfig& ex) {
    const ConfigEntry* where = nullptr;
    for (const auto& e : entries) {
      if (e.key == ex.key()) where = &e;
    }
    if (where != nullptr) bad(*where, ex.what());
    throw ConfigError("<defaults>", 0, ex.key(), ex.what());
  }
  return c;
}

ExperimentConfig parse_config_text(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  return build_config(read_config_entries(in, source));
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "", "cannot open config file");
  return build_config(read_config_entries(in, path.string()));
}

std::string canonical_config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment = " << c.experiment << '\n';
  os << "seed = " << c.seed << '\n';
  os << "replicates = " << c.replicates << '\n';
  os << "alpha = " << format_double(c.alpha) << '\n';
  os << "\n[model]\n";
  os << "model = " << (c.model == ModelKind::perturbed ? "perturbed" : "fixed_linear") << '\n';
  os << "functional = " << functional_text(c.functional) << '\n';
  os << "direction = " << (c.direction == Direction::nondecreasing ? "nondecreasing" : "nonincreasing") << '\n';
  os << "noise_sd = " << format_double(c.noise_sd) << '\n';
  os << "a = " << format_double(c.a) << '\n';
  os << "x0 = " << format_double(c.x0) << '\n';
  os << "t0 = " << format_double(c.t0) << '\n';
  os << "\n[grid]\n";
  os << "ns = " << join(c.ns) << '\n';
  os << "ms = " << join(c.ms) << '\n';
  os << "total_n = " << (c.total_n ? std::to_string(*c.total_n) : std::string("none")) << '\n';
  os << "phi = " << format_double(c.phi) << '\n';
  os << "delta = " << format_double(c.delta) << '\n';
  os << "\n[normality]\n";
  os << "ks_threshold = " << format_double(c.ks_threshold) << '\n';
  os << "\n[bias]\n";
  os << "bias_ns = " << join(c.bias_ns) << '\n';
  os << "\n[kde]\n";
  os << "kernel = " << Kernel{c.kernel}.name() << '\n';
  os << "kde_amplitude = " << format_double(c.kde_amplitude) << '\n';
  os << "\n[chernoff]\n";
  os << "chernoff_horizon = " << format_double(c.chernoff_horizon) << '\n';
  os << "chernoff_step = " << format_double(c.chernoff_step) << '\n';
  os << "chernoff_draws = " << c.chernoff_draws << '\n';
  os << "limit_draws = " << c.limit_draws << '\n';
  return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_config_text(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace isoconquer
