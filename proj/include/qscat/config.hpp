#ifndef QSCAT_CONFIG_HPP
#define QSCAT_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscat/math/rng.hpp"
#include "qscat/verify.hpp"
#include "qscat/version.hpp"

namespace qscat {

// Acceptance gates a config may declare; `verify` exits nonzero when a
// declared gate fails, so batch runs can be scripted.
struct DeclaredChecks {
  std::optional<double> ks_max;       // KS bound applied at the largest j_M
  bool require_decreasing_ks = false; // first vs last j_M, 3-SE separated
  std::optional<double> max_abs_z;    // covariance entrywise |z| bound
};

struct ParsedConfig {
  ExperimentConfig experiment;
  DeclaredChecks checks;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if constexpr (std::is_same_v<T, int>)
      out.push_back(std::stoi(item));
    else
      out.push_back(std::stod(item));
  }
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + s + "'");
}

// flat section.key -> value map from either encoding
inline std::map<std::string, std::string> flatten_ini(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line, section = "experiment";
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    kv[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::map<std::string, std::string> flatten_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::map<std::string, std::string> kv;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object())
      throw std::invalid_argument("config json: section '" + section +
                                  "' must be an object");
    for (const auto& [key, val] : body.items()) {
      std::string s;
      if (val.is_string()) {
        s = val.get<std::string>();
      } else if (val.is_array()) {
        std::ostringstream os;
        for (std::size_t i = 0; i < val.size(); ++i)
          os << (i ? "," : "") << val[i].dump();
        s = os.str();
      } else {
        s = val.dump();
      }
      kv[section + "." + key] = s;
    }
  }
  return kv;
}

}  // namespace detail

// Parse a config from text (key-value with sections; JSON accepted as an
// alternative encoding). Unknown keys are an error listing them; the result
// is validated, with defaults already applied.
inline ParsedConfig parse_config_text(const std::string& text) {
  const std::string body = detail::trim(text);
  auto kv = (!body.empty() && body.front() == '{') ? detail::flatten_json(body)
                                                   : detail::flatten_ini(body);
  ParsedConfig pc;
  ExperimentConfig& e = pc.experiment;
  std::set<std::string> unknown;
  for (const auto& [key, val] : kv) {
    if (key == "experiment.density") e.density = val;
    else if (key == "experiment.wavelet") e.wavelet = val;
    else if (key == "experiment.scales_prefix") e.scales_prefix = detail::parse_list<int>(val);
    else if (key == "experiment.jm") e.jm = detail::parse_list<int>(val);
    else if (key == "experiment.replicas") e.replicas = std::stoull(val);
    else if (key == "experiment.times") e.times = detail::parse_list<double>(val);
    else if (key == "experiment.seed") e.seed = std::stoull(val);
    else if (key == "experiment.bootstrap_resamples") e.bootstrap_resamples = std::stoi(val);
    else if (key == "experiment.threads") e.threads = std::stoull(val);
    else if (key == "grid.n") e.n = std::stoull(val);
    else if (key == "grid.dt") e.dt = std::stod(val);
    else if (key == "grid.mode") e.grid_auto = (val == "auto");
    else if (key == "grid.min_span") e.min_span = std::stod(val);
    else if (key == "grid.guard_frac") e.guard_frac = std::stod(val);
    else if (key == "output.dir") e.out_dir = val;
    else if (key == "checks.ks_max") pc.checks.ks_max = std::stod(val);
    else if (key == "checks.require_decreasing_ks")
      pc.checks.require_decreasing_ks = detail::parse_bool(val, key);
    else if (key == "checks.max_abs_z") pc.checks.max_abs_z = std::stod(val);
    else unknown.insert(key);
  }
  if (!unknown.empty()) {
    std::ostringstream os;
    os << "config: unknown key(s):";
    for (const auto& k : unknown) os << " '" << k << "'";
    throw std::invalid_argument(os.str());
  }
  validate_experiment(e);
  return pc;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config file '" + path + "' does not exist");
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config_text(os.str());
}

// Canonical text form with every default echoed.
inline std::string serialize_config(const ParsedConfig& pc) {
  const ExperimentConfig& e = pc.experiment;
  std::ostringstream os;
  os.precision(17);
  auto list_int = [](const std::vector<int>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  auto list_dbl = [](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  os << "[experiment]\n"
     << "density = " << e.density << "\n"
     << "wavelet = " << e.wavelet << "\n"
     << "scales_prefix = " << list_int(e.scales_prefix) << "\n"
     << "jm = " << list_int(e.jm) << "\n"
     << "replicas = " << e.replicas << "\n"
     << "times = " << list_dbl(e.times) << "\n"
     << "seed = " << e.seed << "\n"
     << "bootstrap_resamples = " << e.bootstrap_resamples << "\n"
     << "threads = " << e.threads << "\n"
     << "\n[grid]\n"
     << "n = " << e.n << "\n"
     << "dt = " << e.dt << "\n"
     << "mode = " << (e.grid_auto ? "auto" : "fixed") << "\n"
     << "min_span = " << e.min_span << "\n"
     << "guard_frac = " << e.guard_frac << "\n"
     << "\n[output]\n"
     << "dir = " << e.out_dir << "\n";
  if (pc.checks.ks_max || pc.checks.require_decreasing_ks || pc.checks.max_abs_z) {
    os << "\n[checks]\n";
    if (pc.checks.ks_max) os << "ks_max = " << *pc.checks.ks_max << "\n";
    if (pc.checks.require_decreasing_ks) os << "require_decreasing_ks = true\n";
    if (pc.checks.max_abs_z) os << "max_abs_z = " << *pc.checks.max_abs_z << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Run manifest: a config snapshot plus output digests; a rerun of the same
// manifest must reproduce the digests bit-for-bit.

inline std::string file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("digest: cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (is.read(buf, sizeof buf) || is.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

struct RunManifest {
  std::string config_snapshot;
  std::string version = QSCAT_VERSION;
  std::string started;
  std::string finished;
  std::uint64_t master_seed = 0;
  std::map<std::string, std::uint64_t> stage_seeds;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["started"] = started;
    j["finished"] = finished;
    j["master_seed"] = master_seed;
    j["config"] = config_snapshot;
    j["stage_seeds"] = stage_seeds;
    auto& out = j["outputs"] = nlohmann::json::array();
    for (const auto& [p, d] : outputs) out.push_back({{"path", p}, {"digest", d}});
    return j;
  }
};

}  // namespace qscat

#endif  // QSCAT_CONFIG_HPP
