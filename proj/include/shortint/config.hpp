#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/report.hpp"

namespace shortint {

enum class ExperimentKind { sieve, scan, variance, exceptional, asymptotics, halasz, dirichlet, ramare, threshold };

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
  static const std::vector<std::pair<std::string, ExperimentKind>> names = {
      {"sieve", ExperimentKind::sieve},           {"scan", ExperimentKind::scan},
      {"variance", ExperimentKind::variance},     {"exceptional", ExperimentKind::exceptional},
      {"asymptotics", ExperimentKind::asymptotics}, {"halasz", ExperimentKind::halasz},
      {"dirichlet", ExperimentKind::dirichlet},   {"ramare", ExperimentKind::ramare},
      {"threshold", ExperimentKind::threshold}};
  return names;
}

inline std::string to_string(ExperimentKind k) {
  for (const auto& [name, kind] : experiment_names()) {
    if (kind == k) return name;
  }
  return "?";
}

inline ExperimentKind parse_experiment(const std::string& s) {
  for (const auto& [name, kind] : experiment_names()) {
    if (name == s) return kind;
  }
  throw UsageError("unknown experiment '" + s + "'");
}

/// Default X per experiment, sized for a run of a few minutes on one core.
inline std::uint64_t default_X(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::asymptotics:
    case ExperimentKind::halasz:
    case ExperimentKind::dirichlet:
    case ExperimentKind::ramare: return 1'000'000;
    default: return 10'000'000;
  }
}

enum class T0Mode { automatic, zero, fixed };
enum class NormalizerKind { logk, pf, one };

/// Ids of bound checks whose envelope can be set per check as envelope_<id>.
inline const std::vector<std::string>& bound_check_ids() {
  static const std::vector<std::string> ids = {
      "tail_B", "tail_A", "shiu_window", "mean_value", "correlation", "discrete_mean_value",
      "large_values", "amplified_mean_value", "rough_sum", "rough_R"};
  return ids;
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::sieve;
  std::uint64_t X = 0;
  unsigned k = 2;
  std::string spec_name;  // resolved; "dk:<k>" when not given
  std::vector<std::uint64_t> h_grid;
  std::vector<double> exponents{0.1, 0.25, 0.3863, 0.6, 1.0, 1.5};
  double eps = 0.5;
  double eps0 = 0;       // resolved
  double eps_prime = 0;  // resolved
  double alpha = 1.0;
  double delta = 0.25;
  double eta = 0.5;
  T0Mode t0_mode = T0Mode::automatic;
  double t0_value = 0;
  NormalizerKind normalizer = NormalizerKind::logk;
  double envelope = 100;
  std::map<std::string, double> envelopes;  // per check id, resolved for every id
  double T = 1000;
  std::uint64_t points = 2001;
  std::optional<double> P, Q, H;
  std::vector<double> t_points{0.0, 1.0, 10.0};
  double perron_x = 100.5, perron_h = 10;
  std::vector<double> perron_t_max{100.0, 10'000.0};
  std::uint64_t segment_size = std::uint64_t{1} << 22;
  std::string cache_dir;
  std::string out_dir = ".";
  unsigned threads = 1;

  double envelope_for(const std::string& id) const {
    auto it = envelopes.find(id);
    return it == envelopes.end() ? envelope : it->second;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
  double d = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(d)) {
    throw UsageError("key '" + key + "': '" + v + "' is not a finite real");
  }
  return d;
}

/// Accepts plain integers and exact integral reals such as 1e7.
inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t u = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
  if (ec == std::errc() && ptr == v.data() + v.size()) return u;
  const double d = parse_real(key, v);
  if (d < 0 || d != std::floor(d) || d > 9.0e15) throw UsageError("key '" + key + "': '" + v + "' is not a count");
  return static_cast<std::uint64_t>(d);
}

inline std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw UsageError("unterminated list '" + v + "'");
    v = trim(v.substr(1, v.size() - 2));
  }
  std::vector<std::string> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw UsageError("key '" + key + "' " + what);
}

}  // namespace detail

/// Raw key/value layers, later layers overriding earlier ones: config file,
/// then SHORTINT_* environment, then command-line flags.
class ConfigSource {
 public:
  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
      std::vector<std::string> k = {"experiment", "X", "k", "spec", "h_grid", "exponents", "eps", "eps0",
                                    "eps_prime", "alpha", "delta", "eta", "t0", "normalizer", "envelope",
                                    "T", "points", "P", "Q", "H", "t_points", "perron_x", "perron_h",
                                    "perron_t_max", "segment_size", "cache_dir", "out_dir", "threads"};
      for (const auto& id : bound_check_ids()) k.push_back("envelope_" + id);
      return k;
    }();
    return keys;
  }

  static bool is_known(const std::string& key) {
    const auto& k = known_keys();
    return std::find(k.begin(), k.end(), key) != k.end();
  }

  void set(const std::string& key, const std::string& value, const std::string& origin) {
    if (!is_known(key)) throw UsageError(origin + ": unknown key '" + key + "'");
    values_[key] = detail::trim(value);
  }

  /// key = value lines; '#' starts a comment; repeated keys are an error.
  void load_text(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    std::map<std::string, int> seen;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = origin + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw UsageError(where + ": empty key");
      if (seen.count(key)) throw UsageError(where + ": key '" + key + "' repeated");
      seen[key] = lineno;
      set(key, line.substr(eq + 1), where);
    }
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    load_text(ss.str(), path);
  }

  /// SHORTINT_<KEY> with the key matched case-insensitively. Unknown names
  /// under the prefix are rejected like unknown config keys.
  void load_env(char** envp) {
    if (!envp) return;
    for (char** e = envp; *e; ++e) {
      const std::string kv = *e;
      if (!kv.starts_with("SHORTINT_")) continue;
      const auto eq = kv.find('=');
      const std::string name = kv.substr(9, eq == std::string::npos ? std::string::npos : eq - 9);
      const std::string value = eq == std::string::npos ? "" : kv.substr(eq + 1);
      std::string match;
      for (const auto& key : known_keys()) {
        if (key.size() != name.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < key.size(); ++i) {
          if (std::toupper(static_cast<unsigned char>(key[i])) != std::toupper(static_cast<unsigned char>(name[i]))) {
            same = false;
            break;
          }
        }
        if (same) match = key;
      }
      if (match.empty()) throw UsageError("environment: unknown variable SHORTINT_" + name);
      set(match, value, "environment");
    }
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Typed, range-checked config. The experiment named on the command line wins
/// unless the config names a different one, which is an error.
inline ExperimentConfig resolve_config(const ConfigSource& src, const std::string& experiment) {
  using namespace detail;
  ExperimentConfig c;
  c.experiment = parse_experiment(experiment);
  const auto& v = src.values();
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = v.find(key);
    if (it == v.end()) return std::nullopt;
    return it->second;
  };
  if (auto e = get("experiment"); e && *e != experiment) {
    throw UsageError("config names experiment '" + *e + "' but '" + experiment + "' was requested");
  }
  c.X = default_X(c.experiment);
  if (auto s = get("X")) {
    c.X = parse_count("X", *s);
    require(c.X >= 16 && c.X <= 10'000'000'000ull, "X", "must lie in [16, 1e10]");
  }
  if (auto s = get("k")) {
    const auto k = parse_count("k", *s);
    require(k >= 1 && k <= 8, "k", "must lie in [1, 8]");
    c.k = static_cast<unsigned>(k);
  }
  c.spec_name = get("spec").value_or("dk:" + std::to_string(c.k));
  require(!c.spec_name.empty(), "spec", "must not be empty");
  if (auto s = get("h_grid")) {
    for (const auto& item : split_list(*s)) {
      const auto h = parse_count("h_grid", item);
      require(h >= 1, "h_grid", "entries must be >= 1");
      c.h_grid.push_back(h);
    }
  }
  if (auto s = get("exponents")) {
    c.exponents.clear();
    for (const auto& item : split_list(*s)) {
      const double e = parse_real("exponents", item);
      require(e >= 0 && e <= 4, "exponents", "entries must lie in [0, 4]");
      c.exponents.push_back(e);
    }
  }
  auto real_in = [&](const std::string& key, double& out, double lo, bool lo_open, double hi) {
    if (auto s = get(key)) {
      out = parse_real(key, *s);
      const bool ok = (lo_open ? out > lo : out >= lo) && out <= hi;
      require(ok, key, "out of range " + std::string(lo_open ? "(" : "[") + format_double(lo) + ", " +
                           format_double(hi) + "]");
    }
  };
  real_in("eps", c.eps, 0, true, 10);
  real_in("alpha", c.alpha, 0, true, 1);
  real_in("delta", c.delta, 0, true, 1);
  real_in("eta", c.eta, 0, true, 1e9);
  c.eps0 = c.alpha * c.eps / 3.0 * std::log(static_cast<double>(c.k));
  real_in("eps0", c.eps0, 0, true, 10);
  c.eps_prime = c.k >= 2 ? c.eps / (c.k * std::log(static_cast<double>(c.k))) : c.eps;
  if (auto s = get("eps_prime")) {
    c.eps_prime = parse_real("eps_prime", *s);
  }
  require(c.eps_prime >= 0 && c.eps_prime < c.k, "eps_prime", "must lie in [0, k)");
  if (auto s = get("t0")) {
    if (*s == "auto") c.t0_mode = T0Mode::automatic;
    else if (*s == "zero") c.t0_mode = T0Mode::zero;
    else {
      c.t0_mode = T0Mode::fixed;
      c.t0_value = parse_real("t0", *s);
      require(std::abs(c.t0_value) <= 1e9, "t0", "must be auto, zero or a real of size at most 1e9");
    }
  }
  if (auto s = get("normalizer")) {
    if (*s == "logk") c.normalizer = NormalizerKind::logk;
    else if (*s == "pf") c.normalizer = NormalizerKind::pf;
    else if (*s == "one") c.normalizer = NormalizerKind::one;
    else throw UsageError("key 'normalizer' must be logk, pf or one");
  }
  real_in("envelope", c.envelope, 0, true, 1e300);
  for (const auto& id : bound_check_ids()) {
    // Large-value counts default to a tighter envelope unless one is set globally.
    c.envelopes[id] = id == "large_values" && !get("envelope") ? 10.0 : c.envelope;
    real_in("envelope_" + id, c.envelopes[id], 0, true, 1e300);
  }
  real_in("T", c.T, 0, true, 1e7);
  if (auto s = get("points")) {
    c.points = parse_count("points", *s);
    require(c.points >= 1 && c.points <= 10'000'000, "points", "must lie in [1, 1e7]");
  }
  for (const char* key : {"P", "Q", "H"}) {
    if (auto s = get(key)) {
      const double d = parse_real(key, *s);
      require(d > 0, key, "must be positive");
      (key[0] == 'P' ? c.P : key[0] == 'Q' ? c.Q : c.H) = d;
    }
  }
  if (auto s = get("t_points")) {
    c.t_points.clear();
    for (const auto& item : split_list(*s)) c.t_points.push_back(parse_real("t_points", item));
    require(!c.t_points.empty(), "t_points", "must not be empty");
  }
  real_in("perron_x", c.perron_x, 1, true, 1e9);
  real_in("perron_h", c.perron_h, 0, true, 1e9);
  if (auto s = get("perron_t_max")) {
    c.perron_t_max.clear();
    for (const auto& item : split_list(*s)) {
      const double t = parse_real("perron_t_max", item);
      require(t > 0 && t <= 1e7, "perron_t_max", "entries must lie in (0, 1e7]");
      c.perron_t_max.push_back(t);
    }
    require(!c.perron_t_max.empty(), "perron_t_max", "must not be empty");
  }
  if (auto s = get("segment_size")) {
    c.segment_size = parse_count("segment_size", *s);
    require(c.segment_size >= 1024 && c.segment_size <= (std::uint64_t{1} << 26), "segment_size",
            "must lie in [1024, 2^26]");
  }
  c.cache_dir = get("cache_dir").value_or("");
  c.out_dir = get("out_dir").value_or(".");
  require(!c.out_dir.empty(), "out_dir", "must not be empty");
  if (auto s = get("threads")) {
    const auto t = parse_count("threads", *s);
    require(t >= 1 && t <= 1024, "threads", "must lie in [1, 1024]");
    c.threads = static_cast<unsigned>(t);
  }

  const bool needs_grid = c.experiment == ExperimentKind::scan || c.experiment == ExperimentKind::variance ||
                          c.experiment == ExperimentKind::exceptional;
  if (needs_grid && c.h_grid.empty()) throw UsageError("experiment " + experiment + " needs a nonempty h_grid");
  for (auto h : c.h_grid) require(h < c.X, "h_grid", "entries must be smaller than X");
  if (c.experiment == ExperimentKind::threshold && c.exponents.empty()) {
    throw UsageError("experiment threshold needs a nonempty exponents grid");
  }
  return c;
}

/// Every value that can change numeric output; excludes threads and paths.
inline json canonical_config(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["X"] = c.X;
  j["k"] = c.k;
  j["spec"] = c.spec_name;
  j["h_grid"] = c.h_grid;
  j["exponents"] = c.exponents;
  j["eps"] = c.eps;
  j["eps0"] = c.eps0;
  j["eps_prime"] = c.eps_prime;
  j["alpha"] = c.alpha;
  j["delta"] = c.delta;
  j["eta"] = c.eta;
  j["t0"] = c.t0_mode == T0Mode::automatic ? json("auto") : c.t0_mode == T0Mode::zero ? json("zero") : json(c.t0_value);
  j["normalizer"] = c.normalizer == NormalizerKind::logk ? "logk" : c.normalizer == NormalizerKind::pf ? "pf" : "one";
  j["envelope"] = c.envelope;
  j["envelopes"] = c.envelopes;
  j["T"] = c.T;
  j["points"] = c.points;
  j["P"] = c.P ? json(*c.P) : json(nullptr);
  j["Q"] = c.Q ? json(*c.Q) : json(nullptr);
  j["H"] = c.H ? json(*c.H) : json(nullptr);
  j["t_points"] = c.t_points;
  j["perron_x"] = c.perron_x;
  j["perron_h"] = c.perron_h;
  j["perron_t_max"] = c.perron_t_max;
  j["segment_size"] = c.segment_size;
  return j;
}

}  // namespace shortint
