#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "srheat/analysis/errors.hpp"
#include "srheat/analysis/montecarlo.hpp"
#include "srheat/heat/laplacian.hpp"
#include "srheat/softfloat/format.hpp"
#include "srheat/softfloat/rounding.hpp"
#include "srheat/stepper/linear_solvers.hpp"
#include "srheat/stepper/stepper.hpp"

namespace srheat::cli {

/// A configuration problem, reported as "<origin>:<line>: <message>".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where a setting came from: a file line or a command-line override.
struct ConfigSource {
  std::string origin;
  int line = 0;

  std::string where() const { return line > 0 ? origin + ":" + std::to_string(line) : origin; }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      auto item = trim(s.substr(start, i - start));
      if (!item.empty()) out.push_back(std::move(item));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

/// Flat key = value settings. '#' starts a comment; later settings override
/// earlier ones.
class ConfigMap {
 public:
  void parse_text(std::string_view text, const std::string& origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto content = detail::trim(line);
      if (content.empty()) continue;
      const auto eq = content.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
      set(detail::trim(content.substr(0, eq)), detail::trim(content.substr(eq + 1)),
          {origin, number});
    }
  }

  void parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open configuration file");
    std::stringstream buf;
    buf << in.rdbuf();
    parse_text(buf.str(), path);
  }

  /// A "key=value" command-line override.
  void set_override(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("--set " + std::string(kv) + ": expected key=value");
    set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)),
        {"--set " + std::string(kv), 0});
  }

  void set(const std::string& key, const std::string& value, ConfigSource src) {
    if (key.empty()) throw ConfigError(src.where() + ": empty key");
    entries_[key] = {value, std::move(src)};
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& value(const std::string& key) const { return entries_.at(key).first; }
  const ConfigSource& source(const std::string& key) const { return entries_.at(key).second; }
  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [key, _] : entries_) k.push_back(key);
    return k;
  }

 private:
  std::map<std::string, std::pair<std::string, ConfigSource>> entries_;
};

enum class Subcommand { solution, local, global, lambda_sweep, bounds, rates };

inline const char* to_string(Subcommand s) {
  switch (s) {
    case Subcommand::solution: return "solution";
    case Subcommand::local: return "local";
    case Subcommand::global: return "global";
    case Subcommand::lambda_sweep: return "lambda-sweep";
    case Subcommand::bounds: return "bounds";
    case Subcommand::rates: return "rates";
  }
  return "?";
}

inline Subcommand parse_subcommand(std::string_view s) {
  if (s == "solution") return Subcommand::solution;
  if (s == "local") return Subcommand::local;
  if (s == "global") return Subcommand::global;
  if (s == "lambda-sweep") return Subcommand::lambda_sweep;
  if (s == "bounds") return Subcommand::bounds;
  if (s == "rates") return Subcommand::rates;
  throw ConfigError("unknown subcommand '" + std::string(s) + "'");
}

/// One evaluation strategy of the time step.
struct Implementation {
  Form form = Form::delta;
  MatvecKind matvec = MatvecKind::two_diff;

  friend bool operator==(const Implementation&, const Implementation&) = default;
};

struct ExperimentConfig {
  Subcommand subcommand = Subcommand::global;
  std::string problem;  // heat{d}d
  int d = 1;
  double G = 1.0;
  std::string scheme = "FE";
  FloatFormat format = FloatFormat::bfloat16();
  std::vector<Rounding> modes;
  std::vector<Implementation> implementations;
  /// Mesh sizes as interval counts K = 1/h.
  std::vector<int> K;
  double lambda = 0.0;
  std::vector<double> lambdas;
  double T = 1.0;
  std::uint64_t seed = 1;
  LinearSolverKind solver = LinearSolverKind::automatic;
  MultigridOptions multigrid;
  MCOptions mc;
  /// Realizations whose worst local errors are collected under stochastic rounding.
  int local_samples = 10;
  int stagnation_window = 10;
  std::vector<NormKind> norms{NormKind::inf, NormKind::l2};
  /// Input CSV for `rates`; empty means run the global sweep first.
  std::string input;
};

namespace detail {

class Reader {
 public:
  explicit Reader(const ConfigMap& map) : map_(map) {}

  bool has(const std::string& key) {
    used_.insert(key);
    return map_.has(key);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string where = map_.has(key) ? map_.source(key).where() : "configuration";
    throw ConfigError(where + ": " + key + ": " + msg);
  }

  const std::string& text(const std::string& key) {
    used_.insert(key);
    return map_.value(key);
  }

  double real(const std::string& key) { return parse_real(key, text(key)); }

  double parse_real(const std::string& key, const std::string& s) const {
    // accepts 2^-4 style powers of two
    if (const auto caret = s.find('^'); caret != std::string::npos) {
      const double base = parse_plain(key, s.substr(0, caret));
      const double exp = parse_plain(key, s.substr(caret + 1));
      return std::pow(base, exp);
    }
    return parse_plain(key, s);
  }

  long integer(const std::string& key) {
    const auto& s = text(key);
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
    return v;
  }

  std::vector<std::string> list(const std::string& key) { return split_list(text(key)); }

  void reject_unused() const {
    for (const auto& k : map_.keys())
      if (!used_.count(k)) fail(k, "unknown key");
  }

 private:
  double parse_plain(const std::string& key, const std::string& s) const {
    const auto t = trim(s);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail(key, "expected a number, got '" + s + "'");
    return v;
  }

  const ConfigMap& map_;
  std::set<std::string> used_;
};

inline std::vector<int> default_K(Subcommand sub, int d) {
  if (sub == Subcommand::solution || sub == Subcommand::lambda_sweep) return {128};
  switch (d) {
    case 1: return {16, 32, 64, 128};
    case 2: return {8, 16, 32};
    default: return {4, 8, 16};
  }
}

}  // namespace detail

/// Validates a configuration for a subcommand, filling the desk-scale defaults.
inline ExperimentConfig make_config(Subcommand sub, const ConfigMap& map) {
  detail::Reader r(map);
  ExperimentConfig c;
  c.subcommand = sub;

  if (r.has("d")) {
    c.d = static_cast<int>(r.integer("d"));
    if (c.d < 1 || c.d > 3) r.fail("d", "dimension must be 1, 2 or 3");
  }
  if (r.has("problem")) {
    c.problem = r.text("problem");
    if (c.problem != "heat1d" && c.problem != "heat2d" && c.problem != "heat3d")
      r.fail("problem", "unknown problem '" + c.problem + "'");
    const int pd = c.problem[4] - '0';
    if (map.has("d") && pd != c.d) r.fail("problem", "problem dimension disagrees with d");
    c.d = pd;
  }
  c.problem = "heat" + std::to_string(c.d) + "d";
  if (r.has("G")) c.G = r.real("G");

  c.scheme = sub == Subcommand::lambda_sweep ? "BE" : "FE";
  if (r.has("scheme")) {
    c.scheme = r.text("scheme");
    try {
      (void)scheme(c.scheme);
    } catch (const std::exception& e) {
      r.fail("scheme", e.what());
    }
  }
  if (r.has("format")) {
    try {
      c.format = parse_format(r.text("format"));
      require_emulatable(c.format);
    } catch (const std::exception& e) {
      r.fail("format", e.what());
    }
  }
  if (!is_representable(c.G, c.format)) r.fail(map.has("G") ? "G" : "format", "boundary value G is not representable in the format");

  if (sub == Subcommand::solution)
    c.modes = {Rounding::carrier, Rounding::nearest, Rounding::stochastic};
  else
    c.modes = {Rounding::nearest, Rounding::stochastic};
  if (r.has("modes")) {
    c.modes.clear();
    for (const auto& m : r.list("modes")) {
      try {
        c.modes.push_back(parse_rounding(m));
      } catch (const std::exception& e) {
        r.fail("modes", e.what());
      }
    }
    if (c.modes.empty()) r.fail("modes", "no rounding modes given");
  }

  Implementation impl;
  if (r.has("form")) {
    try {
      impl.form = parse_form(r.text("form"));
    } catch (const std::exception& e) {
      r.fail("form", e.what());
    }
  }
  if (r.has("matvec")) {
    try {
      impl.matvec = parse_matvec(r.text("matvec"));
    } catch (const std::exception& e) {
      r.fail("matvec", e.what());
    }
  }
  if (sub == Subcommand::local)
    c.implementations = {{Form::delta, MatvecKind::two_diff},
                         {Form::delta, MatvecKind::naive},
                         {Form::direct, MatvecKind::two_diff}};
  else
    c.implementations = {impl};
  if (r.has("implementations")) {
    c.implementations.clear();
    for (const auto& item : r.list("implementations")) {
      const auto colon = item.find(':');
      try {
        Implementation im;
        im.form = parse_form(item.substr(0, colon));
        if (colon != std::string::npos) im.matvec = parse_matvec(item.substr(colon + 1));
        c.implementations.push_back(im);
      } catch (const std::exception& e) {
        r.fail("implementations", e.what());
      }
    }
    if (c.implementations.empty()) r.fail("implementations", "no implementations given");
  }

  c.K = detail::default_K(sub, c.d);
  if (r.has("h")) {
    c.K.clear();
    for (const auto& item : r.list("h")) {
      const double h = r.parse_real("h", item);
      const double K = 1.0 / h;
      if (!(h > 0.0) || K != std::floor(K) || K < 2 || K > 4096)
        r.fail("h", "mesh size " + item + " is not 1/K for an integer 2 <= K <= 4096");
      const int Ki = static_cast<int>(K);
      if ((Ki & (Ki - 1)) != 0) r.fail("h", "mesh size " + item + " is not a power of two");
      c.K.push_back(Ki);
    }
    if (c.K.empty()) r.fail("h", "empty mesh size list");
  }

  c.lambda = (0.5 - 1.0 / 16.0) / c.d;
  if (r.has("lambda")) {
    c.lambda = r.real("lambda");
    if (!(c.lambda > 0.0)) r.fail("lambda", "lambda must be positive");
  }
  for (int l = 0; l <= 7; ++l) c.lambdas.push_back(std::ldexp(1.0, l + 5) + 5.0);
  if (r.has("lambdas")) {
    c.lambdas.clear();
    for (const auto& item : r.list("lambdas")) {
      const double v = r.parse_real("lambdas", item);
      if (!(v > 0.0)) r.fail("lambdas", "lambda must be positive");
      c.lambdas.push_back(v);
    }
    if (c.lambdas.empty()) r.fail("lambdas", "empty lambda list");
  }
  {
    const RKScheme sc = scheme(c.scheme);
    const std::string key = map.has("lambda") ? "lambda" : (map.has("scheme") ? "scheme" : "d");
    auto check = [&](double lam, const std::string& k) {
      if (!sc.implicit && !stable_on_spectrum(sc, c.d, lam))
        r.fail(map.has(k) ? k : key, "scheme " + c.scheme + " is unstable for lambda = " +
                                         std::to_string(lam) + " in " + std::to_string(c.d) + "D");
    };
    if (sub == Subcommand::lambda_sweep)
      for (double lam : c.lambdas) check(lam, "lambdas");
    else
      check(c.lambda, "lambda");
  }

  if (r.has("T")) {
    c.T = r.real("T");
    if (!(c.T > 0.0)) r.fail("T", "final time must be positive");
  }
  if (r.has("seed")) {
    const long s = r.integer("seed");
    if (s < 0) r.fail("seed", "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (r.has("solver")) {
    try {
      c.solver = parse_solver(r.text("solver"));
    } catch (const std::exception& e) {
      r.fail("solver", e.what());
    }
  }
  if (r.has("mg_max_cycles")) {
    c.multigrid.max_cycles = static_cast<int>(r.integer("mg_max_cycles"));
    if (c.multigrid.max_cycles < 1) r.fail("mg_max_cycles", "must be at least 1");
  }
  if (r.has("mg_stall_factor")) {
    c.multigrid.stall_factor = r.real("mg_stall_factor");
    if (!(c.multigrid.stall_factor > 0.0 && c.multigrid.stall_factor < 1.0))
      r.fail("mg_stall_factor", "must lie in (0, 1)");
  }
  if (r.has("mc_rel_tol")) {
    c.mc.relative_half_width = r.real("mc_rel_tol");
    if (!(c.mc.relative_half_width > 0.0)) r.fail("mc_rel_tol", "must be positive");
  }
  if (r.has("mc_min_samples")) {
    const long v = r.integer("mc_min_samples");
    if (v < 2) r.fail("mc_min_samples", "must be at least 2");
    c.mc.min_samples = static_cast<std::size_t>(v);
  }
  if (r.has("mc_max_samples")) {
    const long v = r.integer("mc_max_samples");
    if (v < static_cast<long>(c.mc.min_samples)) r.fail("mc_max_samples", "must be at least mc_min_samples");
    c.mc.max_samples = static_cast<std::size_t>(v);
  }
  if (c.mc.max_samples < c.mc.min_samples) c.mc.max_samples = c.mc.min_samples;
  if (r.has("mc_batch")) {
    const long v = r.integer("mc_batch");
    if (v < 1) r.fail("mc_batch", "must be at least 1");
    c.mc.batch = static_cast<std::size_t>(v);
  }
  if (r.has("local_samples")) {
    c.local_samples = static_cast<int>(r.integer("local_samples"));
    if (c.local_samples < 1) r.fail("local_samples", "must be at least 1");
  }
  if (r.has("stagnation_window")) {
    c.stagnation_window = static_cast<int>(r.integer("stagnation_window"));
    if (c.stagnation_window < 1) r.fail("stagnation_window", "must be at least 1");
  }
  if (r.has("norms")) {
    c.norms.clear();
    for (const auto& n : r.list("norms")) {
      try {
        c.norms.push_back(parse_norm(n));
      } catch (const std::exception& e) {
        r.fail("norms", e.what());
      }
    }
    if (c.norms.empty()) r.fail("norms", "no norms given");
  }
  if (r.has("input")) c.input = r.text("input");
  r.reject_unused();
  return c;
}

}  // namespace srheat::cli
