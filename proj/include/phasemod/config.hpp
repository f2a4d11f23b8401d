#pragma once

// Experiment configuration: flat `key = value` files, typed parameters with
// validation, and provenance of each resolved value.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "phasemod/error.hpp"
#include "phasemod/slowsig.hpp"

namespace phasemod {

/// Parses `key = value` lines. Blank lines and text after `#` are ignored.
/// Duplicate keys keep the last value.
inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  const auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "line " << lineno << ": expected key = value";
      throw Error(Errc::configuration, "config", msg.str());
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      std::ostringstream msg;
      msg << "line " << lineno << ": empty key";
      throw Error(Errc::configuration, "config", msg.str());
    }
    out[key] = value;
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x))
    throw Error(Errc::configuration, "config", key + ": not a finite number: '" + v + "'");
  return x;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end)
    throw Error(Errc::configuration, "config", key + ": not a non-negative integer: '" + v + "'");
  return x;
}

/// Every tunable of the CLI. Zero steps and horizons mean "use the
/// subcommand default".
struct ExperimentConfig {
  std::string model = "lamom";
  std::string signal = "constant";
  double q = std::numeric_limits<double>::quiet_NaN();  // frozen q; NaN = q0
  double q0 = 0.9;
  double q1 = 1.0;
  double f = 1.0;
  double eps = 0.0025;
  double kappa = 1.0;
  double d = 0.0;
  std::uint64_t seed = 1;
  double mu = 1000.0;
  std::uint64_t modes = 2;
  std::string out = ".";
  std::uint64_t workers = 0;  // 0 = available cores
  double dt = 0.0;
  double t_end = 0.0;         // slow-time horizon tau
  std::uint64_t grid = 512;
  double phi0 = 0.5;
  std::uint64_t count = 51;
  double sigma = 0.01;
  double d_min = 0.0, d_max = 0.5;
  std::uint64_t d_steps = 11;
  double f_min = 0.2, f_max = 3.0;
  std::uint64_t f_steps = 15;
  std::string coefficients = "published";  // or "computed"

  double frozen_q() const { return std::isnan(q) ? q0 : q; }
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "model", "signal", "q",  "q0",   "q1",    "f",     "eps",     "kappa",   "d",
      "seed",  "mu",     "modes", "out", "workers", "dt",  "t-end",   "grid",    "phi0",
      "count", "sigma",  "d-min", "d-max", "d-steps", "f-min", "f-max", "f-steps",
      "coefficients"};
  return keys;
}

/// Applies one key. Unknown keys and malformed values are configuration errors.
inline void apply_config_value(ExperimentConfig& c, const std::string& key,
                               const std::string& v) {
  if (key == "model") c.model = v;
  else if (key == "signal") c.signal = v;
  else if (key == "q") c.q = parse_real(key, v);
  else if (key == "q0") c.q0 = parse_real(key, v);
  else if (key == "q1") c.q1 = parse_real(key, v);
  else if (key == "f") c.f = parse_real(key, v);
  else if (key == "eps") c.eps = parse_real(key, v);
  else if (key == "kappa") c.kappa = parse_real(key, v);
  else if (key == "d") c.d = parse_real(key, v);
  else if (key == "seed") c.seed = parse_unsigned(key, v);
  else if (key == "mu") c.mu = parse_real(key, v);
  else if (key == "modes") c.modes = parse_unsigned(key, v);
  else if (key == "out") c.out = v;
  else if (key == "workers") c.workers = parse_unsigned(key, v);
  else if (key == "dt") c.dt = parse_real(key, v);
  else if (key == "t-end") c.t_end = parse_real(key, v);
  else if (key == "grid") c.grid = parse_unsigned(key, v);
  else if (key == "phi0") c.phi0 = parse_real(key, v);
  else if (key == "count") c.count = parse_unsigned(key, v);
  else if (key == "sigma") c.sigma = parse_real(key, v);
  else if (key == "d-min") c.d_min = parse_real(key, v);
  else if (key == "d-max") c.d_max = parse_real(key, v);
  else if (key == "d-steps") c.d_steps = parse_unsigned(key, v);
  else if (key == "f-min") c.f_min = parse_real(key, v);
  else if (key == "f-max") c.f_max = parse_real(key, v);
  else if (key == "f-steps") c.f_steps = parse_unsigned(key, v);
  else if (key == "coefficients") c.coefficients = v;
  else throw Error(Errc::configuration, "config", "unknown key '" + key + "'");
}

/// Checks module preconditions that can be decided before any computation.
inline void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& m) { throw Error(Errc::configuration, "config", m); };
  if (c.model != "lamom" && c.model != "traub") fail("model must be lamom or traub");
  parse_signal_kind(c.signal);
  if (c.coefficients != "published" && c.coefficients != "computed")
    fail("coefficients must be published or computed");
  if (!(c.eps >= 0.0)) fail("eps must be non-negative");
  if (!(c.f > 0.0)) fail("f must be positive");
  if (!(c.mu > 0.0)) fail("mu must be positive");
  if (c.dt < 0.0) fail("dt must be positive (or 0 for the default)");
  if (c.t_end < 0.0) fail("t-end must be positive (or 0 for the default)");
  if (c.grid < 8) fail("grid must be at least 8");
  if (c.modes == 0 || 2 * c.modes >= c.grid) fail("modes must be in [1, grid/2)");
  if (c.count == 0) fail("count must be positive");
  if (c.sigma < 0.0) fail("sigma must be non-negative");
  if (c.d_steps == 0 || c.f_steps == 0) fail("sweep steps must be positive");
  if (!(c.f_min > 0.0) || c.f_max < c.f_min) fail("sweep needs 0 < f-min <= f-max");
  if (c.d_max < c.d_min) fail("sweep needs d-min <= d-max");
  if (c.model == "traub") {
    const auto in_range = [](double q) { return q >= 0.0 && q <= 0.6; };
    if (!std::isnan(c.q) && !in_range(c.q)) fail("traub q must lie in [0, 0.6]");
  }
}

/// Human-readable provenance for the manifest.
enum class ValueSource { fallback, environment, file, flag, preset };

inline std::string_view to_string(ValueSource s) {
  switch (s) {
    case ValueSource::fallback: return "default";
    case ValueSource::environment: return "environment";
    case ValueSource::file: return "file";
    case ValueSource::flag: return "flag";
    case ValueSource::preset: return "preset";
  }
  return "unknown";
}

/// Resolved key/value pairs in their textual form, used for manifests.
inline std::map<std::string, std::string> config_as_text(const ExperimentConfig& c) {
  std::map<std::string, std::string> m;
  const auto num = [](double v) {
    if (std::isnan(v)) return std::string("unset");
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  };
  m["model"] = c.model;
  m["signal"] = c.signal;
  m["q"] = num(c.q);
  m["q0"] = num(c.q0);
  m["q1"] = num(c.q1);
  m["f"] = num(c.f);
  m["eps"] = num(c.eps);
  m["kappa"] = num(c.kappa);
  m["d"] = num(c.d);
  m["seed"] = std::to_string(c.seed);
  m["mu"] = num(c.mu);
  m["modes"] = std::to_string(c.modes);
  m["out"] = c.out;
  m["workers"] = std::to_string(c.workers);
  m["dt"] = num(c.dt);
  m["t-end"] = num(c.t_end);
  m["grid"] = std::to_string(c.grid);
  m["phi0"] = num(c.phi0);
  m["count"] = std::to_string(c.count);
  m["sigma"] = num(c.sigma);
  m["d-min"] = num(c.d_min);
  m["d-max"] = num(c.d_max);
  m["d-steps"] = std::to_string(c.d_steps);
  m["f-min"] = num(c.f_min);
  m["f-max"] = num(c.f_max);
  m["f-steps"] = std::to_string(c.f_steps);
  m["coefficients"] = c.coefficients;
  return m;
}

}  // namespace phasemod
