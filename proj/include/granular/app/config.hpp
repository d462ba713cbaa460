#pragma once

// Run configuration for the command-line simulator, read from JSON.
//
//   {
//     "scenario": "two-block",          // or "heterogeneous", "custom"
//     "N": 2000, "dt": 0.001, "t_end": 3.0,
//     "output_times": [0, 0.64, 1, 1.5, 2, 3],
//     "force": {"alpha": 0.5, "t_star": 1.0},
//     "integrator": {"type": "marching"},
//     "output": {"path": "out/two_block", "format": "csv"}
//   }
//
// Unknown keys are rejected so that typos do not silently fall back to
// defaults.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/two_block.hpp"

namespace granular::app {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Scenario { two_block, heterogeneous, custom };
enum class Format { csv, json_lines };

/// f(x) = values[k] on [breakpoints[k-1], breakpoints[k]); the sign flips
/// for t > reverse_at when that is set.
struct ForceTable {
  std::vector<double> breakpoints;
  std::vector<double> values;
  std::optional<double> reverse_at;
};

struct ConstantPiece {
  double lo = 0.0;
  double hi = 0.0;
  double value = 0.0;
};

struct RunConfig {
  Scenario scenario = Scenario::two_block;
  std::size_t n = 0;
  double dt = 0.0;
  double t_end = 0.0;
  std::vector<double> output_times;
  TwoBlockParams two_block;
  ForceTable table;
  bool rho_star_weighted_force = false;
  std::vector<ConstantPiece> density;
  std::vector<ConstantPiece> velocity;
  std::optional<PicardOptions> picard;
  ProjectionMode projection = ProjectionMode::incremental;
  std::filesystem::path output_path = "out";
  Format format = Format::csv;
  double tol_gamma = 1e-10;
  double exclusion_tol = 1e-6;

  StepperConfig stepper() const {
    StepperConfig c;
    c.dt = dt;
    c.t_end = t_end;
    c.picard = picard;
    c.tol_gamma = tol_gamma;
    c.projection = projection;
    return c;
  }

  /// Step index of every output time, sorted and without repeats.
  std::vector<std::size_t> output_steps() const {
    std::set<std::size_t> steps;
    for (double t : output_times) steps.insert(static_cast<std::size_t>(std::llround(t / dt)));
    return {steps.begin(), steps.end()};
  }
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::two_block: return "two-block";
    case Scenario::heterogeneous: return "heterogeneous";
    case Scenario::custom: return "custom";
  }
  return "?";
}

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
  return v;
}

inline double positive(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) throw ConfigError(where + ": must be > 0");
  return v;
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> v;
  for (std::size_t k = 0; k < j.size(); ++k) v.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
  return v;
}

inline std::vector<ConstantPiece> pieces(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array of pieces");
  std::vector<ConstantPiece> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string w = where + "[" + std::to_string(k) + "]";
    only_keys(j[k], w, {"lo", "hi", "value"});
    if (!j[k].contains("lo") || !j[k].contains("hi") || !j[k].contains("value")) {
      throw ConfigError(w + ": needs lo, hi and value");
    }
    ConstantPiece p{number(j[k]["lo"], w + ".lo"), number(j[k]["hi"], w + ".hi"), number(j[k]["value"], w + ".value")};
    if (!(p.hi > p.lo)) throw ConfigError(w + ": needs hi > lo");
    out.push_back(p);
  }
  return out;
}

inline ForceTable force_table(const json& j, const std::string& where) {
  only_keys(j, where, {"breakpoints", "values", "reverse_at"});
  ForceTable t;
  if (j.contains("breakpoints")) t.breakpoints = numbers(j["breakpoints"], where + ".breakpoints");
  if (!j.contains("values")) throw ConfigError(where + ": needs values");
  t.values = numbers(j["values"], where + ".values");
  if (t.values.size() != t.breakpoints.size() + 1) {
    throw ConfigError(where + ": needs exactly one more value than breakpoints");
  }
  for (std::size_t k = 1; k < t.breakpoints.size(); ++k) {
    if (!(t.breakpoints[k] > t.breakpoints[k - 1])) throw ConfigError(where + ": breakpoints must increase");
  }
  if (j.contains("reverse_at")) t.reverse_at = number(j["reverse_at"], where + ".reverse_at");
  return t;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::number;
  using detail::positive;
  detail::only_keys(j, "config", {"scenario", "N", "dt", "t_end", "output_times", "force", "blocks", "density",
                                  "initial_velocity", "rho_star_weighted_force", "integrator", "projection",
                                  "output", "tolerances"});
  RunConfig c;

  if (!j.contains("scenario") || !j["scenario"].is_string()) throw ConfigError("scenario: required string");
  const auto scenario = j["scenario"].get<std::string>();
  if (scenario == "two-block") c.scenario = Scenario::two_block;
  else if (scenario == "heterogeneous") c.scenario = Scenario::heterogeneous;
  else if (scenario == "custom") c.scenario = Scenario::custom;
  else throw ConfigError("scenario: expected two-block, heterogeneous or custom, got '" + scenario + "'");

  if (!j.contains("N") || !j["N"].is_number_integer() || j["N"].get<long long>() < 1) {
    throw ConfigError("N: required positive integer");
  }
  c.n = j["N"].get<std::size_t>();
  if (!j.contains("dt")) throw ConfigError("dt: required");
  c.dt = positive(j["dt"], "dt");
  if (!j.contains("t_end")) throw ConfigError("t_end: required");
  c.t_end = number(j["t_end"], "t_end");
  if (c.t_end < 0.0) throw ConfigError("t_end: must be >= 0");
  const double steps = c.t_end / c.dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError("t_end: must be a whole number of steps dt");
  }

  c.output_times = j.contains("output_times") ? detail::numbers(j["output_times"], "output_times")
                                              : std::vector<double>{0.0, c.t_end};
  for (double t : c.output_times) {
    if (t < 0.0 || t > c.t_end * (1.0 + 1e-12)) throw ConfigError("output_times: every time must lie in [0, t_end]");
    const double k = t / c.dt;
    if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
      throw ConfigError("output_times: " + std::to_string(t) + " is not on the time grid");
    }
  }

  const nlohmann::json force = j.value("force", nlohmann::json::object());
  switch (c.scenario) {
    case Scenario::two_block: {
      detail::only_keys(force, "force", {"alpha", "t_star"});
      if (force.contains("alpha")) c.two_block.alpha = number(force["alpha"], "force.alpha");
      if (force.contains("t_star")) c.two_block.t_star = number(force["t_star"], "force.t_star");
      if (j.contains("blocks")) {
        const auto& b = j["blocks"];
        detail::only_keys(b, "blocks", {"a1", "b1", "a2", "b2"});
        if (b.contains("a1")) c.two_block.a1 = number(b["a1"], "blocks.a1");
        if (b.contains("b1")) c.two_block.b1 = number(b["b1"], "blocks.b1");
        if (b.contains("a2")) c.two_block.a2 = number(b["a2"], "blocks.a2");
        if (b.contains("b2")) c.two_block.b2 = number(b["b2"], "blocks.b2");
      }
      try {
        c.two_block.validate();
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
      break;
    }
    case Scenario::heterogeneous:
      c.table = force.empty() ? ForceTable{{0.5}, {0.5, -0.5}, std::nullopt} : detail::force_table(force, "force");
      break;
    case Scenario::custom:
      c.table = force.empty() ? ForceTable{{}, {0.0}, std::nullopt} : detail::force_table(force, "force");
      if (!j.contains("density")) throw ConfigError("density: required for the custom scenario");
      c.density = detail::pieces(j["density"], "density");
      for (const auto& p : c.density) {
        if (p.value < 0.0) throw ConfigError("density: values must be >= 0");
        if (p.value > 1.0) throw ConfigError("density: constraint violation, value exceeds the maximal density 1");
      }
      if (j.contains("initial_velocity")) c.velocity = detail::pieces(j["initial_velocity"], "initial_velocity");
      break;
  }
  if (c.scenario != Scenario::two_block && j.contains("blocks")) {
    throw ConfigError("blocks: only valid for the two-block scenario");
  }
  if (c.scenario != Scenario::custom && (j.contains("density") || j.contains("initial_velocity"))) {
    throw ConfigError("density/initial_velocity: only valid for the custom scenario");
  }
  if (j.contains("rho_star_weighted_force")) {
    if (!j["rho_star_weighted_force"].is_boolean()) throw ConfigError("rho_star_weighted_force: expected a boolean");
    if (c.scenario != Scenario::heterogeneous) {
      throw ConfigError("rho_star_weighted_force: only valid for the heterogeneous scenario");
    }
    c.rho_star_weighted_force = j["rho_star_weighted_force"].get<bool>();
  }

  if (j.contains("integrator")) {
    const auto& in = j["integrator"];
    detail::only_keys(in, "integrator", {"type", "max_iters", "tol"});
    const std::string type = in.value("type", "marching");
    if (type == "picard") {
      PicardOptions p;
      if (in.contains("max_iters")) {
        if (!in["max_iters"].is_number_integer() || in["max_iters"].get<long long>() < 1) {
          throw ConfigError("integrator.max_iters: expected a positive integer");
        }
        p.max_iters = in["max_iters"].get<std::size_t>();
      }
      if (in.contains("tol")) p.tol = positive(in["tol"], "integrator.tol");
      c.picard = p;
    } else if (type != "marching") {
      throw ConfigError("integrator.type: expected marching or picard");
    } else if (in.contains("max_iters") || in.contains("tol")) {
      throw ConfigError("integrator: max_iters/tol only apply to picard");
    }
  }

  if (c.picard && c.rho_star_weighted_force) {
    throw ConfigError("integrator: picard does not support rho_star_weighted_force");
  }

  if (j.contains("projection")) {
    const std::string p = j["projection"].is_string() ? j["projection"].get<std::string>() : "";
    if (p == "incremental") c.projection = ProjectionMode::incremental;
    else if (p == "accumulated") c.projection = ProjectionMode::accumulated;
    else throw ConfigError("projection: expected incremental or accumulated");
  }

  if (j.contains("output")) {
    const auto& o = j["output"];
    detail::only_keys(o, "output", {"path", "format"});
    if (o.contains("path")) {
      if (!o["path"].is_string() || o["path"].get<std::string>().empty()) {
        throw ConfigError("output.path: expected a non-empty string");
      }
      c.output_path = o["path"].get<std::string>();
    }
    if (o.contains("format")) {
      const std::string f = o["format"].is_string() ? o["format"].get<std::string>() : "";
      if (f == "csv") c.format = Format::csv;
      else if (f == "json-lines") c.format = Format::json_lines;
      else throw ConfigError("output.format: expected csv or json-lines");
    }
  }

  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    detail::only_keys(t, "tolerances", {"gamma", "exclusion"});
    if (t.contains("gamma")) c.tol_gamma = number(t["gamma"], "tolerances.gamma");
    if (t.contains("exclusion")) c.exclusion_tol = number(t["exclusion"], "tolerances.exclusion");
    if (c.tol_gamma < 0.0 || c.exclusion_tol < 0.0) throw ConfigError("tolerances: must be >= 0");
  }
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace granular::app
