#pragma once

// The run, validate and oracle commands of the simulator.
//
// Exit codes: 0 success, 1 runtime failure (I/O, Picard non-convergence),
// 2 malformed or invalid config, 3 invariant breach.  Failures also print one
// JSON object on the error stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "granular/app/config.hpp"
#include "granular/app/output.hpp"
#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/eulerian.hpp"
#include "granular/heterogeneous.hpp"
#include "granular/particles.hpp"
#include "granular/picard.hpp"
#include "granular/two_block.hpp"

namespace granular::app {

inline constexpr const char* kOutputDirEnv = "GRANULAR_OUTPUT_DIR";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kConfigError = 2, kInvariantError = 3 };

inline ForceField table_force(const ForceTable& t) {
  double sup = 0.0;
  for (double v : t.values) sup = std::max(sup, std::abs(v));
  return ForceField{[t](double time, double x) {
                      const auto k = std::upper_bound(t.breakpoints.begin(), t.breakpoints.end(), x) -
                                     t.breakpoints.begin();
                      const double v = t.values[static_cast<std::size_t>(k)];
                      return t.reverse_at && time > *t.reverse_at ? -v : v;
                    },
                    0.0, sup};
}

struct Problem {
  ParticleSystem ps;
  MonotoneMap xtil;
  std::vector<double> u0;
  ForceField force;
  /// Per-particle cap; empty when the cap is uniformly 1.
  std::vector<double> rho_star;
  bool weight_force = false;
};

inline Problem build_problem(const RunConfig& cfg) {
  try {
    switch (cfg.scenario) {
      case Scenario::two_block: {
        ParticleSystem ps = build_particles(two_block_density(cfg.two_block), cfg.n);
        MonotoneMap xtil = congested_transport(ps);
        std::vector<double> u0(ps.size(), 0.0);
        return Problem{std::move(ps), std::move(xtil), std::move(u0), two_block_force(cfg.two_block), {}, false};
      }
      case Scenario::heterogeneous: {
        RatioSystem rs = build_ratio_system(hetero_scenario_density(), hetero_scenario_rho_star, cfg.n);
        std::vector<double> u0(rs.base.size(), 0.0);
        return Problem{std::move(rs.base), std::move(rs.xtil), std::move(u0), table_force(cfg.table),
                       std::move(rs.rho_star0_at_particles), cfg.rho_star_weighted_force};
      }
      case Scenario::custom: {
        PiecewiseDensity d;
        for (const auto& p : cfg.density) d.add_constant(p.lo, p.hi, p.value);
        ParticleSystem ps = build_particles(d, cfg.n);
        MonotoneMap xtil = congested_transport(ps);
        std::vector<double> u0(ps.size(), 0.0);
        for (std::size_t i = 0; i < ps.size(); ++i) {
          for (const auto& p : cfg.velocity) {
            if (p.lo <= ps.positions()[i] && ps.positions()[i] <= p.hi) u0[i] = p.value;
          }
        }
        return Problem{std::move(ps), std::move(xtil), std::move(u0), table_force(cfg.table), {}, false};
      }
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown scenario");
}

struct InvariantMaxima {
  double feasibility = 0.0;
  double gamma = 0.0;
  double gamma_block_end = 0.0;
  double momentum = 0.0;
  double rho_excess = 0.0;
  double exclusion = 0.0;
  double mass_defect = 0.0;

  nlohmann::json to_json() const {
    return {{"feasibility_violation", feasibility}, {"gamma_max", gamma},      {"gamma_block_end", gamma_block_end},
            {"momentum_defect", momentum},          {"rho_excess", rho_excess}, {"exclusion_residual", exclusion},
            {"mass_defect", mass_defect}};
  }
};

/// Checks every state of a run, Lagrangian and Eulerian, and keeps the worst
/// values.  Throws InvariantViolation naming the failed check.
class Monitor {
 public:
  Monitor(const Problem& p, const RunConfig& cfg) : p_(p), cfg_(cfg) {}

  EulerianField observe(const SimState& s) {
    const auto& m = p_.ps.masses();
    const auto rep = check_lagrangian(s, p_.xtil, m);
    max_.feasibility = std::max(max_.feasibility, -rep.feasibility_slack);
    max_.gamma = std::max(max_.gamma, rep.gamma_max);
    max_.gamma_block_end = std::max(max_.gamma_block_end, rep.gamma_block_end);
    max_.momentum = std::max(max_.momentum, rep.momentum_defect);
    enforce(rep, tolerances_for(cfg_.stepper()), s.t);

    EulerianField field = reconstruct(s, p_.ps, p_.xtil, p_.rho_star);
    const auto fr = check_field(field);
    max_.rho_excess = std::max(max_.rho_excess, fr.rho_excess);
    const double scale = impulse_scale(s.u_free, m);
    const auto ex = check_exclusion(field, cfg_.exclusion_tol * scale);
    max_.exclusion = std::max(max_.exclusion, ex.max_residual / scale);
    const double total = p_.ps.total_mass();
    const double defect = std::abs(field.mass() - total) / total;
    max_.mass_defect = std::max(max_.mass_defect, defect);

    const std::string at = " at t=" + format_double(s.t);
    if (fr.rho_excess > 1e-9 || fr.rho_min < 0.0) {
      throw InvariantViolation("density_bound", "density leaves [0, cap]" + at);
    }
    if (!ex.offending.empty()) {
      throw InvariantViolation("exclusion", "(cap - rho) gamma = " + format_double(ex.max_residual) + at);
    }
    if (defect > 1e-9) throw InvariantViolation("mass", "reconstructed mass drifts by " + format_double(defect) + at);
    return field;
  }

  const InvariantMaxima& maxima() const { return max_; }

 private:
  const Problem& p_;
  const RunConfig& cfg_;
  InvariantMaxima max_;
};

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return cfg.output_path;
}

inline nlohmann::json error_json(const std::string& kind, const std::string& message) {
  return {{"error", kind}, {"message", message}};
}

inline nlohmann::json config_summary(const RunConfig& cfg, const Problem& p) {
  nlohmann::json j;
  j["scenario"] = to_string(cfg.scenario);
  j["N"] = cfg.n;
  j["dt"] = cfg.dt;
  j["t_end"] = cfg.t_end;
  j["steps"] = cfg.stepper().num_steps();
  j["integrator"] = cfg.picard ? "picard" : "marching";
  j["projection"] = cfg.projection == ProjectionMode::incremental ? "incremental" : "accumulated";
  j["total_mass"] = p.ps.total_mass();
  j["particle_mass"] = p.ps.masses().front();
  return j;
}

/// Runs the simulation and writes lagrangian, eulerian and summary files.
inline int run(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  Problem p = build_problem(cfg);
  const StepperConfig sc = cfg.stepper();
  std::filesystem::create_directories(dir);
  const std::string ext = extension(cfg.format);
  RecordWriter lag(dir / ("lagrangian" + ext), cfg.format, {"t", "i", "x", "u", "gamma"});
  RecordWriter eul(dir / ("eulerian" + ext), cfg.format, {"t", "x", "rho", "u", "gamma", "rho_star"});

  nlohmann::json summary = config_summary(cfg, p);
  Monitor monitor(p, cfg);
  const auto out_steps = cfg.output_steps();
  std::size_t next_out = 0;
  std::optional<ContactHistory> history;
  if (cfg.scenario == Scenario::two_block) history.emplace(p.ps, cfg.tol_gamma);
  nlohmann::json errors = nlohmann::json::array();
  nlohmann::json times = nlohmann::json::array();
  const auto& masses = p.ps.masses();

  auto observer = [&](const SimState& s) {
    EulerianField field = monitor.observe(s);
    if (history) history->observe(s, masses);
    if (next_out < out_steps.size() && out_steps[next_out] == s.step) {
      ++next_out;
      times.push_back(s.t);
      write_lagrangian(lag, s);
      write_eulerian(eul, field);
      if (history) {
        const auto exact = two_block_exact(cfg.two_block, p.ps, s.t, history->contact_time().has_value());
        const auto e = error_norms(s, exact, masses);
        double gmax = 0.0;
        for (double g : exact.gamma_ex) gmax = std::max(gmax, std::abs(g));
        errors.push_back({{"t", s.t}, {"x_l2", e.x_l2}, {"u_l2", e.u_l2}, {"gamma_sup", e.gamma_sup},
                          {"gamma_ex_max", gmax}});
      }
    }
  };

  int code = kOk;
  try {
    std::span<const double> weight;
    if (p.weight_force) weight = p.rho_star;
    if (sc.picard) {
      StepperConfig quiet = sc;
      quiet.enforce_invariants = false;
      const auto res = picard_solve(p.ps, p.u0, p.force, quiet, p.xtil);
      for (const auto& s : res.trajectory) observer(s);
      summary["picard"] = {{"iterations", res.iterations}, {"residuals", res.residuals}};
    } else {
      StepperConfig quiet = sc;
      // The monitor enforces the same checks and records maxima first.
      quiet.enforce_invariants = false;
      march(init_state(p.ps, p.u0, p.xtil, quiet), p.force, quiet, p.xtil, masses, observer, weight);
    }
    summary["status"] = "ok";
  } catch (const InvariantViolation& e) {
    summary["status"] = "invariant_violation";
    summary["violation"] = {{"check", e.check()}, {"message", e.what()}};
    nlohmann::json ej = error_json("invariant", e.what());
    ej["check"] = e.check();
    err << ej.dump() << '\n';
    code = kInvariantError;
  }
  lag.flush();
  eul.flush();

  summary["output_times"] = times;
  summary["invariants"] = monitor.maxima().to_json();
  if (history) {
    auto step_of = [&](std::optional<double> t) -> nlohmann::json {
      if (!t) return nullptr;
      return static_cast<long long>(std::llround(*t / cfg.dt));
    };
    auto time_of = [](std::optional<double> t) -> nlohmann::json {
      if (!t) return nullptr;
      return *t;
    };
    summary["contact"] = {
        {"first_merged_step", step_of(history->contact_time())},
        {"first_merged_t", time_of(history->contact_time())},
        {"merge_interval", {time_of(history->contact_lower()), time_of(history->contact_time())}},
        {"last_merged_step", step_of(history->last_stuck_time())},
        {"split_step", step_of(history->separation_time())},
        {"split_interval", {time_of(history->last_stuck_time()), time_of(history->separation_time())}},
    };
    summary["errors"] = errors;
  }
  std::ofstream sf(dir / "summary.json", std::ios::binary | std::ios::trunc);
  if (!sf) throw Error("cannot write summary in " + dir.string());
  sf << summary.dump(2) << '\n';
  if (code == kOk) out << (dir / "summary.json").string() << '\n';
  return code;
}

/// Parses the config, builds the initial data and checks every invariant on
/// it without stepping.
inline int validate(const RunConfig& cfg, std::ostream& out) {
  Problem p = build_problem(cfg);
  StepperConfig sc = cfg.stepper();
  sc.enforce_invariants = false;
  Monitor monitor(p, cfg);
  monitor.observe(init_state(p.ps, p.u0, p.xtil, sc));
  nlohmann::json j = config_summary(cfg, p);
  j["status"] = "ok";
  j["invariants"] = monitor.maxima().to_json();
  out << j.dump() << '\n';
  return kOk;
}

/// Writes the exact two-block solution at the output times.
inline int oracle(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  if (cfg.scenario != Scenario::two_block) {
    throw ConfigError(std::string("no exact solution for scenario ") + to_string(cfg.scenario));
  }
  Problem p = build_problem(cfg);
  std::filesystem::create_directories(dir);
  const auto path = dir / ("oracle" + extension(cfg.format));
  RecordWriter w(path, cfg.format, {"t", "i", "x", "u", "gamma"});
  for (std::size_t step : cfg.output_steps()) {
    const double t = static_cast<double>(step) * cfg.dt;
    const auto e = two_block_exact(cfg.two_block, p.ps, t);
    for (std::size_t i = 0; i < p.ps.size(); ++i) w.write(t, i, e.x_ex[i], e.u_ex[i], e.gamma_ex[i]);
  }
  w.flush();
  out << path.string() << '\n';
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int execute(const std::string& command, const std::filesystem::path& config_path, std::ostream& out,
                   std::ostream& err) {
  try {
    const RunConfig cfg = load_config(config_path);
    if (command == "run") return run(cfg, output_dir(cfg), out, err);
    if (command == "validate") return validate(cfg, out);
    if (command == "oracle") return oracle(cfg, output_dir(cfg), out);
    err << error_json("usage", "unknown command " + command).dump() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    err << error_json("config", e.what()).dump() << '\n';
    return kConfigError;
  } catch (const InvariantViolation& e) {
    nlohmann::json ej = error_json("invariant", e.what());
    ej["check"] = e.check();
    err << ej.dump() << '\n';
    return kInvariantError;
  } catch (const ConvergenceError& e) {
    nlohmann::json ej = error_json("convergence", e.what());
    ej["last_residual"] = e.last_residual();
    err << ej.dump() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << error_json("runtime", e.what()).dump() << '\n';
    return kRuntimeError;
  }
}

}  // namespace granular::app
