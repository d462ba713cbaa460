#pragma once

// Explicit marching of the constrained Lagrangian dynamics.
//
// Per particle the state carries the free velocity U_free = u0 + int f (the
// velocity without any contact, which also stores the adhesion memory), the
// free trajectory A_free = X0 + int U_free, the admissible transport X in
// K~ = K + Xtil, the velocity U and the adhesion potential Gamma.
//
// One step of length dt:
//   U_free' = U_free + dt f(t, X)            (left rectangle rule)
//   A_free' = A_free + dt U_free'
//   X'      = P_K~(X + dt U_free')           (ProjectionMode::incremental)
//           = P_K~(A_free')                  (ProjectionMode::accumulated)
//   U'      = projection of U_free' onto the admissible velocities at X'
//   Gamma'_i = sum_{j<=i} m_j (U'_j - U_free'_j)
//
// Gamma_i is the value at the right cell edge of particle i, i.e. at the
// contact i|i+1.  It is nonpositive, and vanishes at every open contact and at
// the right end of every block.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "granular/error.hpp"
#include "granular/isotonic.hpp"
#include "granular/particles.hpp"
#include "granular/projection.hpp"

namespace granular {

/// External force f(t, x) with the bounds the theory asks for.
struct ForceField {
  std::function<double(double, double)> eval;
  double lipschitz_k = 0.0;
  double sup_bound = 0.0;

  static ForceField zero() { return ForceField{[](double, double) { return 0.0; }, 0.0, 0.0}; }

  static ForceField constant(double value) {
    return ForceField{[value](double, double) { return value; }, 0.0, std::abs(value)};
  }
};

enum class ProjectionMode {
  /// Project the previous transport advanced by dt * U_free.
  incremental,
  /// Project the whole free trajectory A_free.  Congested zones formed under a
  /// force only release once A_free itself becomes admissible, which is later
  /// than the adhesion potential returning to zero; kept for comparison.
  accumulated,
};

struct PicardOptions {
  std::size_t max_iters = 50;
  double tol = 1e-12;
};

struct StepperConfig {
  double dt = 1e-3;
  double t_end = 0.0;
  std::optional<PicardOptions> picard;
  /// Relative to max(1, total mass * velocity scale).
  double tol_gamma = 1e-10;
  /// A contact is closed when its gap exceeds the Xtil gap by at most
  /// contact_tol * max(1, position scale).
  double contact_tol = 1e-12;
  ProjectionMode projection = ProjectionMode::incremental;
  /// Throw InvariantViolation from step() when a Lagrangian invariant fails.
  bool enforce_invariants = true;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("stepper: dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw InvalidArgument("stepper: t_end must be >= 0");
    if (!(tol_gamma >= 0.0)) throw InvalidArgument("stepper: tol_gamma must be >= 0");
    if (!(contact_tol >= 0.0)) throw InvalidArgument("stepper: contact_tol must be >= 0");
    if (picard && (picard->max_iters == 0 || !(picard->tol > 0.0))) {
      throw InvalidArgument("stepper: picard needs max_iters > 0 and tol > 0");
    }
  }

  std::size_t num_steps() const {
    return static_cast<std::size_t>(std::llround(t_end / dt));
  }
};

/// Immutable snapshot of the Lagrangian fields at time t = step * dt.
struct SimState {
  std::size_t step = 0;
  double t = 0.0;
  std::vector<double> a_free;
  std::vector<double> u_free;
  MonotoneMap x;
  std::vector<double> u;
  std::vector<double> gamma;
  BlockPartition blocks;
};

inline double position_scale(std::span<const double> x) {
  double s = 1.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

/// max(1, M * max |v|), the scale of the adhesion potential.
inline double impulse_scale(std::span<const double> v, std::span<const double> masses) {
  double total = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    total += masses[i];
    vmax = std::max(vmax, std::abs(v[i]));
  }
  return std::max(1.0, total * vmax);
}

/// Flags, for each contact i|i+1, whether the particles are packed at the
/// maximal density.
inline std::vector<bool> closed_contacts(const MonotoneMap& x, const MonotoneMap& xtil, double contact_tol) {
  if (x.size() != xtil.size()) throw InvalidArgument("closed_contacts: length mismatch");
  const std::size_t n = x.size();
  std::vector<bool> closed(n == 0 ? 0 : n - 1);
  const double tol = contact_tol * position_scale(x.span());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    closed[i] = (x[i + 1] - x[i]) - (xtil[i + 1] - xtil[i]) <= tol;
  }
  return closed;
}

/// Maximal runs of closed contacts, as blocks of particles.
inline BlockPartition closed_chains(const std::vector<bool>& closed) {
  std::vector<IndexRange> blocks;
  std::size_t i = 0;
  while (i < closed.size()) {
    if (!closed[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < closed.size() && closed[j]) ++j;
    blocks.push_back(IndexRange{i, j});
    i = j;
  }
  return BlockPartition(std::move(blocks));
}

/// U_free off the blocks, its mass average on each block.
inline std::vector<double> block_velocity(std::span<const double> u_free, const BlockPartition& blocks,
                                          std::span<const double> masses) {
  if (u_free.size() != masses.size()) throw InvalidArgument("block_velocity: length mismatch");
  std::vector<double> u(u_free.begin(), u_free.end());
  for (const auto& b : blocks.blocks()) {
    if (b.hi >= u.size()) throw InvalidArgument("block_velocity: block outside the index set");
    // Mean as an offset from the first value, so equal values stay exact.
    const double base = u_free[b.lo];
    double mom = 0.0, mass = 0.0;
    for (std::size_t j = b.lo; j <= b.hi; ++j) {
      mom += masses[j] * (u_free[j] - base);
      mass += masses[j];
    }
    const double mean = base + mom / mass;
    std::fill(u.begin() + static_cast<std::ptrdiff_t>(b.lo), u.begin() + static_cast<std::ptrdiff_t>(b.hi) + 1,
              mean);
  }
  return u;
}

/// Gamma_i = sum_{j<=i} m_j (u_j - u_free_j).
inline std::vector<double> adhesion_potential(std::span<const double> u, std::span<const double> u_free,
                                              std::span<const double> masses) {
  if (u.size() != u_free.size() || u.size() != masses.size()) {
    throw InvalidArgument("adhesion_potential: length mismatch");
  }
  std::vector<double> gamma(u.size());
  // Neumaier summation: block sums cancel to rounding level, so the error
  // carried past a block end stays at a few ulps of the block impulse.
  double acc = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double term = masses[i] * (u[i] - u_free[i]);
    const double sum = acc + term;
    carry += std::abs(acc) >= std::abs(term) ? (acc - sum) + term : (term - sum) + acc;
    acc = sum;
    gamma[i] = acc + carry;
  }
  return gamma;
}

struct VelocityField {
  std::vector<double> u;
  std::vector<double> gamma;
  BlockPartition blocks;
};

/// Velocity and adhesion potential carried by transport x under free
/// velocity u_free.
///
/// Incremental mode projects u_free onto the tangent cone at x: on each chain
/// of closed contacts the velocity is the isotonic fit of u_free, so a
/// compressed chain moves as one block while a chain pulled apart releases.
/// Accumulated mode averages u_free over every closed chain.
inline VelocityField admissible_velocity(const MonotoneMap& x, const MonotoneMap& xtil,
                                         std::span<const double> masses, std::span<const double> u_free,
                                         const StepperConfig& cfg) {
  const auto closed = closed_contacts(x, xtil, cfg.contact_tol);
  BlockPartition blocks;
  std::vector<double> u;
  if (cfg.projection == ProjectionMode::incremental) {
    IsotonicFit fit = project_tangent(u_free, masses, closed);
    blocks = fit.blocks();
    u = std::move(fit.values);
  } else {
    blocks = closed_chains(closed);
    u = block_velocity(u_free, blocks, masses);
  }
  auto gamma = adhesion_potential(u, u_free, masses);
  return VelocityField{std::move(u), std::move(gamma), std::move(blocks)};
}

/// Worst values of the Lagrangian invariants, already divided by their scale.
struct LagrangianReport {
  /// min_i (x_{i+1} - x_i) - (xtil_{i+1} - xtil_i), over the position scale.
  double feasibility_slack = 0.0;
  /// max |u_i - u_j| for i, j in a common block (exactly zero by construction).
  double block_velocity_spread = 0.0;
  /// max_i Gamma_i over the impulse scale.
  double gamma_max = 0.0;
  /// max |Gamma| at block right ends and at the last particle, over the scale.
  double gamma_block_end = 0.0;
  /// |sum m u - sum m u_free| over the scale.
  double momentum_defect = 0.0;
  /// u differs from u_free somewhere off the blocks.
  bool u_off_block_mismatch = false;
};

struct LagrangianTolerances {
  double feasibility = 1e-12;
  double gamma = 1e-10;
  double gamma_block_end = 1e-12;
  double momentum = 1e-12;
};

inline LagrangianReport check_lagrangian(const SimState& s, const MonotoneMap& xtil,
                                         std::span<const double> masses) {
  LagrangianReport r;
  const std::size_t n = s.x.size();
  const double pos_scale = position_scale(s.x.span());
  const double imp_scale = impulse_scale(s.u_free, masses);
  double slack = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    slack = std::min(slack, (s.x[i + 1] - s.x[i]) - (xtil[i + 1] - xtil[i]));
  }
  r.feasibility_slack = slack / pos_scale;

  std::vector<bool> on_block(n, false);
  double end_gamma = n > 0 ? std::abs(s.gamma[n - 1]) : 0.0;
  for (const auto& b : s.blocks.blocks()) {
    for (std::size_t j = b.lo; j <= b.hi; ++j) {
      r.block_velocity_spread = std::max(r.block_velocity_spread, std::abs(s.u[j] - s.u[b.lo]));
      on_block[j] = true;
    }
    end_gamma = std::max(end_gamma, std::abs(s.gamma[b.hi]));
  }
  double mom = 0.0, mom_free = 0.0, gmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!on_block[i] && s.u[i] != s.u_free[i]) r.u_off_block_mismatch = true;
    mom += masses[i] * s.u[i];
    mom_free += masses[i] * s.u_free[i];
    gmax = std::max(gmax, s.gamma[i]);
  }
  r.gamma_max = gmax / imp_scale;
  r.gamma_block_end = end_gamma / imp_scale;
  r.momentum_defect = std::abs(mom - mom_free) / imp_scale;
  return r;
}

/// Throws InvariantViolation naming the first failed check.
inline void enforce(const LagrangianReport& r, const LagrangianTolerances& tol, double t) {
  const std::string at = " at t=" + std::to_string(t);
  if (r.feasibility_slack < -tol.feasibility) {
    throw InvariantViolation("feasibility", "transport leaves K~" + at);
  }
  if (r.block_velocity_spread != 0.0) throw InvariantViolation("block_velocity", "u varies on a block" + at);
  if (r.u_off_block_mismatch) throw InvariantViolation("block_velocity", "u != u_free off the blocks" + at);
  if (r.gamma_max > tol.gamma) throw InvariantViolation("gamma_sign", "adhesion potential is positive" + at);
  if (r.gamma_block_end > tol.gamma_block_end) {
    throw InvariantViolation("gamma_support", "adhesion potential does not vanish at a block end" + at);
  }
  if (r.momentum_defect > tol.momentum) throw InvariantViolation("momentum", "momentum balance broken" + at);
}

inline LagrangianTolerances tolerances_for(const StepperConfig& cfg) {
  LagrangianTolerances t;
  t.gamma = cfg.tol_gamma;
  return t;
}

/// Initial state: X0 = id, U_free = u0, velocity projected onto the admissible
/// set of the initial configuration.
inline SimState init_state(const ParticleSystem& ps, std::span<const double> u0, const MonotoneMap& xtil,
                           const StepperConfig& cfg = {}) {
  if (u0.size() != ps.size()) throw InvalidArgument("init_state: u0 length mismatch");
  if (xtil.size() != ps.size()) throw InvalidArgument("init_state: xtil length mismatch");
  for (double v : u0) {
    if (!std::isfinite(v)) throw InvalidArgument("init_state: non-finite initial velocity");
  }
  SimState s;
  s.a_free = ps.positions();
  s.u_free.assign(u0.begin(), u0.end());
  s.x = project_admissible(ps.positions(), xtil, ps.masses()).x;
  auto vel = admissible_velocity(s.x, xtil, ps.masses(), s.u_free, cfg);
  s.u = std::move(vel.u);
  s.gamma = std::move(vel.gamma);
  s.blocks = std::move(vel.blocks);
  if (cfg.enforce_invariants) enforce(check_lagrangian(s, xtil, ps.masses()), tolerances_for(cfg), 0.0);
  return s;
}

/// One explicit step.  `force_weight`, when non-empty, scales the force on
/// each particle.
inline SimState step(const SimState& s, const ForceField& f, const StepperConfig& cfg, const MonotoneMap& xtil,
                     std::span<const double> masses, std::span<const double> force_weight = {}) {
  const std::size_t n = s.x.size();
  if (masses.size() != n || xtil.size() != n) throw InvalidArgument("step: length mismatch");
  if (!force_weight.empty() && force_weight.size() != n) throw InvalidArgument("step: force weight length");
  const double dt = cfg.dt;

  SimState next;
  next.step = s.step + 1;
  next.t = static_cast<double>(next.step) * dt;
  next.u_free.resize(n);
  next.a_free.resize(n);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = f.eval(s.t, s.x[i]);
    if (!force_weight.empty()) a *= force_weight[i];
    if (!std::isfinite(a)) {
      throw InvariantViolation("force", "non-finite force at particle " + std::to_string(i) +
                                            " x=" + std::to_string(s.x[i]) + " t=" + std::to_string(s.t));
    }
    next.u_free[i] = s.u_free[i] + dt * a;
    next.a_free[i] = s.a_free[i] + dt * next.u_free[i];
    z[i] = cfg.projection == ProjectionMode::incremental ? s.x[i] + dt * next.u_free[i] : next.a_free[i];
  }
  next.x = project_admissible(z, xtil, masses).x;
  auto vel = admissible_velocity(next.x, xtil, masses, next.u_free, cfg);
  next.u = std::move(vel.u);
  next.gamma = std::move(vel.gamma);
  next.blocks = std::move(vel.blocks);
  if (cfg.enforce_invariants) enforce(check_lagrangian(next, xtil, masses), tolerances_for(cfg), next.t);
  return next;
}

/// Marches from `initial` to cfg.t_end, calling `observer` on every state
/// including the initial one.
template <typename Observer>
SimState march(SimState initial, const ForceField& f, const StepperConfig& cfg, const MonotoneMap& xtil,
               std::span<const double> masses, Observer&& observer, std::span<const double> force_weight = {}) {
  cfg.validate();
  const std::size_t steps = cfg.num_steps();
  observer(static_cast<const SimState&>(initial));
  SimState s = std::move(initial);
  for (std::size_t k = 0; k < steps; ++k) {
    s = step(s, f, cfg, xtil, masses, force_weight);
    observer(static_cast<const SimState&>(s));
  }
  return s;
}

}  // namespace granular
