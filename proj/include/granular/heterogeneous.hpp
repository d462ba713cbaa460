#pragma once

// Dynamics under a maximal density rho* that is transported by the flow.
//
// The problem is posed in the ratio r = rho / rho*, which is congested at
// r = 1.  Particles discretize r0(x) dx, each particle keeps the value of
// rho*0 it started with, and the physical density is r rho*.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/particles.hpp"

namespace granular {

struct RatioSystem {
  ParticleSystem base;
  std::vector<double> rho_star0_at_particles;
  MonotoneMap xtil;
};

inline RatioSystem ratio_system_from_particles(ParticleSystem base, std::vector<double> rho_star) {
  if (rho_star.size() != base.size()) throw InvalidArgument("ratio system: rho_star length mismatch");
  for (double v : rho_star) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("ratio system: rho_star must be positive");
  }
  MonotoneMap xtil = congested_transport(base);
  return RatioSystem{std::move(base), std::move(rho_star), std::move(xtil)};
}

/// Particles on r0 = rho0 / rho_star0.  `rho_star0` must be positive on the
/// support of rho0 and at least rho0 there.
inline RatioSystem build_ratio_system(const PiecewiseDensity& rho0, const std::function<double(double)>& rho_star0,
                                      std::size_t n) {
  constexpr int kSamples = 1024;
  PiecewiseDensity r0;
  for (const auto& p : rho0.pieces()) {
    bool cap_constant = true;
    const double cap_lo = rho_star0(p.lo);
    for (int k = 0; k <= kSamples; ++k) {
      const double x = p.lo + (p.hi - p.lo) * k / kSamples;
      const double cap = rho_star0(x);
      cap_constant = cap_constant && cap == cap_lo;
      const double rho = p.value(x);
      if (!(cap > 0.0) || !std::isfinite(cap)) {
        throw InvalidArgument("heterogeneous: rho_star0 must be positive on the support of rho0");
      }
      if (rho > cap * (1.0 + 1e-12)) {
        throw InvalidArgument("constraint violation: rho0 > rho_star0 at x=" + std::to_string(x));
      }
    }
    // Constant over constant stays a constant piece, so that rho_star0 = 1
    // reproduces the plain particle placement exactly.
    if (p.constant && cap_constant) {
      r0.add_constant(p.lo, p.hi, *p.constant / cap_lo);
    } else {
      r0.add(p.lo, p.hi, [value = p.value, &rho_star0](double x) { return value(x) / rho_star0(x); });
    }
  }
  ParticleSystem base = build_particles(r0, n);
  std::vector<double> rho_star(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) rho_star[i] = rho_star0(base.positions()[i]);
  return ratio_system_from_particles(std::move(base), std::move(rho_star));
}

struct HeteroOptions {
  /// Scale each particle's acceleration by its rho*, the literal weighting of
  /// the momentum source rho f in ratio coordinates.
  bool weight_force_by_rho_star = false;
};

inline SimState init_heterogeneous(const RatioSystem& rs, std::span<const double> u0, const StepperConfig& cfg) {
  return init_state(rs.base, u0, rs.xtil, cfg);
}

/// Marches the ratio system; `observer` sees every state.  rho* needs no
/// update: it is rs.rho_star0_at_particles at all times.
template <typename Observer>
SimState run_heterogeneous(const RatioSystem& rs, std::span<const double> u0, const ForceField& f,
                           const StepperConfig& cfg, Observer&& observer, const HeteroOptions& opt = {}) {
  std::span<const double> weight;
  if (opt.weight_force_by_rho_star) weight = rs.rho_star0_at_particles;
  return march(init_heterogeneous(rs, u0, cfg), f, cfg, rs.xtil, rs.base.masses(), std::forward<Observer>(observer),
               weight);
}

/// rho*0(x) = 1 + 0.2 (1 - cos 2 pi (x - 0.5)).
inline double hetero_scenario_rho_star(double x) {
  return 1.0 + 0.2 * (1.0 - std::cos(2.0 * std::numbers::pi * (x - 0.5)));
}

/// rho0 = 0.8 rho*0 on [0, 1].
inline PiecewiseDensity hetero_scenario_density() {
  PiecewiseDensity d;
  d.add(0.0, 1.0, [](double x) { return 0.8 * hetero_scenario_rho_star(x); });
  return d;
}

/// +0.5 left of x = 0.5 and -0.5 from there on.
inline ForceField hetero_scenario_force() {
  return ForceField{[](double, double x) { return x < 0.5 ? 0.5 : -0.5; }, 0.0, 0.5};
}

}  // namespace granular
