#pragma once

// Global fixed point iteration for the coupled trajectory problem
//
//   X_t = P_K~( X0 + t U0 + int_0^t int_0^tau f(s, X_s) ds dtau ),
//
// on the time grid t_h = h dt, with the double integral discretized exactly
// like the accumulated marching scheme.  Convergence is measured in the norm
// max_h exp(-2 sqrt(k) t_h) ||X_h||_w, in which the map is a 1/4-contraction
// when k bounds the Lipschitz constant of f.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/particles.hpp"
#include "granular/projection.hpp"

namespace granular {

struct PicardResult {
  std::vector<SimState> trajectory;
  std::size_t iterations = 0;
  /// residuals[n] = ||X^(n+1) - X^(n)|| in the weighted sup-in-time norm.
  std::vector<double> residuals;

  /// residuals[n+1] / residuals[n], skipping sweeps whose predecessor is zero.
  std::vector<double> ratios() const {
    std::vector<double> r;
    for (std::size_t n = 1; n < residuals.size(); ++n) {
      if (residuals[n - 1] > 0.0) r.push_back(residuals[n] / residuals[n - 1]);
    }
    return r;
  }
};

inline double picard_weight(double lipschitz_k, double t) { return std::exp(-2.0 * std::sqrt(lipschitz_k) * t); }

inline PicardResult picard_solve(const ParticleSystem& ps, std::span<const double> u0, const ForceField& f,
                                 const StepperConfig& cfg, const MonotoneMap& xtil) {
  cfg.validate();
  if (!cfg.picard) throw InvalidArgument("picard_solve: picard options not set");
  if (!(f.lipschitz_k >= 0.0) || !std::isfinite(f.lipschitz_k)) {
    throw InvalidArgument("picard_solve: force needs a finite Lipschitz constant");
  }
  const std::size_t n = ps.size();
  if (u0.size() != n || xtil.size() != n) throw InvalidArgument("picard_solve: length mismatch");
  const auto& m = ps.masses();
  const std::size_t steps = cfg.num_steps();
  const double dt = cfg.dt;

  // Start from the force-free motion, so that f == 0 is solved by one sweep.
  std::vector<std::vector<double>> x(steps + 1, std::vector<double>(n));
  {
    std::vector<double> z(n);
    for (std::size_t h = 0; h <= steps; ++h) {
      const double t = static_cast<double>(h) * dt;
      for (std::size_t i = 0; i < n; ++i) z[i] = ps.positions()[i] + t * u0[i];
      x[h] = project_admissible(z, xtil, m).x.values();
    }
  }

  PicardResult result;
  std::vector<std::vector<double>> u_free(steps + 1, std::vector<double>(n));
  std::vector<std::vector<double>> a_free(steps + 1, std::vector<double>(n));
  std::vector<std::vector<double>> next(steps + 1);
  for (std::size_t iter = 1; iter <= cfg.picard->max_iters; ++iter) {
    u_free[0].assign(u0.begin(), u0.end());
    a_free[0] = ps.positions();
    next[0] = project_admissible(a_free[0], xtil, m).x.values();
    for (std::size_t h = 1; h <= steps; ++h) {
      const double t_prev = static_cast<double>(h - 1) * dt;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = f.eval(t_prev, x[h - 1][i]);
        if (!std::isfinite(a)) throw InvariantViolation("force", "non-finite force in picard sweep");
        u_free[h][i] = u_free[h - 1][i] + dt * a;
        a_free[h][i] = a_free[h - 1][i] + dt * u_free[h][i];
      }
      next[h] = project_admissible(a_free[h], xtil, m).x.values();
    }
    double residual = 0.0;
    for (std::size_t h = 0; h <= steps; ++h) {
      const double t = static_cast<double>(h) * dt;
      residual = std::max(residual, picard_weight(f.lipschitz_k, t) * weighted_distance(next[h], x[h], m));
    }
    result.residuals.push_back(residual);
    x.swap(next);
    if (residual < cfg.picard->tol) {
      result.iterations = iter;
      break;
    }
    if (iter == cfg.picard->max_iters) {
      throw ConvergenceError("picard_solve: no convergence after " + std::to_string(iter) + " sweeps", residual);
    }
  }

  StepperConfig derived = cfg;
  derived.projection = ProjectionMode::accumulated;
  result.trajectory.reserve(steps + 1);
  for (std::size_t h = 0; h <= steps; ++h) {
    SimState s;
    s.step = h;
    s.t = static_cast<double>(h) * dt;
    s.a_free = a_free[h];
    s.u_free = u_free[h];
    s.x = MonotoneMap(x[h]);
    auto vel = admissible_velocity(s.x, xtil, m, s.u_free, derived);
    s.u = std::move(vel.u);
    s.gamma = std::move(vel.gamma);
    s.blocks = std::move(vel.blocks);
    result.trajectory.push_back(std::move(s));
  }
  return result;
}

}  // namespace granular
