#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "granular/granular.hpp"

namespace granular::testkit {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

/// Strictly increasing values with the given random gaps.
inline std::vector<double> random_increasing(std::mt19937_64& rng, std::size_t n, double gap_lo, double gap_hi) {
  std::uniform_real_distribution<double> d(gap_lo, gap_hi);
  std::vector<double> v(n);
  double x = d(rng) - 0.5 * n * gap_hi;
  for (auto& e : v) {
    e = x;
    x += d(rng);
  }
  return v;
}

inline double wnorm(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// A two-block run recorded at selected steps.
struct TwoBlockRun {
  TwoBlockParams params;
  ParticleSystem ps;
  MonotoneMap xtil;
  StepperConfig cfg;
  ContactHistory history;
  double max_x_error = 0.0;
  double max_gamma_error = 0.0;
  double max_gamma_exact = 0.0;
};

inline TwoBlockRun run_two_block(std::size_t n, double dt, double t_end, const std::vector<double>& output_times,
                                 ProjectionMode mode = ProjectionMode::incremental) {
  TwoBlockParams p;
  ParticleSystem ps = build_particles(two_block_density(p), n);
  MonotoneMap xtil = congested_transport(ps);
  StepperConfig cfg;
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.projection = mode;
  cfg.enforce_invariants = mode == ProjectionMode::incremental;
  TwoBlockRun r{p, ps, xtil, cfg, ContactHistory(ps, cfg.tol_gamma)};
  std::vector<double> u0(ps.size(), 0.0);
  march(init_state(ps, u0, xtil, cfg), two_block_force(p), cfg, xtil, ps.masses(), [&](const SimState& s) {
    r.history.observe(s, r.ps.masses());
    for (double t : output_times) {
      if (s.step != static_cast<std::size_t>(std::llround(t / dt))) continue;
      const auto e = two_block_exact(p, r.ps, s.t, r.history.contact_time().has_value());
      const auto err = error_norms(s, e, r.ps.masses());
      r.max_x_error = std::max(r.max_x_error, err.x_l2);
      r.max_gamma_error = std::max(r.max_gamma_error, err.gamma_sup);
      for (double g : e.gamma_ex) r.max_gamma_exact = std::max(r.max_gamma_exact, std::abs(g));
    }
  });
  return r;
}

}  // namespace granular::testkit
