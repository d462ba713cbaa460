#pragma once

// Eulerian fields recovered from a Lagrangian state.
//
// Samples sit at the contact midpoints x_{i+1/2} = (x_i + x_{i+1}) / 2.  The
// density there is the gap ratio (Xtil_{i+1} - Xtil_i) / (x_{i+1} - x_i), and
// the adhesion potential is Gamma_i, which the solver already stores at the
// contact i|i+1.  Half a particle mass at each end of the chain is not covered
// by any cell; it is reported as `boundary_mass`.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/particles.hpp"

namespace granular {

struct EulerianSample {
  double x = 0.0;
  /// Physical density: ratio, times rho_star when the run is heterogeneous.
  double rho = 0.0;
  double u = 0.0;
  double gamma = 0.0;
  std::optional<double> rho_star;
  /// Gap ratio r in [0, 1].
  double ratio = 0.0;
  double width = 0.0;
  /// Nearly empty cell (ratio below the vacuum threshold).  The velocity is
  /// not defined off the support; u is still the neighbour mean.
  bool vacuum = false;
};

struct EulerianField {
  double t = 0.0;
  std::vector<EulerianSample> samples;
  double boundary_mass = 0.0;

  /// Sum of ratio * width over the cells plus the boundary mass.
  double mass() const {
    double s = boundary_mass;
    for (const auto& c : samples) s += c.ratio * c.width;
    return s;
  }
};

struct ReconstructOptions {
  double clamp_tol = 1e-9;
  double vacuum_ratio = 1e-2;
};

inline EulerianField reconstruct(const SimState& s, const ParticleSystem& ps, const MonotoneMap& xtil,
                                 std::span<const double> rho_star = {}, const ReconstructOptions& opt = {}) {
  const std::size_t n = s.x.size();
  if (ps.size() != n || xtil.size() != n || s.u.size() != n || s.gamma.size() != n) {
    throw InvalidArgument("reconstruct: length mismatch");
  }
  if (!rho_star.empty() && rho_star.size() != n) throw InvalidArgument("reconstruct: rho_star length mismatch");
  const auto& m = ps.masses();
  EulerianField field;
  field.t = s.t;
  field.boundary_mass = n == 1 ? m[0] : 0.5 * (m[0] + m[n - 1]);
  if (n < 2) return field;
  field.samples.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double gap = s.x[i + 1] - s.x[i];
    const double gap_til = xtil[i + 1] - xtil[i];
    double ratio = gap > 0.0 ? gap_til / gap : HUGE_VAL;
    if (ratio > 1.0 + opt.clamp_tol) {
      throw InvariantViolation("invalid transport", "particles " + std::to_string(i) + " and " +
                                                         std::to_string(i + 1) + " overlap at t=" +
                                                         std::to_string(s.t));
    }
    ratio = std::min(ratio, 1.0);
    EulerianSample c;
    c.x = 0.5 * (s.x[i] + s.x[i + 1]);
    c.width = gap;
    c.ratio = ratio;
    c.u = s.u[i] == s.u[i + 1] ? s.u[i] : (m[i] * s.u[i] + m[i + 1] * s.u[i + 1]) / (m[i] + m[i + 1]);
    c.gamma = s.gamma[i];
    c.rho = ratio;
    if (!rho_star.empty()) {
      c.rho_star = 0.5 * (rho_star[i] + rho_star[i + 1]);
      c.rho = ratio * *c.rho_star;
    }
    c.vacuum = ratio < opt.vacuum_ratio;
    field.samples.push_back(c);
  }
  return field;
}

struct ExclusionReport {
  double max_residual = 0.0;
  std::vector<std::size_t> offending;
};

/// Residual of the exclusion relation (1 - rho) gamma = 0, or
/// (rho_star - rho) gamma = 0 when the field carries rho_star.
inline ExclusionReport check_exclusion(const EulerianField& field, double tol) {
  ExclusionReport r;
  for (std::size_t k = 0; k < field.samples.size(); ++k) {
    const auto& c = field.samples[k];
    const double cap = c.rho_star ? *c.rho_star : 1.0;
    const double res = std::abs((cap - c.rho) * c.gamma);
    r.max_residual = std::max(r.max_residual, res);
    if (res > tol) r.offending.push_back(k);
  }
  return r;
}

/// Worst violations of the pointwise field bounds.
struct FieldReport {
  /// max(rho - cap) over samples, cap = 1 or rho_star.
  double rho_excess = 0.0;
  double rho_min = 0.0;
  double gamma_max = 0.0;
};

inline FieldReport check_field(const EulerianField& field) {
  FieldReport r;
  bool first = true;
  for (const auto& c : field.samples) {
    const double cap = c.rho_star ? *c.rho_star : 1.0;
    r.rho_excess = std::max(r.rho_excess, c.rho - cap);
    r.rho_min = first ? c.rho : std::min(r.rho_min, c.rho);
    r.gamma_max = std::max(r.gamma_max, c.gamma);
    first = false;
  }
  return r;
}

/// Quadrature of a test function against the reconstructed density.
template <typename Fn>
double integrate_density(const EulerianField& field, const SimState& s, std::span<const double> masses, Fn&& xi) {
  double total = 0.0;
  for (const auto& c : field.samples) total += xi(c.x) * c.ratio * c.width;
  const std::size_t n = s.x.size();
  if (n == 1) return total + masses[0] * xi(s.x[0]);
  return total + 0.5 * masses[0] * xi(s.x[0]) + 0.5 * masses[n - 1] * xi(s.x[n - 1]);
}

/// W2 distance between the push-forwards of the same reference measure.
inline double wasserstein2(std::span<const double> x1, std::span<const double> x2, std::span<const double> masses) {
  if (x1.size() != x2.size() || x1.size() != masses.size()) throw InvalidArgument("wasserstein2: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) s += masses[i] * (x1[i] - x2[i]) * (x1[i] - x2[i]);
  return std::sqrt(s);
}

inline double wasserstein2(const MonotoneMap& x1, const MonotoneMap& x2, std::span<const double> masses) {
  return wasserstein2(x1.span(), x2.span(), masses);
}

}  // namespace granular
