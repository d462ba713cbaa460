#pragma once

// Two congested blocks pushed together, held, then pulled apart.
//
// Blocks 1_[a1,b1] and 1_[a2,b2] start at rest.  The force is +alpha on x < 0
// and -alpha on x >= 0 up to t*, reversed afterwards.  The exact solution has
// four phases:
//   t <= t1 = sqrt((a2-b1)/alpha)  free flight toward each other;
//   t1 < t <= t*                   stuck at rest, adhesion potential growing;
//   t* < t <= t2 = 2 t*            still stuck, adhesion relaxing to zero;
//   t > t2                         free flight apart.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/particles.hpp"
#include "granular/projection.hpp"

namespace granular {

struct TwoBlockParams {
  // Unit-width blocks with gap 0.2048 so that alpha = 0.5 gives t1 = 0.64.
  double a1 = -1.1024;
  double b1 = -0.1024;
  double a2 = 0.1024;
  double b2 = 1.1024;
  double alpha = 0.5;
  double t_star = 1.0;

  double width() const { return b1 - a1; }
  double t1() const { return std::sqrt((a2 - b1) / alpha); }
  double t2() const { return 2.0 * t_star; }

  void validate() const {
    const double scale = std::max({1.0, std::abs(a1), std::abs(b2)});
    const double tol = 1e-12 * scale;
    if (!(b1 > a1) || std::abs((b1 - a1) - (b2 - a2)) > tol) {
      throw InvalidArgument("two-block: blocks need equal positive widths");
    }
    if (!(a2 > b1)) throw InvalidArgument("two-block: blocks must be separated (a2 > b1)");
    if (std::abs(a1 + b2) > tol || std::abs(b1 + a2) > tol) {
      throw InvalidArgument("two-block: blocks must be symmetric about 0");
    }
    if (!(alpha > 0.0) || !(t_star > 0.0)) throw InvalidArgument("two-block: alpha and t* must be positive");
    if (!(t1() < t_star)) throw InvalidArgument("two-block: blocks must collide before t* (t1 < t*)");
  }
};

inline PiecewiseDensity two_block_density(const TwoBlockParams& p) {
  p.validate();
  PiecewiseDensity d;
  d.add_constant(p.a1, p.b1, 1.0).add_constant(p.a2, p.b2, 1.0);
  return d;
}

/// Piecewise constant in x, so its Lipschitz constant is zero away from x = 0.
inline ForceField two_block_force(const TwoBlockParams& p) {
  const double alpha = p.alpha, t_star = p.t_star;
  return ForceField{[alpha, t_star](double t, double x) {
                      const double inward = x < 0.0 ? alpha : -alpha;
                      return t <= t_star ? inward : -inward;
                    },
                    0.0, alpha};
}

struct ExactSnapshot {
  std::vector<double> x_ex;
  std::vector<double> u_ex;
  /// Evaluated at the right cell edge of each particle, like the solver's
  /// adhesion potential.
  std::vector<double> gamma_ex;
};

/// Exact solution at time t on the particles of `ps`.
///
/// Gamma jumps at the collision time t1 (the inelastic impulse).  When
/// `in_contact` is set and t <= t1 the post-collision branch is used, which
/// is the branch a discrete run that already reports contact should match.
inline ExactSnapshot two_block_exact(const TwoBlockParams& p, const ParticleSystem& ps, double t,
                                     bool in_contact = false) {
  p.validate();
  if (!(t >= 0.0)) throw InvalidArgument("two_block_exact: t must be >= 0");
  const double alpha = p.alpha, t1 = p.t1(), t_star = p.t_star, t2 = p.t2();
  const std::size_t n = ps.size();
  ExactSnapshot e;
  e.x_ex.resize(n);
  e.u_ex.resize(n);
  e.gamma_ex.resize(n);

  // Adhesion potential while stuck and pushed with free speed alpha*s.
  auto stuck_gamma = [&](double x1, double mass, bool left, double s) {
    const double edge = x1 + 0.5 * mass;
    return left ? -alpha * (edge + (p.b1 - p.a1)) * s : alpha * (edge - (p.b2 - p.a2)) * s;
  };

  const bool stuck_at_t = t > t1 || (in_contact && t > 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = ps.positions()[i];
    const bool left = x0 < 0.0;
    const double inward = left ? 1.0 : -1.0;
    const double x1 = x0 + inward * alpha * t1 * t1 / 2.0;
    const double m = ps.masses()[i];
    if (!stuck_at_t) {
      e.x_ex[i] = x0 + inward * alpha * t * t / 2.0;
      e.u_ex[i] = inward * alpha * t;
      e.gamma_ex[i] = 0.0;
    } else if (t <= t_star) {
      e.x_ex[i] = x1;
      e.u_ex[i] = 0.0;
      e.gamma_ex[i] = stuck_gamma(x1, m, left, t);
    } else if (t <= t2) {
      e.x_ex[i] = x1;
      e.u_ex[i] = 0.0;
      e.gamma_ex[i] = stuck_gamma(x1, m, left, t_star) * (t2 - t) / (t2 - t_star);
    } else {
      e.x_ex[i] = x1 - inward * alpha * (t - t2) * (t - t2) / 2.0;
      e.u_ex[i] = -inward * alpha * (t - t2);
      e.gamma_ex[i] = 0.0;
    }
  }
  return e;
}

struct ErrorReport {
  double x_l2 = 0.0;
  double u_l2 = 0.0;
  double gamma_sup = 0.0;
};

inline ErrorReport error_norms(const SimState& sim, const ExactSnapshot& exact, std::span<const double> masses) {
  const std::size_t n = sim.x.size();
  if (exact.x_ex.size() != n || exact.u_ex.size() != n || exact.gamma_ex.size() != n || masses.size() != n) {
    throw InvalidArgument("error_norms: index sets differ");
  }
  ErrorReport r;
  r.x_l2 = weighted_distance(sim.x.span(), exact.x_ex, masses);
  r.u_l2 = weighted_distance(sim.u, exact.u_ex, masses);
  for (std::size_t i = 0; i < n; ++i) r.gamma_sup = std::max(r.gamma_sup, std::abs(sim.gamma[i] - exact.gamma_ex[i]));
  return r;
}

/// Follows a two-block run and records when the blocks stick and release.
///
/// The blocks count as stuck when one block spans the interface between the
/// two families of particles and the adhesion potential at that contact is
/// below -tol_gamma * scale; the release is the first later state where this
/// no longer holds.
class ContactHistory {
 public:
  ContactHistory(const ParticleSystem& ps, double tol_gamma) : tol_gamma_(tol_gamma) {
    const auto& x = ps.positions();
    interface_ = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), 0.0) - x.begin());
    if (interface_ == 0 || interface_ >= x.size()) throw InvalidArgument("contact history: need two blocks");
  }

  bool stuck(const SimState& s, std::span<const double> masses) const {
    const auto block = s.blocks.block_of(interface_ - 1);
    if (!block || !block->contains(interface_)) return false;
    const double scale = impulse_scale(s.u_free, masses);
    return s.gamma[interface_ - 1] < -tol_gamma_ * scale;
  }

  void observe(const SimState& s, std::span<const double> masses) {
    const bool now = stuck(s, masses);
    if (now && !was_stuck_ && !contact_) {
      contact_ = s.t;
      contact_prev_ = prev_t_;
    }
    if (now) last_stuck_ = s.t;
    if (!now && was_stuck_ && !separation_) separation_ = s.t;
    was_stuck_ = now;
    prev_t_ = s.t;
  }

  /// First state at which the blocks are stuck.
  std::optional<double> contact_time() const { return contact_; }
  /// State before the first stuck one; contact happened in (prev, contact].
  std::optional<double> contact_lower() const { return contact_prev_; }
  std::optional<double> last_stuck_time() const { return last_stuck_; }
  /// First state after contact at which the blocks are released.
  std::optional<double> separation_time() const { return separation_; }
  std::size_t interface_index() const { return interface_; }

 private:
  double tol_gamma_;
  std::size_t interface_ = 0;
  bool was_stuck_ = false;
  double prev_t_ = 0.0;
  std::optional<double> contact_;
  std::optional<double> contact_prev_;
  std::optional<double> last_stuck_;
  std::optional<double> separation_;
};

}  // namespace granular
