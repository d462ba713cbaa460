#pragma once

// Projection onto the admissible set K~ = K + Xtil: maps X whose increments
// dominate those of the congested rearrangement Xtil, i.e. whose push-forward
// density stays below one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "granular/error.hpp"
#include "granular/isotonic.hpp"
#include "granular/particles.hpp"

namespace granular {

struct AdmissibleProjection {
  MonotoneMap x;
  /// Pools of length >= 2 of the inner isotonic problem on S = X - Xtil.
  BlockPartition blocks;
};

/// Weighted L2 projection of z onto K~.  Equivalent to minimizing
/// sum_i w_i (z_i - x_i)^2 subject to x_{i+1} - x_i >= xtil_{i+1} - xtil_i.
inline AdmissibleProjection project_admissible(std::span<const double> z, const MonotoneMap& xtil,
                                               std::span<const double> w) {
  if (z.size() != xtil.size()) throw InvalidArgument("project_admissible: length mismatch");
  detail::check_weighted_data(z, w, "project_admissible");
  std::vector<double> shifted(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) shifted[i] = z[i] - xtil[i];
  IsotonicFit fit = detail::pool_adjacent_violators(shifted, w, TiePolicy::keep_separate, {});
  for (const auto& pool : fit.pools) {
    for (std::size_t i = pool.lo; i <= pool.hi; ++i) {
      // A singleton pool is the point itself; skip the round trip through Xtil.
      fit.values[i] = pool.lo == pool.hi ? z[i] : fit.values[i] + xtil[i];
    }
  }
  // That can leave a singleton one ulp above a tied neighbouring pool.
  for (std::size_t i = 1; i < z.size(); ++i) fit.values[i] = std::max(fit.values[i], fit.values[i - 1]);
  return AdmissibleProjection{MonotoneMap(std::move(fit.values)), fit.blocks()};
}

/// Weighted L2 norm sqrt(sum_i w_i v_i^2).
inline double weighted_norm(std::span<const double> v, std::span<const double> w) {
  if (v.size() != w.size()) throw InvalidArgument("weighted_norm: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i] * v[i];
  return std::sqrt(s);
}

inline double weighted_distance(std::span<const double> a, std::span<const double> b,
                                std::span<const double> w) {
  if (a.size() != b.size() || a.size() != w.size()) {
    throw InvalidArgument("weighted_distance: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace granular
