#pragma once

// Brute-force reference for project_admissible, for verification only.
//
// Enumerates every subset A of the N-1 gap constraints, solves the equality
// constrained problem "constraints in A active" in closed form, and keeps the
// feasible candidate of least objective.  The true minimizer is the equality
// constrained minimizer on its own active set, so the search is exact.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "granular/error.hpp"
#include "granular/particles.hpp"

namespace granular {

inline constexpr std::size_t kOracleMaxSize = 12;

inline std::vector<double> oracle_qp_projection(std::span<const double> z, const MonotoneMap& xtil,
                                                std::span<const double> w) {
  const std::size_t n = z.size();
  if (n > kOracleMaxSize) throw InvalidArgument("oracle limit");
  if (xtil.size() != n || w.size() != n) throw InvalidArgument("oracle_qp_projection: length mismatch");
  if (n == 0) return {};

  std::vector<double> gap(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) gap[i] = xtil[i + 1] - xtil[i];

  double scale = 1.0;
  for (double v : z) scale = std::max(scale, std::abs(v));
  const double feas_tol = 1e-12 * scale;

  std::vector<double> best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<double> x(n), offset(n);
  const std::uint64_t subsets = std::uint64_t{1} << (n - 1);
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    // Chains are maximal runs joined by active constraints; on a chain
    // x_j = c + offset_j and c is the weighted mean of z_j - offset_j.
    std::size_t start = 0;
    while (start < n) {
      std::size_t end = start;
      offset[start] = 0.0;
      while (end + 1 < n && (mask >> end) & 1U) {
        offset[end + 1] = offset[end] + gap[end];
        ++end;
      }
      double num = 0.0, den = 0.0;
      for (std::size_t j = start; j <= end; ++j) {
        num += w[j] * (z[j] - offset[j]);
        den += w[j];
      }
      const double c = num / den;
      for (std::size_t j = start; j <= end; ++j) x[j] = c + offset[j];
      start = end + 1;
    }
    bool feasible = true;
    for (std::size_t i = 0; i + 1 < n && feasible; ++i) {
      feasible = x[i + 1] - x[i] >= gap[i] - feas_tol;
    }
    if (!feasible) continue;
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) obj += w[j] * (z[j] - x[j]) * (z[j] - x[j]);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

}  // namespace granular
