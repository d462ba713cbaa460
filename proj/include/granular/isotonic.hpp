#pragma once

// Weighted isotonic regression by pool-adjacent-violators.
//
// For data z and positive weights w the fit minimizes sum_i w_i (z_i - x_i)^2
// over nondecreasing x.  The fit is constant on consecutive pools, and the
// value of each pool is the weighted mean of z over it.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "granular/error.hpp"
#include "granular/particles.hpp"

namespace granular {

struct IsotonicFit {
  std::vector<double> values;
  /// Consecutive pools covering the whole index set.
  std::vector<IndexRange> pools;

  /// The pools holding more than one index.
  BlockPartition blocks() const { return BlockPartition::from_pools(pools); }
};

/// Whether equal neighbouring values are merged into one pool.  Pooling ties
/// does not change the fitted values, only the reported pool structure.
enum class TiePolicy { keep_separate, pool };

namespace detail {

inline void check_weighted_data(std::span<const double> z, std::span<const double> w,
                                const char* who) {
  if (z.size() != w.size()) throw InvalidArgument(std::string(who) + ": length mismatch");
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw InvalidArgument(std::string(who) + ": non-finite data");
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw InvalidArgument(std::string(who) + ": weights must be positive");
    }
  }
}

// `closed`, when non-empty, has one entry per contact i|i+1; pools never grow
// across a contact whose entry is false.
inline IsotonicFit pool_adjacent_violators(std::span<const double> z, std::span<const double> w,
                                           TiePolicy ties, const std::vector<bool>& closed) {
  struct Pool {
    std::size_t lo, hi;
    double weight;
    double value;
  };
  std::vector<Pool> stack;
  stack.reserve(z.size());
  auto violates = [&](const Pool& left, const Pool& right) {
    if (!closed.empty() && !closed[left.hi]) return false;
    return ties == TiePolicy::pool ? left.value >= right.value : left.value > right.value;
  };
  for (std::size_t i = 0; i < z.size(); ++i) {
    stack.push_back(Pool{i, i, w[i], z[i]});
    while (stack.size() >= 2 && violates(stack[stack.size() - 2], stack.back())) {
      const Pool right = stack.back();
      stack.pop_back();
      Pool& left = stack.back();
      const double weight = left.weight + right.weight;
      // Written as an update so that merging equal values is exact.
      left.value += (right.weight / weight) * (right.value - left.value);
      left.weight = weight;
      left.hi = right.hi;
    }
  }
  IsotonicFit fit;
  fit.values.resize(z.size());
  fit.pools.reserve(stack.size());
  for (const auto& p : stack) {
    for (std::size_t i = p.lo; i <= p.hi; ++i) fit.values[i] = p.value;
    fit.pools.push_back(IndexRange{p.lo, p.hi});
  }
  return fit;
}

}  // namespace detail

/// Weighted L2 projection of z onto the cone of nondecreasing vectors.
inline IsotonicFit project_monotone(std::span<const double> z, std::span<const double> w) {
  detail::check_weighted_data(z, w, "project_monotone");
  return detail::pool_adjacent_violators(z, w, TiePolicy::keep_separate, {});
}

/// Weighted L2 projection of v onto the tangent cone of K at a configuration
/// whose closed contacts are flagged in `closed` (size N-1): the result must
/// be nondecreasing across closed contacts and is free across open ones.
/// Ties are pooled so every pool is a maximal run of equal values.
inline IsotonicFit project_tangent(std::span<const double> v, std::span<const double> w,
                                   const std::vector<bool>& closed) {
  detail::check_weighted_data(v, w, "project_tangent");
  if (!v.empty() && closed.size() + 1 != v.size()) {
    throw InvalidArgument("project_tangent: need one contact flag per neighbouring pair");
  }
  if (v.size() == 1) return detail::pool_adjacent_violators(v, w, TiePolicy::pool, {});
  return detail::pool_adjacent_violators(v, w, TiePolicy::pool, closed);
}

}  // namespace granular
