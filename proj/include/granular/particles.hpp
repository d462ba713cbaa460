#pragma once

// Particle discretization of one-dimensional mass distributions and the
// monotone maps that live on the particle index set.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "granular/error.hpp"

namespace granular {

/// Inclusive range of particle indices.
struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const noexcept { return hi - lo + 1; }
  bool contains(std::size_t i) const noexcept { return lo <= i && i <= hi; }

  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Maximal congested intervals, as sorted, disjoint index ranges of length at
/// least two.
class BlockPartition {
 public:
  BlockPartition() = default;

  explicit BlockPartition(std::vector<IndexRange> blocks) : blocks_(std::move(blocks)) {
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      if (blocks_[k].hi <= blocks_[k].lo) {
        throw InvalidArgument("block partition: a block needs at least two particles");
      }
      if (k > 0 && blocks_[k].lo <= blocks_[k - 1].hi) {
        throw InvalidArgument("block partition: blocks must be sorted and disjoint");
      }
    }
  }

  /// Keeps the ranges of `pools` (a cover of the index set) that hold more
  /// than one index.
  static BlockPartition from_pools(std::span<const IndexRange> pools) {
    std::vector<IndexRange> blocks;
    for (const auto& p : pools) {
      if (p.hi > p.lo) blocks.push_back(p);
    }
    return BlockPartition(std::move(blocks));
  }

  const std::vector<IndexRange>& blocks() const noexcept { return blocks_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }

  /// Block holding particle i, if any.
  std::optional<IndexRange> block_of(std::size_t i) const {
    auto it = std::upper_bound(blocks_.begin(), blocks_.end(), i,
                               [](std::size_t v, const IndexRange& r) { return v < r.lo; });
    if (it == blocks_.begin()) return std::nullopt;
    --it;
    if (it->contains(i)) return *it;
    return std::nullopt;
  }

  friend bool operator==(const BlockPartition&, const BlockPartition&) = default;

 private:
  std::vector<IndexRange> blocks_;
};

/// Nondecreasing values over the particle index set (a member of the cone K).
class MonotoneMap {
 public:
  MonotoneMap() = default;

  explicit MonotoneMap(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw InvalidArgument("monotone map: non-finite value");
      if (i > 0 && values_[i] < values_[i - 1]) {
        throw InvalidArgument("monotone map: values decrease at index " + std::to_string(i));
      }
    }
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const MonotoneMap&, const MonotoneMap&) = default;

 private:
  std::vector<double> values_;
};

/// Sorted particle positions carrying positive masses.
class ParticleSystem {
 public:
  ParticleSystem(std::vector<double> positions, std::vector<double> masses)
      : positions_(std::move(positions)), masses_(std::move(masses)) {
    if (positions_.empty()) throw InvalidArgument("particle system: need at least one particle");
    if (positions_.size() != masses_.size()) {
      throw InvalidArgument("particle system: positions and masses differ in length");
    }
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      if (!std::isfinite(positions_[i])) throw InvalidArgument("particle system: non-finite position");
      if (!(masses_[i] > 0.0) || !std::isfinite(masses_[i])) {
        throw InvalidArgument("particle system: masses must be positive and finite");
      }
      if (i > 0 && positions_[i] < positions_[i - 1]) {
        throw InvalidArgument("particle system: positions must be sorted");
      }
    }
    total_mass_ = std::accumulate(masses_.begin(), masses_.end(), 0.0);
  }

  std::size_t size() const noexcept { return positions_.size(); }
  const std::vector<double>& positions() const noexcept { return positions_; }
  const std::vector<double>& masses() const noexcept { return masses_; }
  double total_mass() const noexcept { return total_mass_; }

  double center_of_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += masses_[i] * positions_[i];
    return s / total_mass_;
  }

 private:
  std::vector<double> positions_;
  std::vector<double> masses_;
  double total_mass_ = 0.0;
};

/// A nonnegative density made of pieces on disjoint intervals; zero elsewhere.
class PiecewiseDensity {
 public:
  struct Piece {
    double lo;
    double hi;
    std::function<double(double)> value;
    std::optional<double> constant;  // set when the piece has a constant value
    double mass;
    // Cumulative mass at equally spaced knots; empty for constant pieces.
    std::vector<double> cumulative;
  };

  PiecewiseDensity& add_constant(double lo, double hi, double value) {
    check_interval(lo, hi);
    if (!std::isfinite(value)) throw InvalidArgument("density: non-finite value");
    if (value < 0.0) throw InvalidArgument("density: negative value");
    insert(Piece{lo, hi, [value](double) { return value; }, value, value * (hi - lo), {}});
    return *this;
  }

  PiecewiseDensity& add(double lo, double hi, std::function<double(double)> value) {
    check_interval(lo, hi);
    // Spot check on a regular grid; the quadrature samples elsewhere too.
    constexpr int kSamples = 256;
    for (int k = 0; k <= kSamples; ++k) {
      const double x = lo + (hi - lo) * k / kSamples;
      const double v = value(x);
      if (!std::isfinite(v)) throw InvalidArgument("density: non-finite value");
      if (v < 0.0) throw InvalidArgument("density: negative value");
    }
    std::vector<double> cumulative(kKnots + 1, 0.0);
    for (int k = 0; k < kKnots; ++k) {
      cumulative[k + 1] = cumulative[k] + integrate(value, knot(lo, hi, k), knot(lo, hi, k + 1));
    }
    const double mass = cumulative.back();
    if (!std::isfinite(mass)) throw InvalidArgument("density: non-finite value");
    insert(Piece{lo, hi, std::move(value), std::nullopt, mass, std::move(cumulative)});
    return *this;
  }

  const std::vector<Piece>& pieces() const noexcept { return pieces_; }

  double operator()(double x) const {
    for (const auto& p : pieces_) {
      if (p.lo <= x && x <= p.hi) return p.value(x);
    }
    return 0.0;
  }

  double total_mass() const {
    double m = 0.0;
    for (const auto& p : pieces_) m += p.mass;
    return m;
  }

  /// Inverse of the cumulative mass function x -> int_{-inf}^x density.
  double quantile(double mass) const {
    double before = 0.0;
    const Piece* last = nullptr;
    for (const auto& p : pieces_) {
      if (!(p.mass > 0.0)) continue;
      if (mass <= before + p.mass) return invert_piece(p, std::max(mass - before, 0.0));
      before += p.mass;
      last = &p;
    }
    if (last == nullptr) throw InvalidArgument("empty measure");
    return last->hi;
  }

 private:
  static constexpr int kKnots = 256;

  static double knot(double lo, double hi, int k) {
    return k == kKnots ? hi : lo + (hi - lo) * k / kKnots;
  }

  static void check_interval(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw InvalidArgument("density: piece interval must be finite with hi > lo");
    }
  }

  static double integrate(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 6, 1e-13);
  }

  // Fixed rule for sub-intervals of a single knot cell.
  static double integrate_cell(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
  }

  static double invert_piece(const Piece& p, double target) {
    if (p.constant) {
      return p.lo + target / *p.constant;
    }
    if (target <= 0.0) return p.lo;
    if (target >= p.mass) return p.hi;
    const auto it = std::upper_bound(p.cumulative.begin(), p.cumulative.end(), target);
    const int k = std::clamp(static_cast<int>(it - p.cumulative.begin()) - 1, 0, kKnots - 1);
    const double lo = knot(p.lo, p.hi, k), hi = knot(p.lo, p.hi, k + 1);
    const double local = target - p.cumulative[k];
    const double cell = p.cumulative[k + 1] - p.cumulative[k];
    if (!(cell > 0.0)) return lo;
    auto residual = [&](double x) { return integrate_cell(p.value, lo, x) - local; };
    std::uintmax_t max_iter = 200;
    auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, -local, cell - local,
                                                    boost::math::tools::eps_tolerance<double>(50),
                                                    max_iter);
    return 0.5 * (a + b);
  }

  void insert(Piece piece) {
    auto it = std::lower_bound(pieces_.begin(), pieces_.end(), piece.lo,
                               [](const Piece& p, double lo) { return p.lo < lo; });
    if (it != pieces_.end() && it->lo < piece.hi) throw InvalidArgument("density: overlapping pieces");
    if (it != pieces_.begin() && std::prev(it)->hi > piece.lo) {
      throw InvalidArgument("density: overlapping pieces");
    }
    pieces_.insert(it, std::move(piece));
  }

  std::vector<Piece> pieces_;
};

/// Equal-mass particles at the mass quantiles (i + 1/2) m of `density`.
inline ParticleSystem build_particles(const PiecewiseDensity& density, std::size_t n) {
  if (n == 0) throw InvalidArgument("build_particles: need at least one particle");
  const double total = density.total_mass();
  if (!std::isfinite(total)) throw InvalidArgument("build_particles: non-finite total mass");
  if (!(total > 0.0)) throw InvalidArgument("empty measure");
  const double m = total / static_cast<double>(n);
  std::vector<double> positions(n);
  for (std::size_t i = 0; i < n; ++i) {
    positions[i] = density.quantile((static_cast<double>(i) + 0.5) * m);
  }
  // Root finding can leave neighbouring quantiles a rounding error out of order.
  for (std::size_t i = 1; i < n; ++i) positions[i] = std::max(positions[i], positions[i - 1]);
  return ParticleSystem(std::move(positions), std::vector<double>(n, m));
}

/// Maximally compressed rearrangement: the particles packed at unit density
/// into an interval of length total_mass centered at the center of mass.
inline MonotoneMap congested_transport(const ParticleSystem& ps) {
  const auto& m = ps.masses();
  const double start = ps.center_of_mass() - 0.5 * ps.total_mass();
  std::vector<double> xtil(ps.size());
  double before = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    xtil[i] = start + before + 0.5 * m[i];
    before += m[i];
  }
  return MonotoneMap(std::move(xtil));
}

}  // namespace granular
