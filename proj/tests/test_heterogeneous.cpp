#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <utility>

#include "support.hpp"

using namespace granular;

namespace {

// Extent of the congested zone (r = 1, gamma < 0) around x0, if any.
std::optional<std::pair<double, double>> congested_zone_at(const EulerianField& f, double x0) {
  std::optional<std::pair<double, double>> zone;
  for (const auto& c : f.samples) {
    const bool congested = c.ratio >= 1.0 - 1e-9 && c.gamma < 0.0;
    const double lo = c.x - 0.5 * c.width, hi = c.x + 0.5 * c.width;
    if (!congested) {
      if (zone && zone->first <= x0 && x0 <= zone->second) return zone;
      zone.reset();
      continue;
    }
    if (!zone) zone = std::make_pair(lo, hi);
    zone->second = hi;
  }
  if (zone && zone->first <= x0 && x0 <= zone->second) return zone;
  return std::nullopt;
}

StepperConfig config(double dt, double t_end) {
  StepperConfig cfg;
  cfg.dt = dt;
  cfg.t_end = t_end;
  return cfg;
}

}  // namespace

TEST(RatioSystem, ScenarioMasses) {
  const auto rs = build_ratio_system(hetero_scenario_density(), hetero_scenario_rho_star, 1000);
  EXPECT_NEAR(rs.base.total_mass(), 0.8, 1e-12);
  EXPECT_NEAR(rs.base.masses()[0], 8e-4, 1e-15);
  // r0 = 0.8 is uniform, so the particles are evenly spaced.
  for (std::size_t i = 0; i < rs.base.size(); ++i) {
    EXPECT_NEAR(rs.base.positions()[i], (static_cast<double>(i) + 0.5) / 1000.0, 1e-11);
    EXPECT_DOUBLE_EQ(rs.rho_star0_at_particles[i], hetero_scenario_rho_star(rs.base.positions()[i]));
  }
  EXPECT_DOUBLE_EQ(hetero_scenario_rho_star(0.5), 1.0);
  EXPECT_DOUBLE_EQ(hetero_scenario_rho_star(0.0), 1.4);
}

TEST(RatioSystem, SaturatedStartIsCongested) {
  PiecewiseDensity rho0;
  rho0.add(0.0, 1.0, hetero_scenario_rho_star);
  const auto rs = build_ratio_system(rho0, hetero_scenario_rho_star, 200);
  const auto s = init_heterogeneous(rs, std::vector<double>(200, 0.0), StepperConfig{});
  const auto f = reconstruct(s, rs.base, rs.xtil, rs.rho_star0_at_particles);
  for (const auto& c : f.samples) {
    EXPECT_NEAR(c.ratio, 1.0, 1e-10);
    EXPECT_NEAR(c.rho, *c.rho_star, 1e-10);
  }
}

TEST(RatioSystem, RejectsDensityAboveCap) {
  PiecewiseDensity rho0;
  rho0.add_constant(0.0, 1.0, 1.1);
  try {
    build_ratio_system(rho0, [](double) { return 1.0; }, 10);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("constraint violation"), std::string::npos);
  }
  EXPECT_THROW(build_ratio_system(rho0, [](double) { return -1.0; }, 10), InvalidArgument);
  EXPECT_THROW(ratio_system_from_particles(build_particles(rho0, 4), {1.0, 1.0, 0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(ratio_system_from_particles(build_particles(rho0, 4), {1.0}), InvalidArgument);
}

TEST(Heterogeneous, ForceFreeAtRestIsStationary) {
  const auto rs = build_ratio_system(hetero_scenario_density(), hetero_scenario_rho_star, 300);
  const auto last = run_heterogeneous(rs, std::vector<double>(300, 0.0), ForceField::zero(), config(1e-2, 1.0),
                                      [](const SimState&) {});
  EXPECT_EQ(last.x.values(), rs.base.positions());
  for (double g : last.gamma) EXPECT_EQ(g, 0.0);
}

TEST(Heterogeneous, ScenarioCongestsAroundCenter) {
  const auto rs = build_ratio_system(hetero_scenario_density(), hetero_scenario_rho_star, 1000);
  double r_max = 0.0, rho_excess = -1.0;
  std::optional<std::pair<double, double>> zone05, zone08;
  const auto cfg = config(1e-3, 0.8);
  run_heterogeneous(rs, std::vector<double>(1000, 0.0), hetero_scenario_force(), cfg, [&](const SimState& s) {
    const auto f = reconstruct(s, rs.base, rs.xtil, rs.rho_star0_at_particles);
    for (const auto& c : f.samples) {
      r_max = std::max(r_max, c.ratio);
      rho_excess = std::max(rho_excess, c.rho - *c.rho_star);
    }
    EXPECT_LE(check_exclusion(f, 1e-6).max_residual, 1e-6);
    if (s.step == 500) zone05 = congested_zone_at(f, 0.5);
    if (s.step == 800) zone08 = congested_zone_at(f, 0.5);
  });
  EXPECT_LE(r_max, 1.0 + 1e-12);
  EXPECT_LE(rho_excess, 1e-12);
  ASSERT_TRUE(zone05);
  ASSERT_TRUE(zone08);
  // The zone keeps growing while the force pushes inward.
  EXPECT_GT(zone08->second - zone08->first, zone05->second - zone05->first);
}

// With rho* = 1 the ratio path runs the same arithmetic as the plain one.
TEST(Heterogeneous, UnitCapIsBitIdentical) {
  TwoBlockParams p;
  const auto ps = build_particles(two_block_density(p), 400);
  const auto rs = ratio_system_from_particles(ps, std::vector<double>(ps.size(), 1.0));
  const auto xt = congested_transport(ps);
  const auto cfg = config(2e-3, 2.5);
  const std::vector<double> u0(ps.size(), 0.0);
  std::vector<SimState> plain;
  march(init_state(ps, u0, xt, cfg), two_block_force(p), cfg, xt, ps.masses(),
        [&](const SimState& s) { plain.push_back(s); });
  std::size_t k = 0;
  for (bool weighted : {false, true}) {
    k = 0;
    run_heterogeneous(
        rs, u0, two_block_force(p), cfg,
        [&](const SimState& s) {
          ASSERT_LT(k, plain.size());
          EXPECT_EQ(s.x.values(), plain[k].x.values());
          EXPECT_EQ(s.u, plain[k].u);
          EXPECT_EQ(s.gamma, plain[k].gamma);
          ++k;
        },
        HeteroOptions{weighted});
    EXPECT_EQ(k, plain.size());
  }

  // Also through the density constructor.
  PiecewiseDensity rho0;
  rho0.add(0.0, 1.0, [](double x) { return 0.5 + 0.4 * std::sin(3.0 * x); });
  const auto via_ratio = build_ratio_system(rho0, [](double) { return 1.0; }, 100);
  EXPECT_EQ(via_ratio.base.positions(), build_particles(rho0, 100).positions());
  EXPECT_EQ(via_ratio.base.masses(), build_particles(rho0, 100).masses());
  PiecewiseDensity flat;
  flat.add_constant(0.0, 1.0, 0.8);
  const auto flat_ratio = build_ratio_system(flat, [](double) { return 1.0; }, 100);
  EXPECT_EQ(flat_ratio.base.positions(), build_particles(flat, 100).positions());
  EXPECT_EQ(flat_ratio.base.masses(), build_particles(flat, 100).masses());
}

TEST(Heterogeneous, WeightedForceScalesByCap) {
  PiecewiseDensity rho0;
  rho0.add_constant(0.0, 1.0, 1.0);
  const auto ps = build_particles(rho0, 100);
  const auto rs = ratio_system_from_particles(ps, std::vector<double>(ps.size(), 2.0));
  const auto cfg = config(1e-2, 0.5);
  const std::vector<double> u0(ps.size(), 0.0);
  const ForceField f{[](double, double x) { return x < 0.5 ? 0.25 : -0.25; }, 0.0, 0.25};
  const ForceField doubled{[](double, double x) { return x < 0.5 ? 0.5 : -0.5; }, 0.0, 0.5};
  const auto a = run_heterogeneous(rs, u0, f, cfg, [](const SimState&) {}, HeteroOptions{true});
  const auto b = run_heterogeneous(rs, u0, doubled, cfg, [](const SimState&) {});
  const auto c = run_heterogeneous(rs, u0, f, cfg, [](const SimState&) {});
  EXPECT_EQ(a.x.values(), b.x.values());
  EXPECT_EQ(a.u_free, b.u_free);
  EXPECT_NE(a.u_free, c.u_free);
}
