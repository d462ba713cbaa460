#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace granular;

namespace {

const std::vector<double> kOutputTimes{0.0, 0.64, 1.0, 1.5, 2.0, 3.0};

ParticleSystem two_block_particles(std::size_t n) { return build_particles(two_block_density(TwoBlockParams{}), n); }

}  // namespace

TEST(TwoBlockParams, DerivedTimes) {
  TwoBlockParams p;
  EXPECT_NEAR(p.t1(), 0.64, 1e-15);
  EXPECT_DOUBLE_EQ(p.t2(), 2.0);
  EXPECT_NO_THROW(p.validate());
  TwoBlockParams bad = p;
  bad.b2 = 2.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.alpha = 0.01;  // t1 > t*
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.a2 = -0.2;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(TwoBlockExact, InitialState) {
  const auto ps = two_block_particles(200);
  const auto e = two_block_exact(TwoBlockParams{}, ps, 0.0);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(e.x_ex[i], ps.positions()[i]);
    EXPECT_EQ(e.u_ex[i], 0.0);
    EXPECT_EQ(e.gamma_ex[i], 0.0);
  }
  EXPECT_THROW(two_block_exact(TwoBlockParams{}, ps, -1.0), InvalidArgument);
}

TEST(TwoBlockExact, BlocksTouchAtFirstContact) {
  TwoBlockParams p;
  // The right edge of the left block, b1, travels alpha t1^2 / 2.
  EXPECT_NEAR(p.b1 + p.alpha * 0.64 * 0.64 / 2.0, 0.0, 1e-15);
  const auto ps = two_block_particles(2000);
  const auto e = two_block_exact(p, ps, p.t1());
  const double m = ps.masses()[0];
  EXPECT_NEAR(e.x_ex[999] + 0.5 * m, 0.0, 1e-14);
  EXPECT_NEAR(e.x_ex[1000] - 0.5 * m, 0.0, 1e-14);
}

// While stuck, Gamma at the contact point carries the whole impulse pushed
// into the left block: -M_left * alpha * t up to t*.
TEST(TwoBlockExact, PhaseTwoImpulse) {
  TwoBlockParams p;
  const auto ps = two_block_particles(2000);
  for (double t : {0.7, 0.85, 1.0}) {
    const auto e = two_block_exact(p, ps, t);
    EXPECT_NEAR(e.gamma_ex[999], -1.0 * p.alpha * t, 1e-12);
    // Minimum at the block center, zero at the far edges.
    double gmin = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (e.gamma_ex[i] < gmin) {
        gmin = e.gamma_ex[i];
        arg = i;
      }
      EXPECT_LE(e.gamma_ex[i], 0.0);
    }
    EXPECT_EQ(arg, 999u);
    EXPECT_NEAR(e.gamma_ex[ps.size() - 1], 0.0, 1e-12);
  }
}

TEST(TwoBlockExact, ContinuityAtPhaseBoundaries) {
  TwoBlockParams p;
  const auto ps = two_block_particles(400);
  const double h = 1e-9;
  for (double tb : {p.t1(), p.t_star, p.t2()}) {
    const auto a = two_block_exact(p, ps, tb - h);
    const auto b = two_block_exact(p, ps, tb + h);
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_NEAR(a.x_ex[i], b.x_ex[i], 1e-8);
  }
  for (double tb : {p.t_star, p.t2()}) {
    const auto a = two_block_exact(p, ps, tb - h);
    const auto b = two_block_exact(p, ps, tb + h);
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_NEAR(a.gamma_ex[i], b.gamma_ex[i], 1e-8);
  }
  // Gamma jumps at t1: the inelastic collision transfers alpha t1 per unit mass.
  const auto before = two_block_exact(p, ps, p.t1() - h);
  const auto after = two_block_exact(p, ps, p.t1() + h);
  EXPECT_EQ(before.gamma_ex[199], 0.0);
  EXPECT_NEAR(after.gamma_ex[199], -p.alpha * p.t1(), 1e-8);
}

TEST(TwoBlockExact, PhaseStructure) {
  TwoBlockParams p;
  const auto ps = two_block_particles(400);
  for (double t : {0.1, 0.5, 2.5, 3.0}) {
    for (double g : two_block_exact(p, ps, t).gamma_ex) EXPECT_EQ(g, 0.0);
  }
  for (double t : {0.7, 1.0, 1.5, 1.99}) {
    for (double u : two_block_exact(p, ps, t).u_ex) EXPECT_EQ(u, 0.0);
  }
  // After t2 the blocks move apart with speed alpha (t - t2).
  for (double s : {0.1, 0.5, 1.0}) {
    const auto e = two_block_exact(p, ps, p.t2() + s);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double outward = ps.positions()[i] < 0.0 ? -1.0 : 1.0;
      EXPECT_NEAR(e.u_ex[i], outward * p.alpha * s, 1e-15);
    }
  }
  for (double t : {0.0, 0.3, 0.64, 1.0, 1.7, 2.0, 2.6}) {
    const auto e = two_block_exact(p, ps, t);
    for (std::size_t i = 1; i < ps.size(); ++i) EXPECT_LE(e.x_ex[i - 1], e.x_ex[i]);
  }
}

TEST(ErrorNorms, ZeroOnExactState) {
  TwoBlockParams p;
  const auto ps = two_block_particles(100);
  const auto e = two_block_exact(p, ps, 1.5);
  SimState s;
  s.x = MonotoneMap(e.x_ex);
  s.u = e.u_ex;
  s.gamma = e.gamma_ex;
  const auto r = error_norms(s, e, ps.masses());
  EXPECT_EQ(r.x_l2, 0.0);
  EXPECT_EQ(r.u_l2, 0.0);
  EXPECT_EQ(r.gamma_sup, 0.0);
  ExactSnapshot shorter = e;
  shorter.x_ex.pop_back();
  EXPECT_THROW(error_norms(s, shorter, ps.masses()), InvalidArgument);
}

TEST(TwoBlockRun, ContactAndSeparation) {
  const auto r = testkit::run_two_block(1000, 1e-3, 3.0, kOutputTimes);
  ASSERT_TRUE(r.history.contact_time());
  EXPECT_NEAR(*r.history.contact_time(), 0.64, 2e-3);
  ASSERT_TRUE(r.history.separation_time());
  EXPECT_GE(*r.history.last_stuck_time(), 2.0 - 1e-12);
  EXPECT_LE(*r.history.separation_time(), 2.0 + 2e-3 + 1e-12);
  EXPECT_LE(r.max_x_error, 5e-3);
  EXPECT_LE(r.max_gamma_error, 1e-2 * r.max_gamma_exact);
}

// Joint refinement in N and dt: errors must decrease monotonically.
TEST(TwoBlockRun, ConvergenceStudy) {
  const std::vector<std::pair<std::size_t, double>> levels{{250, 4e-3}, {1000, 2e-3}, {2000, 1e-3}};
  std::vector<double> ex, eg;
  for (const auto& [n, dt] : levels) {
    const auto r = testkit::run_two_block(n, dt, 3.0, kOutputTimes);
    ex.push_back(r.max_x_error);
    eg.push_back(r.max_gamma_error);
    std::printf("N=%zu dt=%g  max x error %.3e  max gamma error %.3e\n", n, dt, r.max_x_error, r.max_gamma_error);
  }
  for (std::size_t k = 1; k < levels.size(); ++k) {
    EXPECT_LT(ex[k], ex[k - 1]);
    EXPECT_LT(eg[k], eg[k - 1]);
  }
}

// Under a constant force the left rectangle rule gives the exact velocity and
// a position lag of alpha t dt / 2; halving dt halves it.
TEST(TwoBlockRun, FirstOrderInTime) {
  TwoBlockParams p;
  const auto ps = two_block_particles(200);
  const auto xt = congested_transport(ps);
  std::vector<double> errs;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 0.5;
    const auto s = march(init_state(ps, std::vector<double>(ps.size(), 0.0), xt, cfg), two_block_force(p), cfg, xt,
                         ps.masses(), [](const SimState&) {});
    const auto err = error_norms(s, two_block_exact(p, ps, s.t), ps.masses());
    EXPECT_LT(err.u_l2, 1e-13);
    EXPECT_NEAR(err.x_l2, p.alpha * s.t * dt / 2.0 * std::sqrt(ps.total_mass()), 1e-12);
    errs.push_back(err.x_l2);
  }
  EXPECT_NEAR(errs[0] / errs[1], 2.0, 0.05);
  EXPECT_NEAR(errs[1] / errs[2], 2.0, 0.05);
}
