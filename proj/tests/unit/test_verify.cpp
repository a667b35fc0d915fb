#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "generators.hpp"
#include "mcflab/verify.hpp"

using namespace mcflab;
using mcflab::testing::Gen;

namespace {

Scenario fourier(int points) {
  Scenario s;
  s.name = "fourier";
  s.generator = GeneratorKind::fourier;
  s.dim = 2;
  s.codim = 2;
  s.points = points;
  return s;
}

Trajectory short_run(const Scenario& s, double t_end = 0.05, int frames = 4) {
  FlowConfig cfg;
  cfg.t_end = t_end;
  cfg.frames = frames;
  return run(s, cfg);
}

}  // namespace

TEST(QuantityId, ParseAndName) {
  EXPECT_EQ(QuantityId::parse("w")->kind, QuantityKind::w);
  EXPECT_EQ(QuantityId::parse("logdetS2")->kind, QuantityKind::logdetS2);
  const auto p = QuantityId::parse("pair(1,3)");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->i, 0);
  EXPECT_EQ(p->j, 2);
  EXPECT_EQ(p->name(), "pair(1,3)");
  EXPECT_TRUE(QuantityId::parse("varphi")->two_sided());
  EXPECT_FALSE(QuantityId::parse("cm_cutoff")->two_sided());
  EXPECT_FALSE(QuantityId::parse("pair(2,1)"));
  EXPECT_FALSE(QuantityId::parse("bogus"));
  for (const auto& q : default_quantities(3)) EXPECT_EQ(QuantityId::parse(q.name()), q);
  EXPECT_EQ(default_quantities(3).size(), 6u);
  EXPECT_EQ(default_quantities(1).size(), 3u);
}

TEST(HeatResiduals, ZeroMapSlackVanishes) {
  const Trajectory traj = short_run(Scenario{});
  const auto qs = default_quantities(2);
  const auto res = heat_residuals(traj, qs);
  ASSERT_EQ(res.size(), traj.frames.size() - 2);
  for (const auto& fr : res)
    for (const auto& f : fr.fields) {
      EXPECT_GT(f.summary.count, 0u);
      for (std::size_t x = 0; x < f.slack.values.size(); ++x)
        if (f.slack.mask[x]) EXPECT_EQ(f.slack.values[x], 0.0);
    }
}

TEST(HeatResiduals, RejectsBadQuantities) {
  const Trajectory traj = short_run(Scenario{});
  const std::vector<QuantityId> bad_pair{{QuantityKind::pair, 0, 2}};
  EXPECT_THROW(heat_residuals(traj, bad_pair), std::invalid_argument);
  const std::vector<QuantityId> elliptic{{QuantityKind::subharmonic_log_v, 0, 1}};
  EXPECT_THROW(heat_residuals(traj, elliptic), std::invalid_argument);
}

TEST(HeatResiduals, FourierInequalitiesWithinTolerance) {
  const Trajectory traj = short_run(fourier(33), 0.125, 8);
  const auto qs = default_quantities(2);
  const auto res = heat_residuals(traj, qs);
  const double h = traj.frames[0].grid.spacing();
  for (const auto& fr : res)
    for (const auto& f : fr.fields) {
      EXPECT_LE(f.summary.max_positive(), default_tolerance(h, traj.dt, f.summary.scale)) << f.quantity.name();
      EXPECT_GE(static_cast<double>(f.hypothesis_count), 0.95 * static_cast<double>(f.region_count));
    }
}

TEST(HeatResiduals, VarphiIdentityConverges) {
  auto worst = [](int points) {
    const Trajectory traj = short_run(fourier(points), 0.05, 4);
    const std::vector<QuantityId> qs{{QuantityKind::varphi, 0, 1}};
    double m = 0.0;
    for (const auto& fr : heat_residuals(traj, qs)) {
      // Compare on a fixed physical box so the region does not grow.
      const auto& f = fr.fields[0];
      const GridSpec& g = traj.frames[0].grid;
      for (std::size_t x = 0; x < f.slack.values.size(); ++x) {
        bool inside = true;
        for (int d = 0; d < g.dim; ++d) inside = inside && std::abs(g.coordinate(x, d)) <= 0.4;
        if (f.slack.mask[x] && inside) m = std::max(m, std::abs(f.slack.values[x]));
      }
    }
    return m;
  };
  EXPECT_GE(worst(33) / worst(65), 3.0);
}

TEST(Summarize, QuantileAndTwoSided) {
  ScalarField s = ScalarField::filled(100, 0.0);
  std::vector<double> scale(100, 1.0);
  for (std::size_t i = 0; i < 100; ++i) s.values[i] = -static_cast<double>(i) / 100.0;
  s.mask[0] = 0;
  const auto one = summarize(s, scale, false);
  EXPECT_EQ(one.count, 99u);
  EXPECT_DOUBLE_EQ(one.max_slack, -0.01);
  EXPECT_EQ(one.max_positive(), 0.0);
  const auto two = summarize(s, scale, true);
  EXPECT_DOUBLE_EQ(two.max_slack, 0.99);
}

TEST(SupMonitor, ZeroMapClosedForm) {
  const Trajectory traj = short_run(Scenario{}, 0.1, 5);
  const SupMonitor mon = weighted_sup_monitor(traj);
  EXPECT_DOUBLE_EQ(mon.radius(), 1.0);
  ASSERT_EQ(mon.sup_full().size(), traj.frames.size());
  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    const double base = 1.0 - 4.0 * traj.frames[k].time;
    EXPECT_NEAR(mon.sup_full()[k], std::pow(base, 8), 1e-14);
    EXPECT_NEAR(mon.root_full()[k], base, 1e-14);
    if (k > 0) EXPECT_LT(mon.sup_full()[k], mon.sup_full()[k - 1]);
  }
  EXPECT_LE(mon.max_forward_increase_full(), 0.0);
}

TEST(SupMonitor, SingleObservation) {
  const SupMonitor mon(GraphState::zeros(GridSpec::make(2, 17), 1));
  EXPECT_EQ(mon.sup_full().size(), 1u);
  EXPECT_EQ(mon.max_forward_increase_full(), 0.0);
  EXPECT_EQ(mon.max_forward_increase_interior(), 0.0);
}

TEST(SupMonitor, FourierIncreaseWithinTolerance) {
  const Trajectory traj = short_run(fourier(33), 0.125, 16);
  const SupMonitor mon = weighted_sup_monitor(traj);
  const double h = traj.frames[0].grid.spacing();
  EXPECT_LE(mon.max_forward_increase_full(), 10.0 * (h * h + traj.dt) * mon.sup_full().front());
  EXPECT_LE(mon.max_forward_increase_interior(), 10.0 * (h * h + traj.dt) * mon.sup_interior().front());
}

TEST(Maxpoint, ZeroMapRescaled) {
  const Trajectory traj = short_run(Scenario{}, 0.1, 4);
  const MaxpointReport r = maxpoint_report(parabolic_rescale(traj, 0.0));
  EXPECT_EQ(r.lambda1, 0.0);
  EXPECT_EQ(r.product, 0.0);
  EXPECT_EQ(r.limit, 8.0);
  EXPECT_TRUE(r.pass);
}

TEST(Bound, ClosedFormAndConstants) {
  EXPECT_NEAR(gradient_bound_log(2, 1, 0.0), 262.93147180559945, 1e-12);
  Gen gen(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = gen.integer(1, 3), m = gen.integer(1, 3);
    const double lambda = gen.uniform(0.0, 5.0);
    const double log_k1 = n * std::log(32.0 * m) + n + 128.0 * n * n * m * m;
    const double k2 = n + 512.0 * n * n * m * m;
    EXPECT_LE(gradient_bound_log(n, m, lambda), log_k1 + k2 * lambda * lambda + 1e-9);
  }
}

TEST(Bound, ZeroMapPasses) {
  const Trajectory traj = short_run(Scenario{}, 0.125, 4);
  const BoundReport r = gradient_bound_report(traj, 0.0);
  EXPECT_EQ(r.measured, 0.0);
  EXPECT_TRUE(r.pass);
  ASSERT_TRUE(r.phi_origin);
  EXPECT_NEAR(*r.phi_origin, 1.0, 1e-15);
  EXPECT_THROW(gradient_bound_report(short_run(Scenario{}, 0.1, 4), 0.0), std::runtime_error);
}

TEST(Refinement, Verdicts) {
  const std::vector<double> contracting{1.0, 0.25, 0.0625};
  auto r = refinement_verdict(contracting, 2.5, 1e-12);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.status, "contracting");
  EXPECT_NEAR(r.steps[0].order, 2.0, 1e-15);

  const std::vector<double> zero{0.0, 0.0, 0.0};
  r = refinement_verdict(zero, 2.5, 1e-12);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.status, "at-floor");

  const std::vector<double> up{1.0, 2.0};
  r = refinement_verdict(up, 2.5, 1e-12);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.status, "non-monotone");

  const std::vector<double> slow{1.0, 0.6};
  r = refinement_verdict(slow, 2.5, 1e-12);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.status, "stalled");

  const std::vector<double> one{1.0};
  EXPECT_THROW(refinement_verdict(one, 2.5, 0.0), std::invalid_argument);
}
