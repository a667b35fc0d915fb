#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/grid.hpp"

using namespace mcflab;
using mcflab::testing::Gen;
using mcflab::testing::sample_graph;

namespace {

ScalarField field_of(const GraphState& s, const std::function<double(const GraphState&, std::size_t)>& f) {
  ScalarField out = ScalarField::filled(s.grid.node_count(), 0.0);
  for (std::size_t x = 0; x < s.grid.node_count(); ++x) out.values[x] = f(s, x);
  return out;
}

double z_sq(const GraphState& s, std::size_t x) {
  double r = s.grid.radius_sq(x);
  for (const auto& u : s.heights) r += u[x] * u[x];
  return r;
}

double y_sq(const GraphState& s, std::size_t x) {
  double r = 0.0;
  for (const auto& u : s.heights) r += u[x] * u[x];
  return r;
}

Scenario fourier(int points) {
  Scenario s;
  s.name = "fourier";
  s.generator = GeneratorKind::fourier;
  s.dim = 2;
  s.codim = 2;
  s.points = points;
  return s;
}

// max |heat(F) - expected| over the residual mask of the middle frame.
double heat_error(int points, bool use_z) {
  FlowConfig cfg;
  cfg.t_end = 0.02;
  cfg.frames = 4;
  const Trajectory traj = run(fourier(points), cfg);
  const FrameTriple tr = traj.triple(2);
  auto f = use_z ? z_sq : y_sq;
  const ScalarField heat = heat_operator(tr, field_of(tr.prev, f), field_of(tr.mid, f), field_of(tr.next, f));
  std::vector<ScalarField> grads;
  for (int a = 0; a < tr.mid.codim; ++a) {
    grads.push_back(mt_grad_sq(tr.mid, field_of(tr.mid, [a](const GraphState& s, std::size_t x) {
                                 return s.heights[static_cast<std::size_t>(a)][x];
                               })));
  }
  double err = 0.0;
  for (std::size_t x = 0; x < heat.values.size(); ++x) {
    if (!heat.mask[x]) continue;
    double expected = -2.0 * tr.mid.grid.dim;
    if (!use_z) {
      expected = 0.0;
      for (const auto& g : grads) expected -= 2.0 * g.values[x];
    }
    err = std::max(err, std::abs(heat.values[x] - expected));
  }
  return err;
}

}  // namespace

TEST(GridSpec, ValidatesAndCentresOrigin) {
  EXPECT_THROW(GridSpec::make(4, 17), std::invalid_argument);
  EXPECT_THROW(GridSpec::make(2, 16), std::invalid_argument);
  EXPECT_THROW(GridSpec::make(2, 15), std::invalid_argument);
  const GridSpec g = GridSpec::make(2, 33);
  EXPECT_EQ(g.node_count(), 33u * 33u);
  EXPECT_EQ(g.coordinate(g.origin(), 0), 0.0);
  EXPECT_EQ(g.coordinate(g.origin(), 1), 0.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.0625);
  EXPECT_EQ(g.boundary_distance(0), 0);
  EXPECT_EQ(g.boundary_distance(g.origin()), 16);
}

TEST(JacobianField, ExactOnAffineAndQuadratic) {
  const GridSpec grid = GridSpec::make(2, 17);
  const GraphState lin = sample_graph(grid, 2, [](int a, const auto& x) { return a == 0 ? 0.3 * x[0] - 0.2 * x[1] : 1.1 * x[1]; });
  const GraphState quad = sample_graph(grid, 1, [](int, const auto& x) { return x[0] * x[0] + 0.5 * x[0] * x[1]; });
  const JacobianField jl = jacobian_field(lin);
  const JacobianField jq = jacobian_field(quad);
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    if (!jl.mask[node]) continue;
    EXPECT_NEAR(jl.entry(node, 0, 0), 0.3, 1e-13);
    EXPECT_NEAR(jl.entry(node, 0, 1), -0.2, 1e-13);
    EXPECT_NEAR(jl.entry(node, 1, 0), 0.0, 1e-13);
    EXPECT_NEAR(jl.entry(node, 1, 1), 1.1, 1e-13);
    const double x = grid.coordinate(node, 0);
    const double y = grid.coordinate(node, 1);
    EXPECT_NEAR(jq.entry(node, 0, 0), 2 * x + 0.5 * y, 1e-13);
    EXPECT_NEAR(jq.entry(node, 0, 1), 0.5 * x, 1e-13);
  }
}

TEST(JacobianField, SecondOrderOnSine) {
  auto error = [](int points) {
    const GridSpec grid = GridSpec::make(1, points);
    const GraphState s = sample_graph(grid, 1, [](int, const auto& x) { return std::sin(std::numbers::pi * x[0]); });
    const JacobianField j = jacobian_field(s);
    double e = 0.0;
    for (std::size_t node = 0; node < grid.node_count(); ++node)
      if (j.mask[node])
        e = std::max(e, std::abs(j.entry(node, 0, 0) - std::numbers::pi * std::cos(std::numbers::pi * grid.coordinate(node, 0))));
    return e;
  };
  EXPECT_GE(error(33) / error(65), 3.5);
  EXPECT_GE(error(65) / error(129), 3.5);
}

TEST(Laplacian, FlatGraphQuadratic) {
  const GridSpec grid = GridSpec::make(2, 17);
  const GraphState flat = GraphState::zeros(grid, 1);
  const ScalarField lap = mt_laplacian(flat, field_of(flat, [](const GraphState& s, std::size_t x) { return s.grid.radius_sq(x); }));
  std::size_t count = 0;
  for (std::size_t x = 0; x < lap.values.size(); ++x) {
    if (!lap.mask[x]) continue;
    EXPECT_NEAR(lap.values[x], 4.0, 1e-12);
    ++count;
  }
  EXPECT_GT(count, 0u);
}

TEST(Laplacian, ConstantIsHarmonicProperty) {
  Gen gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = gen.uniform(-1, 1), b = gen.uniform(-1, 1), c = gen.uniform(0.5, 2);
    const GraphState s = sample_graph(GridSpec::make(2, 17), 2, [&](int al, const auto& x) {
      return al == 0 ? a * std::sin(c * x[0]) * x[1] : b * x[0] * x[0];
    });
    const ScalarField lap = mt_laplacian(s, ScalarField::filled(s.grid.node_count(), 3.7));
    const ScalarField g = mt_grad_sq(s, ScalarField::filled(s.grid.node_count(), 3.7));
    for (std::size_t x = 0; x < lap.values.size(); ++x) {
      if (lap.mask[x]) EXPECT_NEAR(lap.values[x], 0.0, 1e-12);
      if (g.mask[x]) EXPECT_NEAR(g.values[x], 0.0, 1e-12);
    }
  }
}

TEST(Laplacian, DivergenceFormMatchesTraceOnMinimalGraph) {
  // On an affine (minimal) graph the metric is constant and both forms agree.
  const GraphState s = sample_graph(GridSpec::make(2, 17), 1, [](int, const auto& x) { return 0.8 * x[0] - 0.3 * x[1]; });
  const MetricField metric = metric_field(s);
  const ScalarField f = field_of(s, [](const GraphState& st, std::size_t x) {
    const double a = st.grid.coordinate(x, 0), b = st.grid.coordinate(x, 1);
    return a * a - 2 * a * b + 0.5 * b * b;
  });
  const ScalarField div = mt_laplacian(metric, f);
  const ScalarField trace = hessian_trace(metric, f);
  for (std::size_t x = 0; x < f.values.size(); ++x)
    if (div.mask[x] && trace.mask[x]) EXPECT_NEAR(div.values[x], trace.values[x], 1e-11);
}

TEST(GradSq, Values) {
  const GridSpec grid = GridSpec::make(2, 17);
  const GraphState flat = GraphState::zeros(grid, 1);
  auto x1 = [](const GraphState& s, std::size_t x) { return s.grid.coordinate(x, 0); };
  const ScalarField g0 = mt_grad_sq(flat, field_of(flat, x1));
  const GraphState sloped = sample_graph(grid, 2, [](int a, const auto& x) { return a == 0 ? x[0] : 0.5 * x[1]; });
  const ScalarField g1 = mt_grad_sq(sloped, field_of(sloped, x1));
  for (std::size_t x = 0; x < grid.node_count(); ++x) {
    if (g0.mask[x]) EXPECT_NEAR(g0.values[x], 1.0, 1e-13);
    if (g1.mask[x]) EXPECT_NEAR(g1.values[x], 0.5, 1e-13);
  }
}

TEST(HeatOperator, PositionSquaredIsMinusTwoN) {
  const double coarse = heat_error(33, true);
  const double fine = heat_error(65, true);
  EXPECT_LT(fine, 0.05);
  EXPECT_GE(coarse / fine, 3.0);
}

TEST(HeatOperator, HeightSquaredMatchesGradientTerm) {
  const double coarse = heat_error(33, false);
  const double fine = heat_error(65, false);
  EXPECT_LT(fine, 0.05);
  EXPECT_GE(coarse / fine, 3.0);
}

TEST(HeatOperator, ConstantGivesZero) {
  FlowConfig cfg;
  cfg.t_end = 0.01;
  cfg.frames = 2;
  const Trajectory traj = run(fourier(33), cfg);
  const FrameTriple tr = traj.triple(1);
  const std::size_t n = tr.mid.grid.node_count();
  const ScalarField c = ScalarField::filled(n, 2.5);
  const ScalarField heat = heat_operator(tr, c, c, c);
  for (std::size_t x = 0; x < n; ++x)
    if (heat.mask[x]) EXPECT_NEAR(heat.values[x], 0.0, 1e-12);
}

TEST(Cutoff, VarphiAtOrigin) {
  const GraphState flat = GraphState::zeros(GridSpec::make(2, 17), 1);
  CutoffParams p;
  p.kind = CutoffKind::varphi_sq;
  p.radius = 1.0;
  const ScalarField f = cutoff_field(flat, p);
  EXPECT_EQ(f.values[flat.grid.origin()], 1.0);
  EXPECT_TRUE(f.mask[flat.grid.origin()]);
  // Corners have R^2 - |x|^2 = -1.
  EXPECT_EQ(f.values[0], 0.0);
  EXPECT_FALSE(f.mask[0]);
}

TEST(Cutoff, ColdingMinicozziValue) {
  const GraphState one = sample_graph(GridSpec::make(2, 17), 1, [](int, const auto&) { return 1.0; }, 0.125);
  CutoffParams p;
  p.kind = CutoffKind::cm;
  p.weight = 4.0;
  p.radius_const = 1.0;
  const ScalarField f = cutoff_field(one, p);
  EXPECT_NEAR(f.values[one.grid.origin()], 6.332082774547088e-15, 1e-28);
  GraphState early = one;
  early.time = 0.0;
  EXPECT_THROW(cutoff_field(early, p), std::invalid_argument);
  p.weight = 0.5;
  EXPECT_THROW(cutoff_field(one, p), std::invalid_argument);
}

TEST(Erode, SubsetAndBoundaryProperty) {
  Gen gen(37);
  const GridSpec grid = GridSpec::make(2, 17);
  for (int trial = 0; trial < 50; ++trial) {
    Mask m(grid.node_count());
    for (auto& b : m) b = gen.uniform(0, 1) < 0.8 ? 1 : 0;
    const int r = gen.integer(0, 3);
    const Mask e = erode(grid, m, r);
    for (std::size_t x = 0; x < m.size(); ++x) {
      if (e[x]) {
        EXPECT_TRUE(m[x]);
        EXPECT_GE(grid.boundary_distance(x), r);
      }
    }
  }
}
