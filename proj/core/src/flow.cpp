#include "mcflab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#ifndef MCFLAB_VERSION
#define MCFLAB_VERSION "unknown"
#endif

namespace mcflab {

std::string code_version() { return MCFLAB_VERSION; }

void FlowConfig::validate() const {
  if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw std::invalid_argument("dt_safety must be in (0, 1]");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be > 0");
  if (frames < 1) throw std::invalid_argument("frames must be >= 1");
}

const char* generator_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::zero: return "zero";
    case GeneratorKind::linear: return "linear";
    case GeneratorKind::grim_reaper: return "grim_reaper";
    case GeneratorKind::fourier: return "fourier";
  }
  return "?";
}

std::optional<GeneratorKind> parse_generator(const std::string& name) {
  for (auto k : {GeneratorKind::zero, GeneratorKind::linear, GeneratorKind::grim_reaper, GeneratorKind::fourier})
    if (name == generator_name(k)) return k;
  return std::nullopt;
}

const char* boundary_name(BoundaryMode mode) {
  return mode == BoundaryMode::dirichlet_frozen ? "dirichlet_frozen" : "dirichlet_exact";
}

std::optional<BoundaryMode> parse_boundary(const std::string& name) {
  if (name == "dirichlet_frozen") return BoundaryMode::dirichlet_frozen;
  if (name == "dirichlet_exact") return BoundaryMode::dirichlet_exact;
  return std::nullopt;
}

void Scenario::validate() const {
  (void)grid();
  if (codim < 1 || codim > kMaxDim) throw std::invalid_argument("codim must be in [1, " + std::to_string(kMaxDim) + "]");
  if (!(margin >= 0.0 && margin < 1.0)) throw std::invalid_argument("margin must be in [0, 1)");
  switch (generator) {
    case GeneratorKind::zero:
      break;
    case GeneratorKind::linear:
      if (static_cast<int>(slopes.size()) != codim) throw std::invalid_argument("linear slopes need codim rows");
      for (const auto& row : slopes) {
        if (static_cast<int>(row.size()) != dim) throw std::invalid_argument("linear slopes need dim columns");
        for (double c : row)
          if (!std::isfinite(c)) throw std::invalid_argument("linear slopes must be finite");
      }
      break;
    case GeneratorKind::grim_reaper:
      if (dim != 1 || codim != 1) throw std::invalid_argument("grim_reaper needs dim = codim = 1");
      if (!(extent < std::numbers::pi / 2)) throw std::invalid_argument("grim_reaper needs extent < pi/2");
      break;
    case GeneratorKind::fourier:
      if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw std::invalid_argument("fourier amplitude must be > 0");
      if (max_freq < 1 || max_freq > 16) throw std::invalid_argument("fourier max_freq must be in [1, 16]");
      break;
  }
}

double grim_reaper_exact(double x, double t) { return t - std::log(std::cos(x)); }

double area_decreasing_margin(const MetricField& metric) {
  const int n = metric.grid().dim;
  if (n < 2) return 1.0;
  double margin = 1.0;
  const std::size_t nodes = metric.grid().node_count();
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!metric.mask()[x]) continue;
    const double l1 = metric.lambdas[x * static_cast<std::size_t>(n)];
    const double l2 = metric.lambdas[x * static_cast<std::size_t>(n) + 1];
    margin = std::min(margin, 1.0 - l1 * l2);
  }
  return margin;
}

namespace {

// Sine series u^a = sum_k c_k prod_i sin(k_i pi (x_i + L) / (2L)), k in {1..K}^n.
struct SineSeries {
  int dim = 1;
  int codim = 1;
  int max_freq = 1;
  double extent = 1.0;
  std::vector<double> coeffs;  // codim blocks of K^n

  int modes() const {
    int c = 1;
    for (int d = 0; d < dim; ++d) c *= max_freq;
    return c;
  }

  static SineSeries draw(const Scenario& s) {
    SineSeries series{s.dim, s.codim, s.max_freq, s.extent, {}};
    std::mt19937_64 rng(s.seed);
    const int count = series.modes();
    series.coeffs.resize(static_cast<std::size_t>(count * s.codim));
    for (int a = 0; a < s.codim; ++a) {
      for (int idx = 0; idx < count; ++idx) {
        const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        double k2 = 0.0;
        int rest = idx;
        for (int d = 0; d < s.dim; ++d) {
          const int k = 1 + rest % s.max_freq;
          rest /= s.max_freq;
          k2 += static_cast<double>(k * k);
        }
        series.coeffs[static_cast<std::size_t>(a * count + idx)] = (2.0 * unit - 1.0) / k2;
      }
    }
    return series;
  }

  // Per-axis tables of sin/cos(k pi (x + L)/(2L)) for one point, k = 1..K.
  void tables(std::span<const double> x, std::vector<double>& sn, std::vector<double>& cs) const {
    const auto K = static_cast<std::size_t>(max_freq);
    sn.resize(static_cast<std::size_t>(dim) * K);
    cs.resize(sn.size());
    for (int d = 0; d < dim; ++d) {
      const double theta = std::numbers::pi * (x[static_cast<std::size_t>(d)] + extent) / (2.0 * extent);
      for (std::size_t k = 0; k < K; ++k) {
        sn[static_cast<std::size_t>(d) * K + k] = std::sin(static_cast<double>(k + 1) * theta);
        cs[static_cast<std::size_t>(d) * K + k] = std::cos(static_cast<double>(k + 1) * theta);
      }
    }
  }

  // Values u^a and analytic Jacobian at point x.
  void evaluate(std::span<const double> x, std::array<double, kMaxDim>& u, Jacobian* jac, std::vector<double>& sn,
                std::vector<double>& cs) const {
    tables(x, sn, cs);
    const auto K = static_cast<std::size_t>(max_freq);
    const int count = modes();
    const double dtheta = std::numbers::pi / (2.0 * extent);
    u.fill(0.0);
    if (jac) *jac = Jacobian(codim, dim);
    for (int idx = 0; idx < count; ++idx) {
      std::array<std::size_t, kMaxGridDim> k{};
      int rest = idx;
      for (int d = 0; d < dim; ++d) {
        k[static_cast<std::size_t>(d)] = static_cast<std::size_t>(rest % max_freq);
        rest /= max_freq;
      }
      double prod = 1.0;
      for (int d = 0; d < dim; ++d) prod *= sn[static_cast<std::size_t>(d) * K + k[static_cast<std::size_t>(d)]];
      std::array<double, kMaxGridDim> dprod{};
      if (jac) {
        for (int d = 0; d < dim; ++d) {
          double p = dtheta * static_cast<double>(k[static_cast<std::size_t>(d)] + 1) *
                     cs[static_cast<std::size_t>(d) * K + k[static_cast<std::size_t>(d)]];
          for (int e = 0; e < dim; ++e)
            if (e != d) p *= sn[static_cast<std::size_t>(e) * K + k[static_cast<std::size_t>(e)]];
          dprod[static_cast<std::size_t>(d)] = p;
        }
      }
      for (int a = 0; a < codim; ++a) {
        const double c = coeffs[static_cast<std::size_t>(a * count + idx)];
        u[static_cast<std::size_t>(a)] += c * prod;
        if (jac)
          for (int d = 0; d < dim; ++d) (*jac)(a, d) += c * dprod[static_cast<std::size_t>(d)];
      }
    }
  }
};

// Reference lattice used to normalize fourier data independently of the
// simulation grid, so every refinement level samples the same function.
GridSpec reference_lattice(const Scenario& s) {
  return GridSpec::make(s.dim, s.dim >= 3 ? 65 : 129, s.extent);
}

InitialData fourier_initial(const Scenario& s) {
  const SineSeries series = SineSeries::draw(s);
  const GridSpec ref = reference_lattice(s);
  std::vector<double> sn, cs;
  std::array<double, kMaxDim> u{};
  std::array<double, kMaxGridDim> x{};

  double umax = 0.0;
  double pair_max = 0.0;  // max over lattice of l1 l2 at unit scale
  for (std::size_t node = 0; node < ref.node_count(); ++node) {
    for (int d = 0; d < ref.dim; ++d) x[static_cast<std::size_t>(d)] = ref.coordinate(node, d);
    Jacobian jac;
    series.evaluate({x.data(), static_cast<std::size_t>(ref.dim)}, u, &jac, sn, cs);
    for (int a = 0; a < s.codim; ++a) umax = std::max(umax, std::abs(u[static_cast<std::size_t>(a)]));
    if (s.dim >= 2) {
      const SingularSpectrum sv = singular_spectrum(jac);
      pair_max = std::max(pair_max, sv.lambdas[0] * sv.lambdas[1]);
    }
  }
  if (!(umax > 0.0)) throw MarginError("fourier series vanishes on the reference lattice");

  double scale = s.amplitude / umax;
  int halvings = 0;
  // l1 l2 scales with scale^2.
  while (scale * scale * pair_max > 1.0 - s.margin) {
    if (halvings == 50) throw MarginError("fourier data cannot reach margin " + std::to_string(s.margin) + " in 50 halvings");
    scale *= 0.5;
    ++halvings;
  }

  const GridSpec grid = s.grid();
  InitialData out;
  out.state = GraphState::zeros(grid, s.codim);
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    for (int d = 0; d < grid.dim; ++d) x[static_cast<std::size_t>(d)] = grid.coordinate(node, d);
    series.evaluate({x.data(), static_cast<std::size_t>(grid.dim)}, u, nullptr, sn, cs);
    for (int a = 0; a < s.codim; ++a) out.state.heights[static_cast<std::size_t>(a)][node] = scale * u[static_cast<std::size_t>(a)];
  }
  // The sine series vanishes on the cube boundary; pin it exactly.
  for (std::size_t node = 0; node < grid.node_count(); ++node)
    if (grid.boundary_distance(node) == 0)
      for (auto& comp : out.state.heights) comp[node] = 0.0;
  out.halvings = halvings;
  out.scale = scale;
  return out;
}

}  // namespace

InitialData generate_initial(const Scenario& scenario) {
  scenario.validate();
  const GridSpec grid = scenario.grid();
  InitialData out;
  switch (scenario.generator) {
    case GeneratorKind::zero:
      out.state = GraphState::zeros(grid, scenario.codim);
      break;
    case GeneratorKind::linear:
      out.state = GraphState::zeros(grid, scenario.codim);
      for (std::size_t node = 0; node < grid.node_count(); ++node)
        for (int a = 0; a < scenario.codim; ++a) {
          double v = 0.0;
          for (int d = 0; d < grid.dim; ++d)
            v += scenario.slopes[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)] * grid.coordinate(node, d);
          out.state.heights[static_cast<std::size_t>(a)][node] = v;
        }
      break;
    case GeneratorKind::grim_reaper:
      out.state = GraphState::zeros(grid, 1);
      for (std::size_t node = 0; node < grid.node_count(); ++node)
        out.state.heights[0][node] = grim_reaper_exact(grid.coordinate(node, 0), 0.0);
      break;
    case GeneratorKind::fourier:
      out = fourier_initial(scenario);
      break;
  }
  out.lambda_sup = out.state.sup_norm();
  out.min_margin = area_decreasing_margin(metric_field(out.state));
  if (out.min_margin < scenario.margin) {
    throw MarginError("initial data has area-decreasing margin " + std::to_string(out.min_margin) + " < required " +
                      std::to_string(scenario.margin));
  }
  return out;
}

double cfl_dt(const GridSpec& grid, double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw std::invalid_argument("cfl_dt: sigma must be in (0, 1]");
  const double h = grid.spacing();
  return sigma * h * h / (2.0 * grid.dim);
}

double cfl_dt(const GraphState& state, double sigma) { return cfl_dt(state.grid, sigma); }

namespace {

// Inverse of the SPD metric g = I + J^T J for n <= 3 via the adjugate.
void inverse_metric(const double* g, int n, double* out) {
  if (n == 1) {
    out[0] = 1.0 / g[0];
    return;
  }
  if (n == 2) {
    const double det = g[0] * g[3] - g[1] * g[2];
    out[0] = g[3] / det;
    out[1] = -g[1] / det;
    out[2] = -g[2] / det;
    out[3] = g[0] / det;
    return;
  }
  const double c00 = g[4] * g[8] - g[5] * g[7];
  const double c01 = g[5] * g[6] - g[3] * g[8];
  const double c02 = g[3] * g[7] - g[4] * g[6];
  const double det = g[0] * c00 + g[1] * c01 + g[2] * c02;
  out[0] = c00 / det;
  out[1] = (g[2] * g[7] - g[1] * g[8]) / det;
  out[2] = (g[1] * g[5] - g[2] * g[4]) / det;
  out[3] = c01 / det;
  out[4] = (g[0] * g[8] - g[2] * g[6]) / det;
  out[5] = (g[2] * g[3] - g[0] * g[5]) / det;
  out[6] = c02 / det;
  out[7] = (g[1] * g[6] - g[0] * g[7]) / det;
  out[8] = (g[0] * g[4] - g[1] * g[3]) / det;
}

// g^{ij} d_ij u^a at an interior node, for every a.
void rate_at(const GraphState& s, std::size_t x, const std::array<std::size_t, kMaxGridDim>& st, double inv2h,
             double inv_h2, std::array<double, kMaxDim>& rate) {
  const int n = s.grid.dim;
  const int m = s.codim;
  std::array<double, kMaxDim * kMaxGridDim> jac{};
  for (int a = 0; a < m; ++a) {
    const auto& u = s.heights[static_cast<std::size_t>(a)];
    for (int i = 0; i < n; ++i)
      jac[static_cast<std::size_t>(a * n + i)] = (u[x + st[static_cast<std::size_t>(i)]] - u[x - st[static_cast<std::size_t>(i)]]) * inv2h;
  }
  std::array<double, 9> g{};
  std::array<double, 9> gi{};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = i == j ? 1.0 : 0.0;
      for (int a = 0; a < m; ++a) v += jac[static_cast<std::size_t>(a * n + i)] * jac[static_cast<std::size_t>(a * n + j)];
      g[static_cast<std::size_t>(i * n + j)] = v;
    }
  inverse_metric(g.data(), n, gi.data());
  for (int a = 0; a < m; ++a) {
    const auto& u = s.heights[static_cast<std::size_t>(a)];
    double r = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t si = st[static_cast<std::size_t>(i)];
      r += gi[static_cast<std::size_t>(i * n + i)] * (u[x + si] - 2.0 * u[x] + u[x - si]) * inv_h2;
      for (int j = i + 1; j < n; ++j) {
        const std::size_t sj = st[static_cast<std::size_t>(j)];
        const double dij = (u[x + si + sj] - u[x + si - sj] - u[x - si + sj] + u[x - si - sj]) * 0.25 * inv_h2;
        r += 2.0 * gi[static_cast<std::size_t>(i * n + j)] * dij;
      }
    }
    rate[static_cast<std::size_t>(a)] = r;
  }
}

}  // namespace

void mcf_rates(const GraphState& state, std::vector<std::vector<double>>& rates) {
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  rates.assign(static_cast<std::size_t>(state.codim), std::vector<double>(nodes, 0.0));
  std::array<std::size_t, kMaxGridDim> st{};
  for (int d = 0; d < grid.dim; ++d) st[static_cast<std::size_t>(d)] = grid.stride(d);
  const double h = grid.spacing();
  std::array<double, kMaxDim> rate{};
  for (std::size_t x = 0; x < nodes; ++x) {
    if (grid.boundary_distance(x) < 1) continue;
    rate_at(state, x, st, 1.0 / (2.0 * h), 1.0 / (h * h), rate);
    for (int a = 0; a < state.codim; ++a) rates[static_cast<std::size_t>(a)][x] = rate[static_cast<std::size_t>(a)];
  }
}

void step_into(const GraphState& state, double dt, GraphState& out, const BoundaryFn& boundary) {
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  out.grid = grid;
  out.codim = state.codim;
  out.heights.resize(state.heights.size());
  for (auto& comp : out.heights) comp.resize(nodes);
  out.time = state.time + dt;

  std::array<std::size_t, kMaxGridDim> st{};
  for (int d = 0; d < grid.dim; ++d) st[static_cast<std::size_t>(d)] = grid.stride(d);
  const double h = grid.spacing();
  const double inv2h = 1.0 / (2.0 * h);
  const double inv_h2 = 1.0 / (h * h);
  std::array<double, kMaxDim> rate{};
  bool finite = true;
  for (std::size_t x = 0; x < nodes; ++x) {
    if (grid.boundary_distance(x) < 1) {
      for (int a = 0; a < state.codim; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        out.heights[ua][x] = boundary ? boundary(a, x, out.time) : state.heights[ua][x];
      }
      continue;
    }
    rate_at(state, x, st, inv2h, inv_h2, rate);
    for (int a = 0; a < state.codim; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const double v = state.heights[ua][x] + dt * rate[ua];
      finite = finite && std::isfinite(v);
      out.heights[ua][x] = v;
    }
  }
  if (!finite) throw BlowUpError("nonfinite height after step to t = " + std::to_string(out.time), out.time);
}

GraphState step(const GraphState& state, double dt, const BoundaryFn& boundary) {
  GraphState out;
  step_into(state, dt, out, boundary);
  return out;
}

Trajectory run(const Scenario& scenario, const FlowConfig& config, const StepObserver& observer) {
  return run_from(generate_initial(scenario), scenario, config, observer);
}

Trajectory run_from(const InitialData& initial, const Scenario& scenario, const FlowConfig& config,
                    const StepObserver& observer) {
  config.validate();
  const GridSpec grid = initial.state.grid;

  BoundaryFn boundary;
  if (config.boundary == BoundaryMode::dirichlet_exact) {
    switch (scenario.generator) {
      case GeneratorKind::grim_reaper:
        boundary = [grid](int, std::size_t node, double t) { return grim_reaper_exact(grid.coordinate(node, 0), t); };
        break;
      case GeneratorKind::zero:
      case GeneratorKind::linear:
        break;  // stationary: the exact boundary is the initial boundary
      case GeneratorKind::fourier:
        throw std::invalid_argument("dirichlet_exact boundary needs a scenario with an exact solution");
    }
  }

  const double dt_max = cfl_dt(grid, config.dt_safety);
  long steps = static_cast<long>(std::ceil(config.t_end / dt_max - 1e-12));
  steps = std::max<long>(steps, 1);
  const long stride_frames = config.frames;
  steps = ((steps + stride_frames - 1) / stride_frames) * stride_frames;
  const long stride = steps / stride_frames;
  const double dt = config.t_end / static_cast<double>(steps);

  Trajectory traj;
  traj.dt = dt;
  traj.frame_dt = dt * static_cast<double>(stride);
  traj.steps = steps;
  traj.lambda_sup = initial.lambda_sup;
  traj.provenance = Provenance{scenario.name, generator_name(scenario.generator), scenario.seed, code_version()};

  auto push_frame = [&](const GraphState& s, const GraphState* prev) {
    traj.frames.push_back(s);
    traj.before.emplace_back();
    if (prev) traj.before.back().emplace(*prev);
    traj.after.emplace_back();
    traj.min_margin.push_back(area_decreasing_margin(metric_field(s)));
  };

  GraphState prev;
  GraphState cur = initial.state;
  cur.time = 0.0;
  GraphState next;
  if (observer) observer(cur);
  push_frame(cur, nullptr);
  bool pending_after = false;
  for (long s = 1; s <= steps; ++s) {
    step_into(cur, dt, next, boundary);
    next.time = static_cast<double>(s) * dt;
    if (observer) observer(next);
    if (pending_after) {
      traj.after.back().emplace(next);
      pending_after = false;
    }
    std::swap(prev, cur);
    std::swap(cur, next);
    if (s % stride == 0) {
      push_frame(cur, &prev);
      pending_after = s < steps;
    }
  }
  return traj;
}

GraphState parabolic_rescale(const GraphState& state, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("parabolic_rescale: Lambda must be >= 0");
  const double k = 1.0 + 2.0 * lambda;
  const double shift = (1.0 + 3.0 * lambda) / k;
  GraphState out = state;
  out.grid.extent = state.grid.extent / k;
  for (auto& comp : out.heights)
    for (double& v : comp) v = v / k + shift;
  out.time = state.time / (k * k);
  return out;
}

Trajectory parabolic_rescale(const Trajectory& trajectory, double lambda) {
  Trajectory out = trajectory;
  const double k = 1.0 + 2.0 * lambda;
  for (auto& f : out.frames) f = parabolic_rescale(f, lambda);
  for (auto& f : out.before)
    if (f) *f = parabolic_rescale(*f, lambda);
  for (auto& f : out.after)
    if (f) *f = parabolic_rescale(*f, lambda);
  out.dt = trajectory.dt / (k * k);
  out.frame_dt = trajectory.frame_dt / (k * k);
  return out;
}

}  // namespace mcflab
