#include "mcflab/mss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace mcflab {

const char* mss_data_name(MssDataKind kind) {
  switch (kind) {
    case MssDataKind::zero: return "zero";
    case MssDataKind::linear: return "linear";
    case MssDataKind::harmonic: return "harmonic";
  }
  return "?";
}

std::optional<MssDataKind> parse_mss_data(const std::string& name) {
  for (auto k : {MssDataKind::zero, MssDataKind::linear, MssDataKind::harmonic})
    if (name == mss_data_name(k)) return k;
  return std::nullopt;
}

void MssData::validate() const {
  (void)GridSpec::make(dim, points, extent);
  if (codim < 1 || codim > kMaxDim) throw std::invalid_argument("codim must be in [1, " + std::to_string(kMaxDim) + "]");
  if (kind == MssDataKind::linear) {
    if (static_cast<int>(slopes.size()) != codim) throw std::invalid_argument("linear slopes need codim rows");
    for (const auto& row : slopes)
      if (static_cast<int>(row.size()) != dim) throw std::invalid_argument("linear slopes need dim columns");
  }
  if (kind == MssDataKind::harmonic) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw std::invalid_argument("harmonic amplitude must be >= 0");
    if (!(frequency > 0.0) || !std::isfinite(frequency)) throw std::invalid_argument("harmonic frequency must be > 0");
  }
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Orthonormal p, r in R^n (n >= 2) from seeded Gram-Schmidt.
void orthonormal_pair(int n, std::mt19937_64& rng, std::array<double, kMaxGridDim>& p, std::array<double, kMaxGridDim>& r) {
  if (n == 2) {
    const double beta = 2.0 * std::numbers::pi * uniform01(rng);
    p = {std::cos(beta), std::sin(beta), 0.0};
    r = {-std::sin(beta), std::cos(beta), 0.0};
    return;
  }
  auto draw = [&](std::array<double, kMaxGridDim>& v) {
    for (int d = 0; d < n; ++d) v[static_cast<std::size_t>(d)] = 2.0 * uniform01(rng) - 1.0;
  };
  auto norm = [&](std::array<double, kMaxGridDim>& v) {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += v[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
    s = std::sqrt(s);
    for (int d = 0; d < n; ++d) v[static_cast<std::size_t>(d)] /= s;
  };
  draw(p);
  norm(p);
  draw(r);
  double dot = 0.0;
  for (int d = 0; d < n; ++d) dot += p[static_cast<std::size_t>(d)] * r[static_cast<std::size_t>(d)];
  for (int d = 0; d < n; ++d) r[static_cast<std::size_t>(d)] -= dot * p[static_cast<std::size_t>(d)];
  norm(r);
}

}  // namespace

MssProblem make_mss_problem(const MssData& data) {
  data.validate();
  const GridSpec grid = GridSpec::make(data.dim, data.points, data.extent);
  MssProblem prob;
  prob.initial = GraphState::zeros(grid, data.codim);
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;

  switch (data.kind) {
    case MssDataKind::zero:
      break;
    case MssDataKind::linear:
      for (std::size_t x = 0; x < nodes; ++x)
        for (int a = 0; a < data.codim; ++a) {
          double v = 0.0;
          for (int d = 0; d < n; ++d) v += data.slopes[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)] * grid.coordinate(x, d);
          prob.initial.heights[static_cast<std::size_t>(a)][x] = v;
        }
      break;
    case MssDataKind::harmonic: {
      std::mt19937_64 rng(data.seed);
      std::array<double, kMaxGridDim> p{}, r{};
      if (n >= 2) orthonormal_pair(n, rng, p, r);
      for (int a = 0; a < data.codim; ++a) {
        const double theta = 2.0 * std::numbers::pi * uniform01(rng);
        auto& u = prob.initial.heights[static_cast<std::size_t>(a)];
        for (std::size_t x = 0; x < nodes; ++x) {
          if (n == 1) {
            u[x] = data.amplitude * (std::cos(theta) + data.frequency * std::sin(theta) * grid.coordinate(x, 0));
            continue;
          }
          double px = 0.0, rx = 0.0;
          for (int d = 0; d < n; ++d) {
            px += p[static_cast<std::size_t>(d)] * grid.coordinate(x, d);
            rx += r[static_cast<std::size_t>(d)] * grid.coordinate(x, d);
          }
          u[x] = data.amplitude * std::exp(data.frequency * px) * std::cos(data.frequency * rx + theta);
        }
      }
      break;
    }
  }

  prob.offsets.assign(static_cast<std::size_t>(data.codim), 0.0);
  if (data.translate) {
    for (int a = 0; a < data.codim; ++a) {
      auto& u = prob.initial.heights[static_cast<std::size_t>(a)];
      double sup = 0.0;
      for (double v : u) sup = std::max(sup, std::abs(v));
      const double off = -sup - 1.0;
      for (double& v : u) v += off;
      prob.offsets[static_cast<std::size_t>(a)] = off;
    }
  }
  return prob;
}

double mss_residual(const GraphState& state) {
  std::vector<std::vector<double>> rates;
  mcf_rates(state, rates);
  double r = 0.0;
  for (const auto& comp : rates)
    for (double v : comp) r = std::max(r, std::abs(v));
  return r;
}

RelaxResult relax_to_minimal(const MssProblem& problem, const RelaxOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("relax tol must be > 0");
  if (options.max_steps < 0) throw std::invalid_argument("relax max_steps must be >= 0");
  const GridSpec& grid = problem.initial.grid;
  const double dt = cfl_dt(grid, options.sigma);
  const std::size_t nodes = grid.node_count();

  RelaxResult out;
  GraphState cur = problem.initial;
  GraphState next;
  double last = std::numeric_limits<double>::infinity();
  int growth = 0;
  for (long s = 0;; ++s) {
    step_into(cur, dt, next);
    // The forward Euler increment is dt times the strong residual of `cur`.
    double res = 0.0;
    for (int a = 0; a < cur.codim; ++a) {
      const auto& u0 = cur.heights[static_cast<std::size_t>(a)];
      const auto& u1 = next.heights[static_cast<std::size_t>(a)];
      for (std::size_t x = 0; x < nodes; ++x) res = std::max(res, std::abs(u1[x] - u0[x]));
    }
    res /= dt;
    out.history.push_back(res);
    if (res <= options.tol) {
      out.converged = true;
      out.residual = res;
      out.steps = s;
      break;
    }
    if (s == options.max_steps) {
      out.residual = res;
      out.steps = s;
      break;
    }
    growth = res > last ? growth + 1 : 0;
    if (growth >= 1000) throw DivergenceError("MSS relaxation diverged after " + std::to_string(s) + " steps");
    last = res;
    std::swap(cur, next);
  }
  cur.time = 0.0;
  out.state = std::move(cur);
  return out;
}

ResidualField subharmonic_residual(const GraphState& state, SubharmonicForm form) {
  const MetricField metric = metric_field(state);
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const double h = grid.spacing();
  const double ball = grid.extent - 2.0 * h;

  ScalarField f = ScalarField::filled(nodes, 0.0, false);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!metric.mask()[x]) continue;
    f.values[x] = form == SubharmonicForm::log_v ? std::log(metric.volume[x]) : std::pow(metric.volume[x], 1.0 / n);
    f.mask[x] = 1;
  }
  const ScalarField lap = hessian_trace(metric, f);
  const ScalarField grad = mt_grad_sq(metric, f);

  ResidualField out;
  out.quantity = QuantityId{form == SubharmonicForm::log_v ? QuantityKind::subharmonic_log_v : QuantityKind::subharmonic_w};
  out.slack = ScalarField::filled(nodes, 0.0, false);
  std::vector<double> scale(nodes, 0.0);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!lap.mask[x] || !grad.mask[x] || grid.radius_sq(x) >= ball * ball) continue;
    ++out.region_count;
    bool hyp = true;
    for (int i = 0; i < n && hyp; ++i)
      for (int j = i + 1; j < n && hyp; ++j)
        hyp = metric.lambdas[x * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] *
                  metric.lambdas[x * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] <=
              1.0;
    if (!hyp) continue;
    ++out.hypothesis_count;
    const double rhs = form == SubharmonicForm::log_v ? grad.values[x] / n : 2.0 * grad.values[x] / f.values[x];
    out.slack.values[x] = rhs - lap.values[x];
    out.slack.mask[x] = 1;
    scale[x] = std::abs(rhs) + std::abs(lap.values[x]);
  }
  out.summary = summarize(out.slack, scale, false);
  if (out.summary.count == 0) throw std::runtime_error("subharmonic residual has an empty mask");
  return out;
}

KorevaarParams KorevaarParams::make(int n, double u0) {
  if (!(u0 >= 1.0)) throw std::invalid_argument("Korevaar u0 must be >= 1");
  return KorevaarParams{u0, 300.0 * n * u0 * u0};
}

double korevaar_c2(int n, double u0) {
  return std::pow(2.0, (n - 1.0) / (2.0 * n)) * std::pow(1.0 + 64.0 * u0 * u0, 1.0 / (2.0 * n));
}

double log_expm1(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("log_expm1 needs x > 0");
  return x > 30.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
}

KorevaarReport korevaar_report(const GraphState& state, double u0) {
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  for (const auto& comp : state.heights)
    for (double v : comp)
      if (v > -1.0) throw std::invalid_argument("Korevaar argument needs every height <= -1");

  const std::size_t o = grid.origin();
  double sum0 = 0.0;
  for (const auto& comp : state.heights) sum0 += comp[o];
  if (!(u0 > 0.0)) u0 = -sum0;

  KorevaarReport r;
  r.params = KorevaarParams::make(n, u0);
  const double c1 = r.params.c1;
  r.c2 = korevaar_c2(n, u0);

  CutoffParams cp;
  cp.kind = CutoffKind::korevaar;
  cp.u0 = u0;
  cp.c1 = c1;
  const ScalarField base = cutoff_base(state, cp);
  const MetricField metric = metric_field(state);

  r.phi_origin = base.values[o];
  r.log_eta_origin = log_expm1(c1 * r.phi_origin);
  r.w_origin = std::pow(metric.volume[o], 1.0 / n);
  r.du_origin = point_geometry(metric.jacobians.at(o)).du_norm;

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!metric.mask()[x] || !(base.values[x] > 0.0)) continue;
    const double v = log_expm1(c1 * base.values[x]) + std::log(metric.volume[x]) / n;
    if (v > best) {
      best = v;
      r.node = x;
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("Korevaar cutoff vanishes on the grid");
  r.log_eta_w = best;
  for (int d = 0; d < n; ++d) r.location.push_back(grid.coordinate(r.node, d));
  r.lambda1 = metric.lambdas[r.node * static_cast<std::size_t>(n)];
  r.boundary_attained = !erode(grid, base.mask, kStencilRadius)[r.node];

  const double log_c2 = std::log(r.c2);
  r.lambda_pass = r.lambda1 <= 8.0 * u0;
  r.max_pass = r.log_eta_w <= log_c2 + c1;
  r.chain_pass = log_expm1(0.5 * c1) + std::log(r.w_origin) <= log_c2 + c1;
  r.log_du_bound = n * (log_c2 + c1 - log_expm1(0.5 * c1));
  r.du_pass = r.du_origin == 0.0 || std::log(r.du_origin) <= r.log_du_bound;
  return r;
}

}  // namespace mcflab
