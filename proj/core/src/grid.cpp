#include "mcflab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcflab {

GridSpec GridSpec::make(int dim, int points_per_axis, double extent) {
  if (dim < 1 || dim > kMaxGridDim) {
    throw std::invalid_argument("grid dimension must be in [1, " + std::to_string(kMaxGridDim) + "], got " +
                                std::to_string(dim));
  }
  if (points_per_axis < 17 || points_per_axis % 2 == 0) {
    throw std::invalid_argument("points_per_axis must be an odd integer >= 17, got " +
                                std::to_string(points_per_axis));
  }
  if (!(extent > 0.0) || !std::isfinite(extent)) throw std::invalid_argument("grid extent must be positive");
  return GridSpec{dim, extent, points_per_axis};
}

std::size_t GridSpec::node_count() const {
  std::size_t count = 1;
  for (int d = 0; d < dim; ++d) count *= static_cast<std::size_t>(points_per_axis);
  return count;
}

std::size_t GridSpec::stride(int axis) const {
  std::size_t s = 1;
  for (int d = 0; d < axis; ++d) s *= static_cast<std::size_t>(points_per_axis);
  return s;
}

int GridSpec::axis_index(std::size_t node, int axis) const {
  return static_cast<int>((node / stride(axis)) % static_cast<std::size_t>(points_per_axis));
}

double GridSpec::coordinate(std::size_t node, int axis) const {
  const int centre = (points_per_axis - 1) / 2;
  return (axis_index(node, axis) - centre) * spacing();
}

double GridSpec::radius_sq(std::size_t node) const {
  double r2 = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double x = coordinate(node, d);
    r2 += x * x;
  }
  return r2;
}

int GridSpec::boundary_distance(std::size_t node) const {
  int dist = points_per_axis;
  for (int d = 0; d < dim; ++d) {
    const int i = axis_index(node, d);
    dist = std::min({dist, i, points_per_axis - 1 - i});
  }
  return dist;
}

std::size_t GridSpec::origin() const {
  const int centre = (points_per_axis - 1) / 2;
  std::size_t node = 0;
  for (int d = 0; d < dim; ++d) node += static_cast<std::size_t>(centre) * stride(d);
  return node;
}

std::size_t GridSpec::node_at(std::span<const int> indices) const {
  if (static_cast<int>(indices.size()) != dim) throw std::invalid_argument("node_at: index count != dim");
  std::size_t node = 0;
  for (int d = 0; d < dim; ++d) {
    const int i = indices[static_cast<std::size_t>(d)];
    if (i < 0 || i >= points_per_axis) throw std::out_of_range("node_at: index out of range");
    node += static_cast<std::size_t>(i) * stride(d);
  }
  return node;
}

GraphState GraphState::zeros(const GridSpec& grid, int codim, double time) {
  if (codim < 1 || codim > kMaxDim) throw std::invalid_argument("codimension must be in [1, " + std::to_string(kMaxDim) + "]");
  GraphState s;
  s.grid = grid;
  s.codim = codim;
  s.heights.assign(static_cast<std::size_t>(codim), std::vector<double>(grid.node_count(), 0.0));
  s.time = time;
  return s;
}

bool GraphState::finite() const {
  for (const auto& comp : heights)
    for (double x : comp)
      if (!std::isfinite(x)) return false;
  return true;
}

double GraphState::sup_norm() const {
  double s = 0.0;
  for (const auto& comp : heights)
    for (double x : comp) s = std::max(s, std::abs(x));
  return s;
}

ScalarField ScalarField::filled(std::size_t nodes, double value, bool in_support) {
  return ScalarField{std::vector<double>(nodes, value), Mask(nodes, in_support ? 1 : 0)};
}

std::size_t ScalarField::support_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; }));
}

Jacobian JacobianField::at(std::size_t node) const {
  Jacobian jac(codim, grid.dim);
  for (int a = 0; a < codim; ++a)
    for (int i = 0; i < grid.dim; ++i) jac(a, i) = entry(node, a, i);
  return jac;
}

JacobianField jacobian_field(const GraphState& state) {
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const int m = state.codim;
  const double inv2h = 1.0 / (2.0 * grid.spacing());

  JacobianField out;
  out.grid = grid;
  out.codim = m;
  out.entries.assign(nodes * static_cast<std::size_t>(m * n), 0.0);
  out.mask.assign(nodes, 0);

  std::array<std::size_t, kMaxGridDim> strides{};
  for (int d = 0; d < n; ++d) strides[d] = grid.stride(d);

  for (std::size_t node = 0; node < nodes; ++node) {
    if (grid.boundary_distance(node) < 1) continue;
    out.mask[node] = 1;
    double* row = &out.entries[node * static_cast<std::size_t>(m * n)];
    for (int a = 0; a < m; ++a) {
      const auto& u = state.heights[static_cast<std::size_t>(a)];
      for (int i = 0; i < n; ++i) row[a * n + i] = (u[node + strides[i]] - u[node - strides[i]]) * inv2h;
    }
  }
  return out;
}

SingularSpectrum MetricField::spectrum(std::size_t node) const {
  SingularSpectrum s;
  s.n = grid().dim;
  for (int i = 0; i < s.n; ++i) s.lambdas[i] = lambdas[node * static_cast<std::size_t>(s.n) + static_cast<std::size_t>(i)];
  return s;
}

MetricField metric_field(const GraphState& state) {
  MetricField out;
  out.jacobians = jacobian_field(state);
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  const auto n = static_cast<std::size_t>(grid.dim);
  out.inverse_metric.assign(nodes * n * n, 0.0);
  out.volume.assign(nodes, 1.0);
  out.lambdas.assign(nodes * n, 0.0);

  for (std::size_t node = 0; node < nodes; ++node) {
    if (!out.jacobians.mask[node]) continue;
    const Jacobian jac = out.jacobians.at(node);
    const PointGeometry geo = point_geometry(jac);
    const SingularSpectrum sv = singular_spectrum(jac);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        out.inverse_metric[node * n * n + i * n + j] = geo.inverse_metric(static_cast<int>(i), static_cast<int>(j));
      out.lambdas[node * n + i] = sv.lambdas[i];
    }
    out.volume[node] = geo.volume;
  }
  return out;
}

namespace {

std::array<std::size_t, kMaxGridDim> strides_of(const GridSpec& grid) {
  std::array<std::size_t, kMaxGridDim> s{};
  for (int d = 0; d < grid.dim; ++d) s[d] = grid.stride(d);
  return s;
}

// True when the node, its axis neighbours, and (if `diagonals`) its
// diagonal neighbours x +- e_i +- e_j are all in `mask`.
bool stencil_in(const Mask& mask, std::size_t node, const std::array<std::size_t, kMaxGridDim>& st, int n,
                bool diagonals) {
  if (!mask[node]) return false;
  for (int i = 0; i < n; ++i) {
    if (!mask[node + st[i]] || !mask[node - st[i]]) return false;
    if (!diagonals) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!mask[node + st[i] + st[j]] || !mask[node + st[i] - st[j]] || !mask[node - st[i] + st[j]] ||
          !mask[node - st[i] - st[j]])
        return false;
    }
  }
  return true;
}

}  // namespace

ScalarField mt_laplacian(const MetricField& metric, const ScalarField& f) {
  const GridSpec& grid = metric.grid();
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const auto nn = static_cast<std::size_t>(n * n);
  const double h = grid.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const auto st = strides_of(grid);
  const auto& F = f.values;

  // a^{ij} = v g^{ij}
  auto coef = [&](std::size_t node, int i, int j) {
    return metric.volume[node] * metric.inverse_metric[node * nn + static_cast<std::size_t>(i * n + j)];
  };

  ScalarField out = ScalarField::filled(nodes, 0.0, false);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (grid.boundary_distance(x) < 1) continue;
    if (!stencil_in(f.mask, x, st, n, true) || !stencil_in(metric.mask(), x, st, n, false)) continue;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t xp = x + st[i];
      const std::size_t xm = x - st[i];
      const double a_plus = 0.5 * (coef(x, i, i) + coef(xp, i, i));
      const double a_minus = 0.5 * (coef(x, i, i) + coef(xm, i, i));
      sum += (a_plus * (F[xp] - F[x]) - a_minus * (F[x] - F[xm])) * inv_h2;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double flux_p = coef(xp, i, j) * (F[xp + st[j]] - F[xp - st[j]]);
        const double flux_m = coef(xm, i, j) * (F[xm + st[j]] - F[xm - st[j]]);
        sum += (flux_p - flux_m) * 0.25 * inv_h2;
      }
    }
    out.values[x] = sum / metric.volume[x];
    out.mask[x] = 1;
  }
  return out;
}

ScalarField mt_laplacian(const GraphState& state, const ScalarField& f) { return mt_laplacian(metric_field(state), f); }

ScalarField mt_grad_dot(const MetricField& metric, const ScalarField& f, const ScalarField& g) {
  const GridSpec& grid = metric.grid();
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const auto nn = static_cast<std::size_t>(n * n);
  const double inv2h = 1.0 / (2.0 * grid.spacing());
  const auto st = strides_of(grid);

  ScalarField out = ScalarField::filled(nodes, 0.0, false);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (grid.boundary_distance(x) < 1 || !metric.mask()[x]) continue;
    if (!stencil_in(f.mask, x, st, n, false) || !stencil_in(g.mask, x, st, n, false)) continue;
    std::array<double, kMaxGridDim> df{};
    std::array<double, kMaxGridDim> dg{};
    for (int i = 0; i < n; ++i) {
      df[i] = (f.values[x + st[i]] - f.values[x - st[i]]) * inv2h;
      dg[i] = (g.values[x + st[i]] - g.values[x - st[i]]) * inv2h;
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += metric.inverse_metric[x * nn + static_cast<std::size_t>(i * n + j)] * df[i] * dg[j];
    out.values[x] = s;
    out.mask[x] = 1;
  }
  return out;
}

ScalarField mt_grad_sq(const MetricField& metric, const ScalarField& f) {
  ScalarField out = mt_grad_dot(metric, f, f);
  // g^{-1} is SPD, so the quadratic form is nonnegative up to rounding.
  for (double& v : out.values) v = std::max(v, 0.0);
  return out;
}

ScalarField mt_grad_sq(const GraphState& state, const ScalarField& f) { return mt_grad_sq(metric_field(state), f); }

ScalarField hessian_trace(const MetricField& metric, const ScalarField& f) {
  const GridSpec& grid = metric.grid();
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const auto nn = static_cast<std::size_t>(n * n);
  const double h = grid.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const auto st = strides_of(grid);
  const auto& F = f.values;

  ScalarField out = ScalarField::filled(nodes, 0.0, false);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (grid.boundary_distance(x) < 1 || !metric.mask()[x]) continue;
    if (!stencil_in(f.mask, x, st, n, true)) continue;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      s += metric.inverse_metric[x * nn + static_cast<std::size_t>(i * n + i)] *
           (F[x + st[i]] - 2.0 * F[x] + F[x - st[i]]) * inv_h2;
      for (int j = i + 1; j < n; ++j) {
        const double dij = (F[x + st[i] + st[j]] - F[x + st[i] - st[j]] - F[x - st[i] + st[j]] +
                            F[x - st[i] - st[j]]) *
                           0.25 * inv_h2;
        s += 2.0 * metric.inverse_metric[x * nn + static_cast<std::size_t>(i * n + j)] * dij;
      }
    }
    out.values[x] = s;
    out.mask[x] = 1;
  }
  return out;
}

ScalarField heat_operator(const FrameTriple& frames, const ScalarField& f_prev, const ScalarField& f_mid,
                          const ScalarField& f_next) {
  return heat_operator(frames, metric_field(frames.mid), f_prev, f_mid, f_next);
}

ScalarField heat_operator(const FrameTriple& frames, const MetricField& mid_metric, const ScalarField& f_prev,
                          const ScalarField& f_mid, const ScalarField& f_next) {
  const double dt_back = frames.mid.time - frames.prev.time;
  const double dt_fwd = frames.next.time - frames.mid.time;
  if (!(dt_back > 0.0) || std::abs(dt_back - dt_fwd) > 1e-9 * std::max(dt_back, dt_fwd)) {
    throw std::invalid_argument("heat_operator needs three frames equally spaced in time");
  }
  if (!(frames.prev.grid == frames.mid.grid) || !(frames.next.grid == frames.mid.grid)) {
    throw std::invalid_argument("heat_operator frames live on different grids");
  }
  const GridSpec& grid = frames.mid.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const int m = frames.mid.codim;
  const auto nn = static_cast<std::size_t>(n * n);
  const double inv2dt = 1.0 / (dt_back + dt_fwd);
  const double inv2h = 1.0 / (2.0 * grid.spacing());
  const auto st = strides_of(grid);

  const ScalarField lap = mt_laplacian(mid_metric, f_mid);
  ScalarField out = ScalarField::filled(nodes, 0.0, false);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!lap.mask[x] || !f_prev.mask[x] || !f_next.mask[x]) continue;
    const double dfdt = (f_next.values[x] - f_prev.values[x]) * inv2dt;

    // Tangential drift xi^k = -g^{kl} (d_t u^a)(d_l u^a).
    std::array<double, kMaxGridDim> b{};  // b_l = sum_a (d_t u^a) (d_l u^a)
    for (int a = 0; a < m; ++a) {
      const double ut = (frames.next.heights[static_cast<std::size_t>(a)][x] -
                         frames.prev.heights[static_cast<std::size_t>(a)][x]) *
                        inv2dt;
      for (int l = 0; l < n; ++l) b[l] += ut * mid_metric.jacobians.entry(x, a, l);
    }
    double drift = 0.0;
    for (int k = 0; k < n; ++k) {
      double xi = 0.0;
      for (int l = 0; l < n; ++l) xi += mid_metric.inverse_metric[x * nn + static_cast<std::size_t>(k * n + l)] * b[l];
      const double dfk = (f_mid.values[x + st[k]] - f_mid.values[x - st[k]]) * inv2h;
      drift += xi * dfk;
    }
    out.values[x] = dfdt - drift - lap.values[x];
    out.mask[x] = 1;
  }
  return out;
}

double heat_at(const FrameTriple& frames, const MetricField& mid_metric, std::size_t x, const FrameValue& value) {
  const double dt_back = frames.mid.time - frames.prev.time;
  const double dt_fwd = frames.next.time - frames.mid.time;
  if (!(dt_back > 0.0) || std::abs(dt_back - dt_fwd) > 1e-9 * std::max(dt_back, dt_fwd)) {
    throw std::invalid_argument("heat_at needs three frames equally spaced in time");
  }
  const GridSpec& grid = frames.mid.grid;
  const int n = grid.dim;
  const int m = frames.mid.codim;
  const auto nn = static_cast<std::size_t>(n * n);
  const double h = grid.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const double inv2h = 1.0 / (2.0 * h);
  const double inv2dt = 1.0 / (dt_back + dt_fwd);
  const auto st = strides_of(grid);
  auto coef = [&](std::size_t node, int i, int j) {
    return mid_metric.volume[node] * mid_metric.inverse_metric[node * nn + static_cast<std::size_t>(i * n + j)];
  };
  auto F = [&](std::size_t node) { return value(0, node); };

  double lap = 0.0;
  const double fx = F(x);
  for (int i = 0; i < n; ++i) {
    const std::size_t xp = x + st[i];
    const std::size_t xm = x - st[i];
    const double a_plus = 0.5 * (coef(x, i, i) + coef(xp, i, i));
    const double a_minus = 0.5 * (coef(x, i, i) + coef(xm, i, i));
    lap += (a_plus * (F(xp) - fx) - a_minus * (fx - F(xm))) * inv_h2;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double flux_p = coef(xp, i, j) * (F(xp + st[j]) - F(xp - st[j]));
      const double flux_m = coef(xm, i, j) * (F(xm + st[j]) - F(xm - st[j]));
      lap += (flux_p - flux_m) * 0.25 * inv_h2;
    }
  }
  lap /= mid_metric.volume[x];

  std::array<double, kMaxGridDim> b{};
  for (int a = 0; a < m; ++a) {
    const double ut = (frames.next.heights[static_cast<std::size_t>(a)][x] -
                       frames.prev.heights[static_cast<std::size_t>(a)][x]) *
                      inv2dt;
    for (int l = 0; l < n; ++l) b[l] += ut * mid_metric.jacobians.entry(x, a, l);
  }
  double drift = 0.0;
  for (int k = 0; k < n; ++k) {
    double xi = 0.0;
    for (int l = 0; l < n; ++l) xi += mid_metric.inverse_metric[x * nn + static_cast<std::size_t>(k * n + l)] * b[l];
    drift += xi * (F(x + st[k]) - F(x - st[k])) * inv2h;
  }
  return (value(1, x) - value(-1, x)) * inv2dt - drift - lap;
}

void CutoffParams::validate() const {
  switch (kind) {
    case CutoffKind::varphi_sq:
      if (!(radius > 0.0)) throw std::invalid_argument("cutoff radius R must be > 0");
      break;
    case CutoffKind::cm:
      if (!(weight >= 1.0)) throw std::invalid_argument("cutoff weight a must be >= 1");
      if (!(radius_const > 0.0)) throw std::invalid_argument("cutoff radius constant must be > 0");
      break;
    case CutoffKind::korevaar:
      if (!(u0 >= 1.0)) throw std::invalid_argument("Korevaar u0 must be >= 1");
      if (!(c1 >= 0.0)) throw std::invalid_argument("Korevaar C1 must be >= 0");
      break;
  }
}

ScalarField cutoff_base(const GraphState& state, const CutoffParams& params) {
  params.validate();
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const double t = state.time;
  ScalarField base = ScalarField::filled(nodes, 0.0, false);
  for (std::size_t x = 0; x < nodes; ++x) {
    const double r2 = grid.radius_sq(x);
    double b = 0.0;
    switch (params.kind) {
      case CutoffKind::varphi_sq: {
        double y2 = 0.0;
        for (const auto& u : state.heights) y2 += u[x] * u[x];
        b = params.radius * params.radius - r2 - y2 - 2.0 * n * t;
        break;
      }
      case CutoffKind::cm:
        b = params.radius_const - r2 - 2.0 * n * t;
        break;
      case CutoffKind::korevaar: {
        double ysum = 0.0;
        for (const auto& u : state.heights) ysum += u[x];
        b = ysum / (2.0 * params.u0) + 1.0 - r2;
        break;
      }
    }
    if (b > 0.0) {
      base.values[x] = b;
      base.mask[x] = b > kCutoffFloor ? 1 : 0;
    }
  }
  return base;
}

ScalarField cutoff_field(const GraphState& state, const CutoffParams& params) {
  if (params.kind == CutoffKind::cm && !(state.time > 0.0)) {
    throw std::invalid_argument("cm cutoff needs t > 0 (exp(-a|y|^2/t) is undefined at t = 0)");
  }
  ScalarField base = cutoff_base(state, params);
  ScalarField out;
  out.values.resize(base.values.size());
  for (std::size_t x = 0; x < base.values.size(); ++x) {
    const double b = base.values[x];
    double value = 0.0;
    switch (params.kind) {
      case CutoffKind::varphi_sq:
        value = b * b;
        break;
      case CutoffKind::cm: {
        double y2 = 0.0;
        for (const auto& u : state.heights) y2 += u[x] * u[x];
        value = b * std::exp(-params.weight * y2 / state.time);
        break;
      }
      case CutoffKind::korevaar:
        value = std::expm1(params.c1 * b);
        break;
    }
    out.values[x] = value;
  }
  out.mask = erode(state.grid, base.mask, kStencilRadius);
  return out;
}

Mask erode(const GridSpec& grid, const Mask& mask, int radius) {
  const std::size_t nodes = grid.node_count();
  Mask cur = mask;
  for (std::size_t x = 0; x < nodes; ++x)
    if (grid.boundary_distance(x) < radius) cur[x] = 0;
  // Box erosion is separable: erode along each axis in turn.
  for (int d = 0; d < grid.dim; ++d) {
    const std::size_t s = grid.stride(d);
    Mask next(nodes, 0);
    for (std::size_t x = 0; x < nodes; ++x) {
      if (!cur[x]) continue;
      const int i = grid.axis_index(x, d);
      if (i < radius || i > grid.points_per_axis - 1 - radius) continue;
      bool ok = true;
      for (int k = 1; k <= radius && ok; ++k) ok = cur[x + k * s] && cur[x - k * s];
      next[x] = ok ? 1 : 0;
    }
    cur = std::move(next);
  }
  return cur;
}

Mask mask_and(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask_and: size mismatch");
  Mask out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

}  // namespace mcflab
