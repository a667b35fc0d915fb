#include "mcflab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <stdexcept>

namespace mcflab {

std::optional<QuantityId> QuantityId::parse(const std::string& text) {
  if (text == "w") return QuantityId{QuantityKind::w};
  if (text == "phi") return QuantityId{QuantityKind::phi};
  if (text == "logdetS2") return QuantityId{QuantityKind::logdetS2};
  if (text == "varphi") return QuantityId{QuantityKind::varphi};
  if (text == "cm_cutoff") return QuantityId{QuantityKind::cm_cutoff};
  static const std::regex pair_re(R"(pair\(\s*(\d+)\s*,\s*(\d+)\s*\))");
  std::smatch match;
  if (std::regex_match(text, match, pair_re)) {
    const int i = std::stoi(match[1].str());
    const int j = std::stoi(match[2].str());
    if (i < 1 || j <= i) return std::nullopt;
    return QuantityId{QuantityKind::pair, i - 1, j - 1};
  }
  return std::nullopt;
}

std::string QuantityId::name() const {
  switch (kind) {
    case QuantityKind::w: return "w";
    case QuantityKind::phi: return "phi";
    case QuantityKind::logdetS2: return "logdetS2";
    case QuantityKind::pair: return "pair(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
    case QuantityKind::varphi: return "varphi";
    case QuantityKind::cm_cutoff: return "cm_cutoff";
    case QuantityKind::subharmonic_log_v: return "subharmonic_logv";
    case QuantityKind::subharmonic_w: return "subharmonic_w";
  }
  return "?";
}

std::vector<QuantityId> default_quantities(int n) {
  std::vector<QuantityId> q{{QuantityKind::w}, {QuantityKind::phi}, {QuantityKind::logdetS2}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) q.push_back(QuantityId{QuantityKind::pair, i, j});
  return q;
}

double default_radius_sq(const GraphState& initial) {
  double r2 = 1.0;
  for (const auto& comp : initial.heights) {
    double s = 0.0;
    for (double v : comp) s = std::max(s, std::abs(v));
    r2 += s * s;
  }
  return r2;
}

double default_tolerance(double h, double dt, double scale) {
  return 20.0 * (h * h + dt) * scale + kRoundoffTolerance;
}

ResidualSummary summarize(const ScalarField& slack, const std::vector<double>& scale, bool two_sided) {
  ResidualSummary s;
  std::vector<double> vals;
  double max_slack = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < slack.values.size(); ++x) {
    if (!slack.mask[x]) continue;
    const double v = slack.values[x];
    const double key = two_sided ? std::abs(v) : v;
    vals.push_back(key);
    max_slack = std::max(max_slack, key);
    s.max_abs = std::max(s.max_abs, std::abs(v));
    s.scale = std::max(s.scale, scale[x]);
  }
  s.count = vals.size();
  if (vals.empty()) return s;
  s.max_slack = max_slack;
  const auto k = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(vals.size() - 1)));
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(k), vals.end());
  s.q99 = vals[k];
  return s;
}

namespace {

struct SpectralFields {
  MetricField metric;
  ScalarField w;
  ScalarField phi;
  ScalarField logdet;
  std::vector<ScalarField> pairs;  // lexicographic pair order
  Mask area_decreasing;
};

SpectralFields spectral_fields(const GraphState& state, const VerifyParams& params) {
  SpectralFields f;
  f.metric = metric_field(state);
  const GridSpec& grid = state.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const int pairs = n * (n - 1) / 2;
  f.w = ScalarField::filled(nodes, 1.0, false);
  f.phi = ScalarField::filled(nodes, 1.0, false);
  f.logdet = ScalarField::filled(nodes, 0.0, false);
  f.pairs.assign(static_cast<std::size_t>(pairs), ScalarField::filled(nodes, 0.0, false));
  f.area_decreasing.assign(nodes, 0);
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!f.metric.mask()[x]) continue;
    f.w.values[x] = std::pow(f.metric.volume[x], 1.0 / n);
    f.w.mask[x] = 1;
    const SingularSpectrum sv = f.metric.spectrum(x);
    const AreaDecreasingReport rep = area_decreasing_report(sv);
    f.area_decreasing[x] = (n < 2 || rep.margin > 0.0) ? 1 : 0;
    if (rep.phi_defined()) {
      f.phi.values[x] = *rep.phi;
      f.phi.mask[x] = 1;
      f.logdet.values[x] = rep.log_det_s2();
      f.logdet.mask[x] = 1;
    }
    if (pairs == 0) continue;
    const double gap = params.gap_rel * (1.0 + sv.lambdas[0]);
    bool floor_ok = true;
    for (int p = 0; p < pairs; ++p) floor_ok = floor_ok && rep.s2_eigs[static_cast<std::size_t>(p)] >= params.pair_floor;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const auto p = static_cast<std::size_t>(pair_index(n, i, j));
        f.pairs[p].values[x] = rep.s2_eigs[p];
        bool separated = true;
        for (int k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          separated = separated && std::abs(sv.lambdas[k] - sv.lambdas[i]) >= gap &&
                      std::abs(sv.lambdas[k] - sv.lambdas[j]) >= gap;
        }
        f.pairs[p].mask[x] = (floor_ok && separated) ? 1 : 0;
      }
    }
  }
  return f;
}

std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; }));
}

// Squared positive-part base of the varphi cutoff, masked by base > floor.
ScalarField varphi_values(const GraphState& state, const CutoffParams& params) {
  ScalarField base = cutoff_base(state, params);
  for (double& v : base.values) v = v * v;
  return base;
}

// Shared bookkeeping for one residual on one frame.
struct Builder {
  ResidualField field;
  std::vector<double> scale;

  Builder(const QuantityId& q, double t, std::size_t nodes) {
    field.quantity = q;
    field.time = t;
    field.slack = ScalarField::filled(nodes, 0.0, false);
    scale.assign(nodes, 0.0);
  }
  void set(std::size_t x, double lhs, double rhs) {
    field.slack.values[x] = lhs - rhs;
    field.slack.mask[x] = 1;
    scale[x] = std::abs(lhs) + std::abs(rhs);
  }
  ResidualField finish() {
    field.summary = summarize(field.slack, scale, field.quantity.two_sided());
    return std::move(field);
  }
};

ResidualField residual_on_frame(const QuantityId& q, const FrameTriple& tri, const SpectralFields& fp,
                                const SpectralFields& fm, const SpectralFields& fn, const Mask& region,
                                const CutoffParams& varphi_params) {
  const GridSpec& grid = tri.mid.grid;
  const std::size_t nodes = grid.node_count();
  Builder b(q, tri.mid.time, nodes);
  b.field.region_count = count(region);

  auto heat_and_grad = [&](const ScalarField& p, const ScalarField& m, const ScalarField& nx) {
    return std::make_pair(heat_operator(tri, fm.metric, p, m, nx), mt_grad_sq(fm.metric, m));
  };

  switch (q.kind) {
    case QuantityKind::w: {
      const auto [H, G] = heat_and_grad(fp.w, fm.w, fn.w);
      Mask hyp = mask_and(region, fm.area_decreasing);
      b.field.hypothesis_count = count(hyp);
      for (std::size_t x = 0; x < nodes; ++x) {
        if (!hyp[x] || !H.mask[x] || !G.mask[x]) continue;
        b.set(x, H.values[x], -2.0 * G.values[x] / fm.w.values[x]);
      }
      break;
    }
    case QuantityKind::phi: {
      const auto [H, G] = heat_and_grad(fp.phi, fm.phi, fn.phi);
      Mask hyp = mask_and(region, fm.phi.mask);
      b.field.hypothesis_count = count(hyp);
      for (std::size_t x = 0; x < nodes; ++x) {
        if (!hyp[x] || !H.mask[x] || !G.mask[x]) continue;
        b.set(x, H.values[x], -G.values[x] / (2.0 * fm.phi.values[x]));
      }
      break;
    }
    case QuantityKind::logdetS2: {
      const auto [H, G] = heat_and_grad(fp.logdet, fm.logdet, fn.logdet);
      Mask hyp = mask_and(region, fm.logdet.mask);
      b.field.hypothesis_count = count(hyp);
      // Claim: H >= |grad L|^2 / 2, so slack = |grad L|^2 / 2 - H.
      for (std::size_t x = 0; x < nodes; ++x) {
        if (!hyp[x] || !H.mask[x] || !G.mask[x]) continue;
        b.set(x, 0.5 * G.values[x], H.values[x]);
      }
      break;
    }
    case QuantityKind::pair: {
      const int n = grid.dim;
      if (q.j >= n) throw std::invalid_argument("quantity " + q.name() + " needs n >= " + std::to_string(q.j + 1));
      const auto p = static_cast<std::size_t>(pair_index(n, q.i, q.j));
      const auto [H, G] = heat_and_grad(fp.pairs[p], fm.pairs[p], fn.pairs[p]);
      Mask hyp = mask_and(region, fm.pairs[p].mask);
      b.field.hypothesis_count = count(hyp);
      // Claim: H / s + |grad s|^2 / (2 s^2) >= 0.
      for (std::size_t x = 0; x < nodes; ++x) {
        if (!hyp[x] || !H.mask[x] || !G.mask[x]) continue;
        const double s = fm.pairs[p].values[x];
        b.set(x, -H.values[x] / s, 0.5 * G.values[x] / (s * s));
      }
      break;
    }
    case QuantityKind::varphi: {
      const ScalarField vp = varphi_values(tri.prev, varphi_params);
      const ScalarField vm = varphi_values(tri.mid, varphi_params);
      const ScalarField vn = varphi_values(tri.next, varphi_params);
      const auto [H, G] = heat_and_grad(vp, vm, vn);
      const Mask support = erode(grid, vm.mask, kStencilRadius);
      b.field.region_count = count(support);
      b.field.hypothesis_count = b.field.region_count;
      for (std::size_t x = 0; x < nodes; ++x) {
        if (!support[x] || !H.mask[x] || !G.mask[x]) continue;
        b.set(x, H.values[x], -0.5 * G.values[x] / vm.values[x]);
      }
      break;
    }
    case QuantityKind::cm_cutoff:
    case QuantityKind::subharmonic_log_v:
    case QuantityKind::subharmonic_w:
      throw std::logic_error("not a frame-local heat residual");
  }
  return b.finish();
}

// cm_cutoff on one frame of the rescaled trajectory. Values are divided by
// exp(-a |u(x)|^2 / t) at the evaluation node x.
ResidualField cm_residual(const QuantityId& q, const FrameTriple& tri, const MetricField& mid_metric, double a,
                          double r0) {
  const GridSpec& grid = tri.mid.grid;
  const std::size_t nodes = grid.node_count();
  const int n = grid.dim;
  const int m = tri.mid.codim;
  Builder b(q, tri.mid.time, nodes);

  CutoffParams cp;
  cp.kind = CutoffKind::cm;
  cp.weight = a;
  cp.radius_const = r0;
  const ScalarField eta_mid = cutoff_base(tri.mid, cp);
  const Mask support = erode(grid, eta_mid.mask, kStencilRadius);
  b.field.region_count = count(support);

  const GraphState* states[3] = {&tri.prev, &tri.mid, &tri.next};
  auto eta_at = [&](const GraphState& s, std::size_t y) {
    return std::max(0.0, r0 - grid.radius_sq(y) - 2.0 * n * s.time);
  };
  auto usq = [&](const GraphState& s, std::size_t y) {
    double v = 0.0;
    for (const auto& comp : s.heights) v += comp[y] * comp[y];
    return v;
  };

  std::size_t hyp_count = 0;
  for (std::size_t x = 0; x < nodes; ++x) {
    if (!support[x]) continue;
    bool in_range = true;
    for (const auto& comp : tri.mid.heights) in_range = in_range && comp[x] >= 1.0 && comp[x] <= 2.0;
    if (!in_range) continue;
    ++hyp_count;
    const double ref = a * usq(tri.mid, x) / tri.mid.time;
    const FrameValue value = [&](int f, std::size_t y) {
      const GraphState& s = *states[f + 1];
      return eta_at(s, y) * std::exp(ref - a * usq(s, y) / s.time);
    };
    const double lhs = heat_at(tri, mid_metric, x, value);

    const SingularFrame frame = singular_frame(mid_metric.jacobians.at(x));
    const double eta = eta_at(tri.mid, x);
    const double t = tri.mid.time;
    double rhs = a * eta * usq(tri.mid, x);
    for (int i = 0; i < std::min(n, m); ++i) {
      const double l = frame.spectrum.lambdas[static_cast<std::size_t>(i)];
      double ui = 0.0;
      for (int al = 0; al < m; ++al) ui += tri.mid.heights[static_cast<std::size_t>(al)][x] * frame.left(al, i);
      rhs += (-2.0 * a * a * eta * ui * ui * l * l + 8.0 * a * l * std::abs(ui)) / (1.0 + l * l);
    }
    rhs /= t * t;
    b.set(x, lhs, rhs);
  }
  b.field.hypothesis_count = hyp_count;
  return b.finish();
}

}  // namespace

std::vector<FrameResiduals> heat_residuals(const Trajectory& trajectory, std::span<const QuantityId> quantities,
                                           const VerifyParams& params) {
  if (trajectory.frames.size() < 3) throw std::invalid_argument("heat_residuals needs at least 3 frames");
  const GridSpec& grid = trajectory.frames.front().grid;
  for (const auto& q : quantities) {
    if (q.kind == QuantityKind::subharmonic_log_v || q.kind == QuantityKind::subharmonic_w)
      throw std::invalid_argument("quantity " + q.name() + " is not a heat residual");
    if (q.kind == QuantityKind::pair && (q.i < 0 || q.j <= q.i || q.j >= grid.dim))
      throw std::invalid_argument("quantity " + q.name() + " is not a pair of [1, " + std::to_string(grid.dim) + "]");
  }

  const bool need_cm = std::any_of(quantities.begin(), quantities.end(),
                                   [](const QuantityId& q) { return q.kind == QuantityKind::cm_cutoff; });
  std::optional<Trajectory> rescaled;
  if (need_cm) rescaled = parabolic_rescale(trajectory, trajectory.lambda_sup);
  const double a = params.cm_weight > 0.0 ? params.cm_weight : 4.0 * trajectory.frames.front().codim;
  const double r0 = params.radius_const.value_or(1.0 / (1.0 + 2.0 * trajectory.lambda_sup));

  CutoffParams varphi_params;
  varphi_params.kind = CutoffKind::varphi_sq;
  varphi_params.radius = params.radius > 0.0 ? params.radius : std::sqrt(default_radius_sq(trajectory.frames.front()));

  std::vector<FrameResiduals> out;
  std::vector<std::size_t> evaluated(quantities.size(), 0);
  for (std::size_t k = 0; k < trajectory.frames.size(); ++k) {
    if (!trajectory.has_triple(k)) continue;
    const FrameTriple tri = trajectory.triple(k);
    const SpectralFields fp = spectral_fields(tri.prev, params);
    const SpectralFields fm = spectral_fields(tri.mid, params);
    const SpectralFields fn = spectral_fields(tri.next, params);
    const Mask region = cutoff_field(tri.mid, varphi_params).mask;

    FrameResiduals fr;
    fr.frame = k;
    fr.time = tri.mid.time;
    for (std::size_t qi = 0; qi < quantities.size(); ++qi) {
      const QuantityId& q = quantities[qi];
      ResidualField field;
      if (q.kind == QuantityKind::cm_cutoff) {
        const FrameTriple rt = rescaled->triple(k);
        field = cm_residual(q, rt, metric_field(rt.mid), a, r0);
      } else {
        field = residual_on_frame(q, tri, fp, fm, fn, region, varphi_params);
      }
      evaluated[qi] += field.summary.count;
      fr.fields.push_back(std::move(field));
    }
    out.push_back(std::move(fr));
  }
  for (std::size_t qi = 0; qi < quantities.size(); ++qi)
    if (evaluated[qi] == 0) throw std::runtime_error("quantity " + quantities[qi].name() + " has an empty mask on every frame");
  return out;
}

SupMonitor::SupMonitor(const GraphState& initial, double radius)
    : radius_(radius > 0.0 ? radius : std::sqrt(default_radius_sq(initial))) {
  observe(initial);
  if (undefined_.front() > 0) {
    throw std::runtime_error("Phi is undefined at " + std::to_string(undefined_.front()) +
                             " nodes of the initial cutoff support");
  }
}

void SupMonitor::observe(const GraphState& state) {
  CutoffParams cp;
  cp.kind = CutoffKind::varphi_sq;
  cp.radius = radius_;
  const ScalarField base = cutoff_base(state, cp);
  const Mask interior = erode(state.grid, base.mask, kStencilRadius);
  const MetricField metric = metric_field(state);
  double full = 0.0, inner = 0.0, rfull = 0.0, rinner = 0.0;
  std::size_t undefined = 0;
  for (std::size_t x = 0; x < base.values.size(); ++x) {
    const double b = base.values[x];
    if (!(b > 0.0) || !metric.mask()[x]) continue;
    const AreaDecreasingReport rep = area_decreasing_report(metric.spectrum(x));
    if (!rep.phi_defined()) {
      ++undefined;
      continue;
    }
    const double b2 = b * b;
    const double b4 = b2 * b2;
    const double value = b4 * b4 * *rep.phi;
    const double root = b * std::pow(*rep.phi, 0.125);
    full = std::max(full, value);
    rfull = std::max(rfull, root);
    if (interior[x]) {
      inner = std::max(inner, value);
      rinner = std::max(rinner, root);
    }
  }
  times_.push_back(state.time);
  sup_full_.push_back(full);
  sup_interior_.push_back(inner);
  root_full_.push_back(rfull);
  root_interior_.push_back(rinner);
  undefined_.push_back(undefined);
}

namespace {
double max_increase(const std::vector<double>& v) {
  double d = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) d = std::max(d, v[i] - v[i - 1]);
  return d;
}
}  // namespace

double SupMonitor::max_forward_increase_full() const { return max_increase(sup_full_); }
double SupMonitor::max_forward_increase_interior() const { return max_increase(sup_interior_); }

SupMonitor weighted_sup_monitor(const Trajectory& trajectory, double radius) {
  if (trajectory.frames.empty()) throw std::invalid_argument("weighted_sup_monitor: empty trajectory");
  SupMonitor monitor(trajectory.frames.front(), radius);
  for (std::size_t k = 1; k < trajectory.frames.size(); ++k) monitor.observe(trajectory.frames[k]);
  return monitor;
}

MaxpointReport maxpoint_report(const Trajectory& rescaled, double a, double radius_const) {
  if (rescaled.frames.empty()) throw std::invalid_argument("maxpoint_report: empty trajectory");
  const int m = rescaled.frames.front().codim;
  const int n = rescaled.frames.front().grid.dim;
  if (!(a > 0.0)) a = 4.0 * m;
  if (!(radius_const > 0.0)) radius_const = 1.0 / (1.0 + 2.0 * rescaled.lambda_sup);

  auto eta_of = [&](const GraphState& s, std::size_t x) { return radius_const - s.grid.radius_sq(x) - 2.0 * n * s.time; };
  auto log_value = [&](const GraphState& s, const MetricField& metric, std::size_t x) {
    double usq = 0.0;
    for (const auto& comp : s.heights) usq += comp[x] * comp[x];
    return std::log(eta_of(s, x)) - a * usq / s.time + std::log(metric.volume[x]) / n;
  };

  MaxpointReport best;
  best.log_value = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t k = 0; k < rescaled.frames.size(); ++k) {
    const GraphState& s = rescaled.frames[k];
    if (!(s.time > 0.0)) continue;
    const MetricField metric = metric_field(s);
    for (std::size_t x = 0; x < s.grid.node_count(); ++x) {
      if (!metric.mask()[x] || !(eta_of(s, x) > 0.0)) continue;
      const double lv = log_value(s, metric, x);
      if (lv > best.log_value) {
        best.log_value = lv;
        best.frame = k;
        best.node = x;
        found = true;
      }
    }
  }
  if (!found || !std::isfinite(best.log_value)) throw std::runtime_error("phi w vanishes identically");

  const GraphState& s = rescaled.frames[best.frame];
  const GridSpec& grid = s.grid;
  const MetricField metric = metric_field(s);
  const std::size_t p = best.node;
  best.time = s.time;
  for (int d = 0; d < n; ++d) best.location.push_back(grid.coordinate(p, d));
  best.eta = eta_of(s, p);
  best.lambda1 = metric.lambdas[p * static_cast<std::size_t>(n)];
  best.product = best.eta * best.lambda1;
  best.limit = 8.0 * m;
  best.pass = best.product <= best.limit;

  CutoffParams cp;
  cp.kind = CutoffKind::cm;
  cp.weight = a;
  cp.radius_const = radius_const;
  const Mask interior = erode(grid, cutoff_base(s, cp).mask, kStencilRadius);
  best.boundary_attained = !interior[p];
  if (!best.boundary_attained) {
    const double h = grid.spacing();
    auto f = [&](std::size_t y) { return std::exp(log_value(s, metric, y) - best.log_value); };
    double g2 = 0.0;
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t si = grid.stride(i);
      const double gi = (f(p + si) - f(p - si)) / (2.0 * h);
      g2 += gi * gi;
      d2 = std::max(d2, std::abs(f(p + si) - 2.0 + f(p - si)) / (h * h));
      for (int j = i + 1; j < n; ++j) {
        const std::size_t sj = grid.stride(j);
        d2 = std::max(d2, std::abs(f(p + si + sj) - f(p + si - sj) - f(p - si + sj) + f(p - si - sj)) / (4.0 * h * h));
      }
    }
    best.gradient_norm = std::sqrt(g2);
    best.second_difference = d2;
    best.certificate = best.gradient_norm <= 5.0 * h * d2;
  }
  return best;
}

double gradient_bound_log(int n, int m, double lambda) {
  const double k = 1.0 + 2.0 * lambda;
  return n * std::log(32.0 * m) + n * std::log(k) + 64.0 * n * n * m * m * k * k;
}

BoundReport gradient_bound_report(const Trajectory& trajectory, double lambda) {
  if (trajectory.frames.empty()) throw std::invalid_argument("gradient_bound_report: empty trajectory");
  const GraphState& first = trajectory.frames.front();
  const int n = first.grid.dim;
  const int m = first.codim;
  const double target = 1.0 / (4.0 * n);
  const GraphState* frame = nullptr;
  for (const auto& f : trajectory.frames)
    if (std::abs(f.time - target) <= 1e-9 * target) frame = &f;
  if (!frame) throw std::runtime_error("trajectory has no frame at t = 1/(4n)");

  BoundReport r;
  r.n = n;
  r.m = m;
  r.lambda = lambda;
  r.time = frame->time;
  const MetricField metric = metric_field(*frame);
  const std::size_t o = frame->grid.origin();
  const Jacobian jac = metric.jacobians.at(o);
  r.measured = point_geometry(jac).du_norm;
  const AreaDecreasingReport rep = area_decreasing_report(metric.spectrum(o));
  r.phi_origin = rep.phi;
  r.margin_origin = rep.margin;
  r.log_bound = gradient_bound_log(n, m, lambda);
  r.bound = r.log_bound < 709.0 ? std::exp(r.log_bound) : std::numeric_limits<double>::infinity();
  r.log_k1 = n * std::log(32.0 * m) + n + 128.0 * n * n * m * m;
  r.k2 = n + 512.0 * n * n * m * m;
  r.log_k_form = r.log_k1 + r.k2 * lambda * lambda;
  r.pass = r.measured == 0.0 || std::log(r.measured) <= r.log_bound;
  return r;
}

RefinementResult refinement_verdict(std::span<const double> values, double threshold, double floor) {
  RefinementResult r;
  if (values.size() < 2) throw std::invalid_argument("refinement_verdict needs at least two levels");
  bool all_floor = values.front() <= floor;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    RefinementStep s;
    s.coarse = values[i];
    s.fine = values[i + 1];
    s.ratio = s.fine > 0.0 ? s.coarse / s.fine : std::numeric_limits<double>::infinity();
    s.order = std::log2(s.ratio);
    s.at_floor = s.fine <= floor;
    s.pass = s.at_floor || s.ratio >= threshold;
    all_floor = all_floor && s.at_floor;
    r.monotone = r.monotone && s.fine <= s.coarse;
    r.pass = r.pass && s.pass;
    r.steps.push_back(s);
  }
  if (all_floor) r.status = "at-floor";
  else if (!r.monotone && !r.pass) r.status = "non-monotone";
  else if (r.pass) r.status = "contracting";
  else r.status = "stalled";
  return r;
}

}  // namespace mcflab
