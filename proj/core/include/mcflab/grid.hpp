#pragma once

// Discrete differential geometry of a graph y = u(x) sampled on a regular
// tensor grid over the cube [-L, L]^n: Jacobian fields, the induced metric,
// the Laplace-Beltrami operator of the graph, its gradient norm, the heat
// operator along the mean curvature flow, and the cutoff functions used to
// localize maximum-principle arguments.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mcflab/smallalg.hpp"

namespace mcflab {

/// Largest domain dimension supported by grid fields.
inline constexpr int kMaxGridDim = 3;

/// Byte-per-node support mask; nonzero means the node is in the support.
using Mask = std::vector<std::uint8_t>;

struct GridSpec {
  int dim = 1;
  double extent = 1.0;  // half-width L of the cube
  int points_per_axis = 17;

  /// Validated constructor: dim in [1, kMaxGridDim], odd points >= 17, extent > 0.
  static GridSpec make(int dim, int points_per_axis, double extent = 1.0);

  double spacing() const { return 2.0 * extent / (points_per_axis - 1); }
  std::size_t node_count() const;
  std::size_t stride(int axis) const;
  int axis_index(std::size_t node, int axis) const;
  /// Coordinate (i - c) h with c the centre index, so the origin is exactly 0.
  double coordinate(std::size_t node, int axis) const;
  double radius_sq(std::size_t node) const;
  /// Minimum number of nodes between `node` and the domain boundary.
  int boundary_distance(std::size_t node) const;
  std::size_t origin() const;
  /// Node with the given per-axis indices.
  std::size_t node_at(std::span<const int> indices) const;

  bool operator==(const GridSpec&) const = default;
};

/// The evolving object: heights u^alpha on every grid node at time t.
struct GraphState {
  GridSpec grid;
  int codim = 1;
  std::vector<std::vector<double>> heights;  // heights[alpha][node]
  double time = 0.0;

  static GraphState zeros(const GridSpec& grid, int codim, double time = 0.0);
  bool finite() const;
  /// max over alpha of max |u^alpha|
  double sup_norm() const;
};

struct ScalarField {
  std::vector<double> values;
  Mask mask;

  static ScalarField filled(std::size_t nodes, double value, bool in_support = true);
  std::size_t support_count() const;
};

/// Central-difference Jacobians; nodes within one node of the boundary are
/// masked out.
struct JacobianField {
  GridSpec grid;
  int codim = 1;
  std::vector<double> entries;  // per node, codim x dim row-major
  Mask mask;

  Jacobian at(std::size_t node) const;
  double entry(std::size_t node, int alpha, int axis) const {
    return entries[node * static_cast<std::size_t>(codim * grid.dim) + static_cast<std::size_t>(alpha * grid.dim + axis)];
  }
};

JacobianField jacobian_field(const GraphState& state);

/// Per-node induced metric data: inverse metric g^{ij}, volume element v,
/// and singular values of du, all on the Jacobian mask.
struct MetricField {
  JacobianField jacobians;
  std::vector<double> inverse_metric;  // per node, dim x dim
  std::vector<double> volume;          // v
  std::vector<double> lambdas;         // per node, dim singular values (descending)

  const GridSpec& grid() const { return jacobians.grid; }
  const Mask& mask() const { return jacobians.mask; }
  double g_inv(std::size_t node, int i, int j) const {
    const auto d = static_cast<std::size_t>(grid().dim);
    return inverse_metric[node * d * d + static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j)];
  }
  SingularSpectrum spectrum(std::size_t node) const;
};

MetricField metric_field(const GraphState& state);

/// Laplace-Beltrami operator of the graph in divergence form
/// (1/v) d_i (v g^{ij} d_j F), with face-averaged v g^{ii} on the diagonal
/// and node-centred cross terms. The output mask requires F and the metric
/// on the whole stencil.
ScalarField mt_laplacian(const MetricField& metric, const ScalarField& f);
ScalarField mt_laplacian(const GraphState& state, const ScalarField& f);

/// |grad^{M} F|^2 = g^{ij} d_i F d_j F with central differences.
ScalarField mt_grad_sq(const MetricField& metric, const ScalarField& f);
ScalarField mt_grad_sq(const GraphState& state, const ScalarField& f);

/// g^{ij} d_i F d_j G, the induced inner product of two gradients.
ScalarField mt_grad_dot(const MetricField& metric, const ScalarField& f, const ScalarField& g);

/// Non-divergence trace g^{ij} d_ij F. Coincides with the Laplace-Beltrami
/// operator exactly when the graph is minimal.
ScalarField hessian_trace(const MetricField& metric, const ScalarField& f);

/// Three consecutive frames at equal time spacing.
struct FrameTriple {
  const GraphState& prev;
  const GraphState& mid;
  const GraphState& next;

  double spacing() const { return 0.5 * (next.time - prev.time); }
};

/// (d_t - Laplace-Beltrami) F along the parametric (normal) flow. The time
/// derivative at fixed x is corrected by the tangential drift of the
/// nonparametric gauge: D_t F = d_t F - g^{kl} (d_t u^a)(d_l u^a) d_k F.
/// Throws std::invalid_argument if the frames are not equally spaced.
ScalarField heat_operator(const FrameTriple& frames, const ScalarField& f_prev, const ScalarField& f_mid,
                          const ScalarField& f_next);
/// Same, reusing a metric already computed for `frames.mid`.
ScalarField heat_operator(const FrameTriple& frames, const MetricField& mid_metric, const ScalarField& f_prev,
                          const ScalarField& f_mid, const ScalarField& f_next);

/// Value of a time-indexed field: (frame in {-1, 0, 1}, node) -> F.
using FrameValue = std::function<double(int, std::size_t)>;

/// heat_operator evaluated at one node for a field given pointwise. The
/// caller guarantees that the node is interior, that the metric is available
/// on the stencil, and that `value` is meaningful on the whole stencil. Lets
/// callers rescale F per node, e.g. to keep exponentially small cutoffs in
/// range.
double heat_at(const FrameTriple& frames, const MetricField& mid_metric, std::size_t node, const FrameValue& value);

enum class CutoffKind {
  varphi_sq,  // (R^2 - |z|^2 - 2 n t)_+^2
  cm,         // eta exp(-a |y|^2 / t), eta = (r0 - |x|^2 - 2 n t)_+
  korevaar,   // exp(C1 phi~) - 1, phi~ = (sum_a y^a / (2 u0) + 1 - |x|^2)_+
};

struct CutoffParams {
  CutoffKind kind = CutoffKind::varphi_sq;
  double radius = 1.0;        // R
  double weight = 1.0;        // a >= 1
  double radius_const = 1.0;  // r0
  double u0 = 1.0;
  double c1 = 0.0;

  void validate() const;
};

/// Threshold on the positive-part base of a cutoff below which nodes are
/// treated as outside the support.
inline constexpr double kCutoffFloor = 1e-8;
/// Stencil radius (nodes) removed from the domain boundary and from the
/// cutoff's zero set when forming residual support masks.
inline constexpr int kStencilRadius = 2;

/// The positive-part base of a cutoff (before squaring / exponential
/// weighting / composition with f), with no mask erosion.
ScalarField cutoff_base(const GraphState& state, const CutoffParams& params);

/// Cutoff values and their residual support mask: base > kCutoffFloor on the
/// whole kStencilRadius box around the node, and the node at least
/// kStencilRadius from the domain boundary. Throws for kind cm at t <= 0.
ScalarField cutoff_field(const GraphState& state, const CutoffParams& params);

/// Box (Chebyshev) erosion of a mask by `radius` nodes; nodes closer than
/// `radius` to the domain boundary are removed as well.
Mask erode(const GridSpec& grid, const Mask& mask, int radius);

Mask mask_and(const Mask& a, const Mask& b);

}  // namespace mcflab
