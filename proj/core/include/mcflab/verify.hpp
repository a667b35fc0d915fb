#pragma once

// Numerical residuals of the differential inequalities satisfied along
// area-decreasing graphical mean curvature flow, the weighted monotonicity
// monitor, the max-point bound for the Colding-Minicozzi type cutoff, and the
// explicit interior gradient bound.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcflab/flow.hpp"
#include "mcflab/grid.hpp"

namespace mcflab {

enum class QuantityKind { w, phi, logdetS2, pair, varphi, cm_cutoff, subharmonic_log_v, subharmonic_w };

/// Slack convention: every claim reads slack <= 0, except varphi which is an
/// identity (slack == 0).
///   w         (d_t - Lap) w + 2 |grad w|^2 / w
///   phi       (d_t - Lap) Phi + |grad Phi|^2 / (2 Phi)
///   logdetS2  |grad L|^2 / 2 - (d_t - Lap) L,          L = log det S^[2]
///   pair      -( (d_t - Lap) s / s + |grad s|^2 / (2 s^2) ),  s = S_ii + S_jj
///   varphi    (d_t - Lap) phi + |grad phi|^2 / (2 phi),  phi = (R^2 - |z|^2 - 2nt)_+^2
///   cm_cutoff (d_t - Lap) phi - RHS,  phi = eta exp(-a|y|^2/t), in the rescaled gauge;
///             reported divided by exp(-a|u|^2/t) at the node
/// The subharmonic kinds label elliptic residuals of the mss module and are
/// not heat residuals.
struct QuantityId {
  QuantityKind kind = QuantityKind::w;
  int i = 0;  // pair indices, 0-based, i < j
  int j = 1;

  /// "w", "phi", "logdetS2", "pair(1,2)" (1-based), "varphi", "cm_cutoff".
  static std::optional<QuantityId> parse(const std::string& text);
  std::string name() const;
  bool two_sided() const { return kind == QuantityKind::varphi; }
  bool operator==(const QuantityId&) const = default;
};

/// w, phi, logdetS2 and every pair(i,j) for dimension n.
std::vector<QuantityId> default_quantities(int n);

struct ResidualSummary {
  double max_slack = 0.0;  // over the mask; two-sided quantities use |slack|
  double max_abs = 0.0;
  double q99 = 0.0;
  double scale = 0.0;  // max over the mask of |LHS| + |RHS|
  std::size_t count = 0;

  double max_positive() const { return max_slack > 0.0 ? max_slack : 0.0; }
};

struct ResidualField {
  QuantityId quantity;
  double time = 0.0;
  ScalarField slack;
  ResidualSummary summary;
  std::size_t region_count = 0;      // cutoff-supported nodes
  std::size_t hypothesis_count = 0;  // of those, nodes meeting the hypothesis
};

struct VerifyParams {
  double radius = 0.0;                     // R for varphi; <= 0 means R^2 = 1 + sum_a ||u^a(., 0)||_inf^2
  double cm_weight = 0.0;                  // a for cm_cutoff; <= 0 means 4m
  std::optional<double> radius_const;      // r0 for cm_cutoff; default 1/(1 + 2 Lambda)
  double gap_rel = 1e-6;                   // pair gap threshold gap_rel (1 + l_1)
  double pair_floor = 1e-6;                // all pair sums must be >= this for pair(i,j)
};

/// R^2 = 1 + sum_a ||u^a||_inf^2.
double default_radius_sq(const GraphState& initial);

struct FrameResiduals {
  std::size_t frame = 0;
  double time = 0.0;
  std::vector<ResidualField> fields;  // one per requested quantity
};

/// Residual fields for every frame that has neighbours one step away.
/// cm_cutoff is evaluated on the parabolically rescaled trajectory.
/// Throws std::invalid_argument for an invalid pair index and
/// std::runtime_error if a quantity has an empty mask on every frame.
std::vector<FrameResiduals> heat_residuals(const Trajectory& trajectory, std::span<const QuantityId> quantities,
                                           const VerifyParams& params = {});

/// Summary of a slack field on a mask; `two_sided` uses |slack| for max_slack.
ResidualSummary summarize(const ScalarField& slack, const std::vector<double>& scale, bool two_sided);

/// Absolute allowance for rounding in difference quotients.
inline constexpr double kRoundoffTolerance = 1e-9;

/// Default single-level tolerance 20 (h^2 + dt) scale + kRoundoffTolerance.
double default_tolerance(double h, double dt, double scale);

/// sup over nodes of varphi^4 Phi and of (R^2 - |z|^2 - 2nt)_+ Phi^{1/8},
/// both on all nodes with a Jacobian ("full") and on the eroded cutoff
/// support ("interior").
class SupMonitor {
 public:
  /// Throws std::runtime_error if Phi is undefined somewhere on the support
  /// of the initial state. radius <= 0 selects the default R.
  SupMonitor(const GraphState& initial, double radius = 0.0);

  void observe(const GraphState& state);

  double radius() const { return radius_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& sup_full() const { return sup_full_; }
  const std::vector<double>& sup_interior() const { return sup_interior_; }
  const std::vector<double>& root_full() const { return root_full_; }
  const std::vector<double>& root_interior() const { return root_interior_; }
  /// Nodes of the support where Phi was undefined, per observation.
  const std::vector<std::size_t>& undefined_counts() const { return undefined_; }

  /// max over consecutive observations of value(t + dt) - value(t); 0 for
  /// fewer than two observations.
  double max_forward_increase_full() const;
  double max_forward_increase_interior() const;

 private:
  double radius_;
  std::vector<double> times_, sup_full_, sup_interior_, root_full_, root_interior_;
  std::vector<std::size_t> undefined_;
};

/// Monitor over the stored frames only.
SupMonitor weighted_sup_monitor(const Trajectory& trajectory, double radius = 0.0);

struct MaxpointReport {
  std::size_t frame = 0;
  double time = 0.0;
  std::size_t node = 0;
  std::vector<double> location;
  double log_value = 0.0;  // log(phi w) at p
  double eta = 0.0;
  double lambda1 = 0.0;
  double product = 0.0;  // eta(p) lambda_1(p)
  double limit = 0.0;    // 8m
  bool boundary_attained = false;
  double gradient_norm = 0.0;     // |grad (phi w)| / (phi w)(p), central differences
  double second_difference = 0.0; // max |D^2 (phi w)| / (phi w)(p) at p
  bool certificate = false;       // gradient_norm <= 5 h second_difference
  bool pass = false;              // product <= limit (only meaningful if interior)
};

/// Argmax of phi w = eta exp(-a |u|^2 / t) w over nodes with a Jacobian and
/// frames with t > 0, in the log domain. `trajectory` must already be in the
/// rescaled gauge. a <= 0 selects 4m; radius_const <= 0 selects 1/(1 + 2 Lambda).
/// Throws std::runtime_error if phi w vanishes identically.
MaxpointReport maxpoint_report(const Trajectory& rescaled, double a = 0.0, double radius_const = 0.0);

struct BoundReport {
  int n = 0;
  int m = 0;
  double lambda = 0.0;
  double time = 0.0;
  double measured = 0.0;   // |du|(0, t)
  double log_bound = 0.0;  // log of (32m)^n (1+2L)^n exp(64 n^2 m^2 (1+2L)^2)
  double bound = 0.0;      // exp(log_bound), +inf when it overflows
  double log_k1 = 0.0;     // n log(32m) + n + 128 n^2 m^2
  double k2 = 0.0;         // n + 512 n^2 m^2
  double log_k_form = 0.0; // log K1 + K2 Lambda^2 >= log_bound
  std::optional<double> phi_origin;
  double margin_origin = 1.0;
  bool pass = false;
  std::optional<MaxpointReport> maxpoint;
};

/// log of the explicit bound (32m)^n (1+2L)^n exp(64 n^2 m^2 (1+2L)^2).
double gradient_bound_log(int n, int m, double lambda);

/// Measured |du| at the origin at t = 1/(4n) against the explicit bound.
/// Throws std::runtime_error if the trajectory has no frame at t = 1/(4n).
BoundReport gradient_bound_report(const Trajectory& trajectory, double lambda);

struct RefinementStep {
  double coarse = 0.0;
  double fine = 0.0;
  double ratio = 0.0;  // coarse / fine (+inf when fine == 0)
  double order = 0.0;  // log2(ratio)
  bool at_floor = false;
  bool pass = false;
};

struct RefinementResult {
  std::vector<RefinementStep> steps;
  bool monotone = true;  // each level no larger than the previous
  bool pass = true;
  /// "at-floor" if every level is at the floor, otherwise "contracting",
  /// "non-monotone" or "stalled".
  std::string status;
};

/// Consecutive levels pass if the finer value is at or below `floor` or
/// coarse / fine >= threshold.
RefinementResult refinement_verdict(std::span<const double> values, double threshold, double floor);

}  // namespace mcflab
