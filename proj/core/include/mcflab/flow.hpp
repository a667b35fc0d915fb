#pragma once

// Explicit time integration of graphical mean curvature flow in the
// nonparametric gauge d_t u^a = g^{ij} d_ij u^a, scenario generation, and the
// parabolic rescaling that normalizes heights into [1, 2].

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcflab/grid.hpp"

namespace mcflab {

/// Thrown when a step produces a nonfinite height.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Thrown when generated initial data cannot meet the requested
/// area-decreasing margin.
class MarginError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BoundaryMode {
  dirichlet_frozen,  // boundary nodes keep their initial values
  dirichlet_exact,   // boundary nodes follow the scenario's exact solution
};

struct FlowConfig {
  double dt_safety = 0.25;  // sigma in dt = sigma h^2 / (2n)
  double t_end = 0.125;
  int frames = 16;  // number of stored frame intervals
  BoundaryMode boundary = BoundaryMode::dirichlet_frozen;

  void validate() const;
};

enum class GeneratorKind { zero, linear, grim_reaper, fourier };

struct Scenario {
  std::string name = "zero";
  int dim = 2;
  int codim = 1;
  int points = 33;
  double extent = 1.0;
  GeneratorKind generator = GeneratorKind::zero;
  double amplitude = 0.5;
  int max_freq = 3;
  std::uint64_t seed = 7;
  std::vector<std::vector<double>> slopes;  // linear: codim x dim
  double margin = 0.05;                     // delta

  GridSpec grid() const { return GridSpec::make(dim, points, extent); }
  void validate() const;
};

const char* generator_name(GeneratorKind kind);
std::optional<GeneratorKind> parse_generator(const std::string& name);
const char* boundary_name(BoundaryMode mode);
std::optional<BoundaryMode> parse_boundary(const std::string& name);

struct InitialData {
  GraphState state;
  double lambda_sup = 0.0;     // Lambda = max_a ||u^a(., 0)||_inf on the grid
  double min_margin = 1.0;     // min over nodes and pairs of 1 - l_i l_j
  int halvings = 0;            // fourier only
  double scale = 1.0;          // fourier only: final coefficient scale
};

/// Builds the initial heights of a scenario on its grid and scans the
/// discrete area-decreasing margin. Throws MarginError if the margin is below
/// scenario.margin (fourier data is halved up to 50 times first).
InitialData generate_initial(const Scenario& scenario);

/// Exact grim reaper u = t - log cos x, defined for |x| < pi/2.
double grim_reaper_exact(double x, double t);

/// Minimum over interior nodes and pairs i<j of 1 - l_i l_j (1 when n == 1).
double area_decreasing_margin(const MetricField& metric);

/// sigma h^2 / (2n).
double cfl_dt(const GridSpec& grid, double sigma);
double cfl_dt(const GraphState& state, double sigma);

/// Boundary values for dirichlet_exact: (alpha, node, time) -> height.
using BoundaryFn = std::function<double(int, std::size_t, double)>;

/// One forward Euler step. Boundary nodes keep their values unless
/// `boundary` is given. Throws BlowUpError on nonfinite output.
GraphState step(const GraphState& state, double dt, const BoundaryFn& boundary = {});
/// In-place variant reusing `scratch` storage.
void step_into(const GraphState& state, double dt, GraphState& out, const BoundaryFn& boundary = {});

/// Discrete MCF operator g^{ij} d_ij u^a at interior nodes (zero on the
/// boundary ring), written into `rates[a][node]`.
void mcf_rates(const GraphState& state, std::vector<std::vector<double>>& rates);

struct Provenance {
  std::string scenario;
  std::string generator;
  std::uint64_t seed = 0;
  std::string code_version;
};

struct Trajectory {
  std::vector<GraphState> frames;
  /// States one step before/after each frame; empty for the first and last.
  std::vector<std::optional<GraphState>> before;
  std::vector<std::optional<GraphState>> after;
  std::vector<double> min_margin;  // per frame
  double dt = 0.0;
  double frame_dt = 0.0;
  long steps = 0;
  double lambda_sup = 0.0;
  Provenance provenance;

  bool has_triple(std::size_t k) const { return before[k].has_value() && after[k].has_value(); }
  FrameTriple triple(std::size_t k) const { return FrameTriple{*before[k], frames[k], *after[k]}; }
};

/// Called with every computed state, including the initial one.
using StepObserver = std::function<void(const GraphState&)>;

/// Generates the scenario, checks its margin, and integrates to t_end with a
/// constant dt = t_end / steps, steps being the smallest multiple of
/// config.frames with dt <= cfl_dt(sigma).
Trajectory run(const Scenario& scenario, const FlowConfig& config, const StepObserver& observer = {});
/// Same, starting from given initial data.
Trajectory run_from(const InitialData& initial, const Scenario& scenario, const FlowConfig& config,
                    const StepObserver& observer = {});

/// x -> x / (1 + 2L), u -> u / (1 + 2L) + (1 + 3L) / (1 + 2L), t -> t / (1 + 2L)^2,
/// on the grid of half-width extent / (1 + 2L). Nodes correspond one to one,
/// so Jacobians are unchanged.
GraphState parabolic_rescale(const GraphState& state, double lambda);
Trajectory parabolic_rescale(const Trajectory& trajectory, double lambda);

std::string code_version();

}  // namespace mcflab
