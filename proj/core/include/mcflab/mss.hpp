#pragma once

// Minimal surface system g^{ij} d_ij u^a = 0 solved by parabolic relaxation
// with Dirichlet data, the subharmonicity of log v on area non-increasing
// solutions, and Korevaar's cutoff argument with its explicit constants.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcflab/flow.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/verify.hpp"

namespace mcflab {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MssDataKind { zero, linear, harmonic };

const char* mss_data_name(MssDataKind kind);
std::optional<MssDataKind> parse_mss_data(const std::string& name);

struct MssData {
  MssDataKind kind = MssDataKind::harmonic;
  int dim = 2;
  int codim = 1;
  int points = 33;
  double extent = 1.0;
  double amplitude = 0.25;  // harmonic: A
  double frequency = 1.0;   // harmonic: kappa
  std::uint64_t seed = 7;
  std::vector<std::vector<double>> slopes;  // linear: codim x dim
  bool translate = true;                    // apply u -> u - ||u||_inf - 1

  void validate() const;
};

struct MssProblem {
  /// Boundary data on the boundary ring and the initial guess inside.
  GraphState initial;
  std::vector<double> offsets;  // translation added to each u^a
};

/// Samples the data on the grid (harmonic: u^a = A exp(k p.x) cos(k r.x + theta_a)
/// with seeded orthonormal p, r and phases; linear in x when n = 1) and
/// applies the translation.
MssProblem make_mss_problem(const MssData& data);

struct RelaxOptions {
  double tol = 1e-8;
  long max_steps = 100000;
  double sigma = 0.9;
};

struct RelaxResult {
  GraphState state;
  std::vector<double> history;  // max interior |g^{ij} d_ij u^a| per step
  long steps = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Runs the flow stepper with frozen boundary until the strong residual is
/// <= tol or max_steps is exhausted. Throws DivergenceError if the residual
/// grows for 1000 consecutive steps.
RelaxResult relax_to_minimal(const MssProblem& problem, const RelaxOptions& options = {});

/// max over interior nodes and components of |g^{ij} d_ij u^a|.
double mss_residual(const GraphState& state);

enum class SubharmonicForm {
  log_v,  // (1/n) |grad log v|^2 - Lap log v
  w,      // 2 |grad w|^2 / w - Lap w
};

/// Slack of the subharmonicity inequality with Lap = g^{ij} d_ij, on area
/// non-increasing nodes (l_i l_j <= 1) inside the inscribed ball |x| < L - 2h.
/// Throws std::runtime_error on an empty mask.
ResidualField subharmonic_residual(const GraphState& state, SubharmonicForm form = SubharmonicForm::log_v);

struct KorevaarParams {
  double u0 = 1.0;
  double c1 = 300.0;  // 300 n u0^2

  static KorevaarParams make(int n, double u0);
};

/// 2^{(n-1)/(2n)} (1 + 64 u0^2)^{1/(2n)}.
double korevaar_c2(int n, double u0);

struct KorevaarReport {
  KorevaarParams params;
  double phi_origin = 0.0;   // phi~(0, u(0))
  double log_eta_origin = 0.0;
  double w_origin = 1.0;
  double du_origin = 0.0;
  double c2 = 0.0;
  std::size_t node = 0;      // argmax p of eta w
  std::vector<double> location;
  double log_eta_w = 0.0;    // at p
  double lambda1 = 0.0;      // at p
  bool boundary_attained = false;
  bool lambda_pass = false;  // lambda_1(p) <= 8 u0
  bool max_pass = false;     // log(eta w)(p) <= log C2 + C1
  bool chain_pass = false;   // (e^{C1/2} - 1) w(0) <= C2 e^{C1}
  double log_du_bound = 0.0; // n (log C2 + C1 - log(e^{C1/2} - 1))
  bool du_pass = false;      // |du|(0) <= exp(log_du_bound)
};

/// u0 <= 0 selects -sum_a u^a(0). Throws std::invalid_argument if some
/// height exceeds -1 or u0 < 1.
KorevaarReport korevaar_report(const GraphState& state, double u0 = 0.0);

/// log(e^x - 1) for x > 0 without overflow.
double log_expm1(double x);

}  // namespace mcflab
