#include "mcflab_cli/runner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "mcflab/mss.hpp"
#include "mcflab/smallalg.hpp"

namespace mcflab::cli {

namespace fs = std::filesystem;

const char* command_name(Command command) {
  switch (command) {
    case Command::simulate: return "simulate";
    case Command::verify: return "verify";
    case Command::maxpoint: return "maxpoint";
    case Command::bound_report: return "bound-report";
    case Command::mss: return "mss";
    case Command::refine: return "refine";
  }
  return "?";
}

std::optional<Command> parse_command(const std::string& name) {
  for (auto c : {Command::simulate, Command::verify, Command::maxpoint, Command::bound_report, Command::mss,
                 Command::refine})
    if (name == command_name(c)) return c;
  return std::nullopt;
}

int exit_code_for_status(const std::string& status) {
  if (status == "pass") return kExitPass;
  if (status == "check_failed") return kExitCheckFailed;
  if (status == "blow_up") return kExitBlowUp;
  return kExitConfigError;
}

int exit_code_for(const Json& summary) {
  if (!summary.is_object() || !summary.contains("status") || !summary["status"].is_string()) return kExitConfigError;
  return exit_code_for_status(summary["status"].get<std::string>());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const fs::path& out, const std::string& command, std::uint64_t seed,
                      const std::string& timestamp) {
  fs::create_directories(out);
  const std::string base = command + "_" + timestamp + "_seed" + std::to_string(seed);
  for (int k = 1;; ++k) {
    const fs::path dir = out / (k == 1 ? base : base + "_" + std::to_string(k));
    if (fs::create_directory(dir)) return dir;
  }
}

std::string column_name(const QuantityId& q) {
  if (q.kind == QuantityKind::pair) return "pair_" + std::to_string(q.i + 1) + "_" + std::to_string(q.j + 1);
  return q.name();
}

namespace {

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
Json nullable(const std::optional<double>& v) { return v ? nullable(*v) : Json(nullptr); }

class Checks {
 public:
  void add(const std::string& name, bool pass, double value, double limit) {
    checks_[name] = {{"pass", pass}, {"value", nullable(value)}, {"limit", nullable(limit)}};
    if (!pass) failed_.push_back(name);
  }
  /// Recorded without taking part in the verdict.
  void skip(const std::string& name, const std::string& why) {
    checks_[name] = {{"pass", nullptr}, {"skipped", why}};
  }
  const Json& json() const { return checks_; }
  const std::vector<std::string>& failed() const { return failed_; }

 private:
  Json checks_ = Json::object();
  std::vector<std::string> failed_;
};

struct CsvColumns {
  std::vector<std::string> slack_names;
};

using SlackLookup = std::function<const ScalarField*(std::size_t frame, std::size_t column)>;

void write_frames_csv(const fs::path& path, const std::vector<const GraphState*>& frames,
                      const std::vector<std::string>& slack_names, const SlackLookup& lookup) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (frames.empty()) return;
  const int n = frames.front()->grid.dim;
  const int m = frames.front()->codim;
  std::string line = "t";
  for (int i = 0; i < n; ++i) line += ",x" + std::to_string(i + 1);
  for (int a = 0; a < m; ++a) line += ",u" + std::to_string(a + 1);
  for (int i = 0; i < n; ++i) line += ",lambda" + std::to_string(i + 1);
  line += ",v,w,phi,margin";
  for (const auto& s : slack_names) line += ",slack_" + s;
  out << line << '\n';

  for (std::size_t f = 0; f < frames.size(); ++f) {
    const GraphState& st = *frames[f];
    const MetricField metric = metric_field(st);
    std::vector<const ScalarField*> slacks(slack_names.size());
    for (std::size_t c = 0; c < slack_names.size(); ++c) slacks[c] = lookup ? lookup(f, c) : nullptr;
    const std::string t = format_number(st.time);
    std::string buf;
    for (std::size_t node = 0; node < st.grid.node_count(); ++node) {
      buf = t;
      for (int i = 0; i < n; ++i) buf += "," + format_number(st.grid.coordinate(node, i));
      for (int a = 0; a < m; ++a) buf += "," + format_number(st.heights[static_cast<std::size_t>(a)][node]);
      if (metric.mask()[node]) {
        const SingularSpectrum sv = metric.spectrum(node);
        for (int i = 0; i < n; ++i) buf += "," + format_number(sv.lambdas[static_cast<std::size_t>(i)]);
        const double v = metric.volume[node];
        buf += "," + format_number(v) + "," + format_number(std::pow(v, 1.0 / n));
        const AreaDecreasingReport rep = area_decreasing_report(sv);
        buf += "," + (rep.phi ? format_number(*rep.phi) : std::string("NA"));
        buf += "," + format_number(rep.margin);
      } else {
        for (int i = 0; i < n + 4; ++i) buf += ",NA";
      }
      for (const ScalarField* s : slacks) {
        if (s && s->mask[node]) buf += "," + format_number(s->values[node]);
        else buf += ",NA";
      }
      buf += '\n';
      out << buf;
    }
  }
}

void write_summary(const fs::path& dir, const Json& summary) {
  std::ofstream out(dir / "summary.json", std::ios::binary);
  out << canonical_dump(summary);
}

Json config_json(const RunConfig& config) { return Json::parse(serialize_config(config)); }

Json base_summary(Command command, const RunConfig& config) {
  Json s;
  s["command"] = command_name(command);
  s["config"] = config_json(config);
  s["code_version"] = code_version();
  s["reason"] = nullptr;
  return s;
}

void finish(Json& summary, const Checks& checks) {
  summary["checks"] = checks.json();
  if (checks.failed().empty()) {
    summary["status"] = "pass";
  } else {
    std::string reason = "check_failed:";
    for (const auto& f : checks.failed()) reason += " " + f;
    summary["status"] = "check_failed";
    summary["reason"] = reason;
  }
  summary["exit_code"] = exit_code_for_status(summary["status"].get<std::string>());
}

void fail_summary(Json& summary, const std::string& status, const std::string& reason) {
  summary["status"] = status;
  summary["reason"] = reason;
  if (!summary.contains("checks")) summary["checks"] = Json::object();
  summary["exit_code"] = exit_code_for_status(status);
}

std::vector<const GraphState*> frame_ptrs(const Trajectory& traj) {
  std::vector<const GraphState*> out;
  for (const auto& f : traj.frames) out.push_back(&f);
  return out;
}

Json trajectory_json(const Trajectory& traj) {
  Json j;
  j["dt"] = traj.dt;
  j["frame_dt"] = traj.frame_dt;
  j["steps"] = traj.steps;
  j["frames"] = traj.frames.size();
  j["lambda_sup"] = traj.lambda_sup;
  j["t_end"] = traj.frames.back().time;
  j["min_margin"] = traj.min_margin;
  return j;
}

double grim_reaper_error(const GraphState& st) {
  double err = 0.0;
  for (std::size_t node = 0; node < st.grid.node_count(); ++node)
    err = std::max(err, std::abs(st.heights[0][node] - grim_reaper_exact(st.grid.coordinate(node, 0), st.time)));
  return err;
}

struct QuantityTotals {
  double max_slack = -std::numeric_limits<double>::infinity();
  double max_positive = 0.0;
  double q99 = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  double min_coverage = 1.0;
  std::size_t count = 0;
  bool hypothesis_tracked = false;

  double value(bool two_sided) const { return two_sided ? std::max(max_slack, 0.0) : max_positive; }
};

std::vector<QuantityTotals> totals(const std::vector<FrameResiduals>& residuals, std::size_t nq) {
  std::vector<QuantityTotals> out(nq);
  for (const auto& fr : residuals) {
    for (std::size_t q = 0; q < nq; ++q) {
      const ResidualField& f = fr.fields[q];
      auto& t = out[q];
      if (f.summary.count == 0) continue;
      t.max_slack = std::max(t.max_slack, f.summary.max_slack);
      t.max_positive = std::max(t.max_positive, f.summary.max_positive());
      t.q99 = std::max(t.q99, f.summary.q99);
      t.scale = std::max(t.scale, f.summary.scale);
      t.count += f.summary.count;
      if (f.region_count > 0 && f.hypothesis_count != f.region_count) {
        t.hypothesis_tracked = true;
        t.min_coverage =
            std::min(t.min_coverage, static_cast<double>(f.hypothesis_count) / static_cast<double>(f.region_count));
      } else if (f.region_count > 0) {
        t.hypothesis_tracked = true;
      }
    }
  }
  return out;
}

bool uses_hypothesis(QuantityKind k) {
  return k == QuantityKind::w || k == QuantityKind::phi || k == QuantityKind::logdetS2 || k == QuantityKind::pair;
}

SlackLookup residual_lookup(const std::vector<FrameResiduals>& residuals) {
  std::map<std::size_t, const FrameResiduals*> by_frame;
  for (const auto& r : residuals) by_frame[r.frame] = &r;
  return [by_frame](std::size_t frame, std::size_t column) -> const ScalarField* {
    const auto it = by_frame.find(frame);
    return it == by_frame.end() ? nullptr : &it->second->fields[column].slack;
  };
}

std::vector<std::string> column_names(const std::vector<QuantityId>& qs) {
  std::vector<std::string> out;
  for (const auto& q : qs) out.push_back(column_name(q));
  return out;
}

// Commands. Each fills `summary` and `checks`, and writes frames.csv.

void cmd_simulate(const RunConfig& c, const fs::path& dir, Json& summary, Checks& checks) {
  const Trajectory traj = run(c.scenario, c.resolved_flow());
  summary["trajectory"] = trajectory_json(traj);
  checks.add("initial_margin", traj.min_margin.front() >= c.scenario.margin, traj.min_margin.front(),
             c.scenario.margin);
  const double min_margin = *std::min_element(traj.min_margin.begin(), traj.min_margin.end());
  checks.add("area_decreasing_preserved", min_margin > 0.0, min_margin, 0.0);
  if (c.scenario.generator == GeneratorKind::grim_reaper) {
    summary["exact_error"] = grim_reaper_error(traj.frames.back());
  }
  write_frames_csv(dir / "frames.csv", frame_ptrs(traj), {}, {});
}

void cmd_verify(const RunConfig& c, const fs::path& dir, Json& summary, Checks& checks) {
  const auto quantities = c.quantities();
  const VerifyParams params = c.verify_params();
  std::optional<SupMonitor> monitor;
  const InitialData initial = generate_initial(c.scenario);
  monitor.emplace(initial.state, params.radius);
  const Trajectory traj = run_from(initial, c.scenario, c.resolved_flow(),
                                   [&](const GraphState& s) { if (s.time > 0.0) monitor->observe(s); });
  summary["trajectory"] = trajectory_json(traj);
  const auto residuals = heat_residuals(traj, quantities, params);
  const auto tot = totals(residuals, quantities.size());
  const double h = traj.frames.front().grid.spacing();

  Json qj = Json::object();
  double min_coverage = 1.0;
  bool coverage_checked = false;
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    const auto& t = tot[q];
    const bool two = quantities[q].two_sided();
    const double value = t.value(two);
    const double tol = c.verify.tolerance.value_or(default_tolerance(h, traj.dt, t.scale));
    const std::string name = quantities[q].name();
    qj[name] = {{"max_slack", nullable(t.max_slack)}, {"max_positive_slack", t.max_positive},
                {"q99", nullable(t.q99)},            {"scale", t.scale},
                {"tolerance", tol},                  {"nodes", t.count},
                {"two_sided", two}};
    checks.add(name, value <= tol, value, tol);
    if (uses_hypothesis(quantities[q].kind)) {
      coverage_checked = true;
      min_coverage = std::min(min_coverage, t.min_coverage);
    }
  }
  summary["quantities"] = qj;
  if (coverage_checked) checks.add("hypothesis_coverage", min_coverage >= 0.95, min_coverage, 0.95);

  const double initial_sup = monitor->sup_full().empty() ? 0.0 : monitor->sup_full().front();
  const double limit = 10.0 * (h * h + traj.dt) * initial_sup;
  summary["monotonicity"] = {{"radius", monitor->radius()},
                             {"initial_sup", initial_sup},
                             {"max_forward_increase_full", monitor->max_forward_increase_full()},
                             {"max_forward_increase_interior", monitor->max_forward_increase_interior()},
                             {"limit", limit}};
  checks.add("monotonicity", monitor->max_forward_increase_full() <= limit, monitor->max_forward_increase_full(),
             limit);

  write_frames_csv(dir / "frames.csv", frame_ptrs(traj), column_names(quantities), residual_lookup(residuals));
}

Json maxpoint_json(const MaxpointReport& r) {
  return {{"frame", r.frame},
          {"time", r.time},
          {"node", r.node},
          {"location", r.location},
          {"log_value", r.log_value},
          {"eta", r.eta},
          {"lambda1", r.lambda1},
          {"product", r.product},
          {"limit", r.limit},
          {"boundary_attained", r.boundary_attained},
          {"gradient_norm", r.gradient_norm},
          {"second_difference", r.second_difference},
          {"certificate", r.certificate},
          {"pass", r.pass}};
}

MaxpointReport compute_maxpoint(const RunConfig& c, const Trajectory& traj) {
  const Trajectory rescaled = parabolic_rescale(traj, traj.lambda_sup);
  return maxpoint_report(rescaled, c.verify.cm_weight.value_or(0.0), c.verify.radius_const.value_or(0.0));
}

void add_maxpoint_checks(const MaxpointReport& r, Checks& checks) {
  if (r.boundary_attained) {
    checks.skip("maxpoint_bound", "maximum attained on the cutoff boundary");
    checks.skip("interior_certificate", "maximum attained on the cutoff boundary");
    return;
  }
  checks.add("maxpoint_bound", r.pass, r.product, r.limit);
  checks.add("interior_certificate", r.certificate, r.gradient_norm,
             5.0 * r.second_difference);
}

void cmd_maxpoint(const RunConfig& c, const fs::path& dir, Json& summary, Checks& checks) {
  const InitialData initial = generate_initial(c.scenario);
  FlowConfig flow = c.resolved_flow();
  if (c.t_end_auto) {
    const double k = 1.0 + 2.0 * initial.lambda_sup;
    const double r0 = c.verify.radius_const.value_or(1.0 / k);
    const double horizon = c.verify.horizon.value_or(1.0 / (k * k));
    flow.t_end = std::min(horizon, r0 / (2.0 * c.scenario.dim)) * k * k;
  }
  const Trajectory traj = run_from(initial, c.scenario, flow);
  summary["trajectory"] = trajectory_json(traj);
  const MaxpointReport r = compute_maxpoint(c, traj);
  summary["maxpoint"] = maxpoint_json(r);
  add_maxpoint_checks(r, checks);
  write_frames_csv(dir / "frames.csv", frame_ptrs(traj), {}, {});
}

void cmd_bound_report(const RunConfig& c, const fs::path& dir, Json& summary, Checks& checks) {
  FlowConfig flow = c.resolved_flow();
  flow.t_end = 1.0 / (4.0 * c.scenario.dim);
  const Trajectory traj = run(c.scenario, flow);
  summary["trajectory"] = trajectory_json(traj);
  BoundReport r = gradient_bound_report(traj, traj.lambda_sup);
  r.maxpoint = compute_maxpoint(c, traj);
  summary["bound"] = {{"n", r.n},
                      {"m", r.m},
                      {"lambda", r.lambda},
                      {"time", r.time},
                      {"measured", r.measured},
                      {"log_bound", r.log_bound},
                      {"bound", nullable(r.bound)},
                      {"log_k1", r.log_k1},
                      {"k2", r.k2},
                      {"log_k_form", r.log_k_form},
                      {"phi_origin", nullable(r.phi_origin)},
                      {"margin_origin", r.margin_origin},
                      {"pass", r.pass},
                      {"maxpoint", maxpoint_json(*r.maxpoint)}};
  checks.add("gradient_bound", r.pass, r.measured > 0.0 ? std::log(r.measured) : 0.0, r.log_bound);
  checks.add("phi_defined_origin", r.phi_origin.has_value(), r.phi_origin.value_or(NAN), NAN);
  add_maxpoint_checks(*r.maxpoint, checks);
  write_frames_csv(dir / "frames.csv", frame_ptrs(traj), {}, {});
}

void cmd_mss(const RunConfig& c, const fs::path& dir, Json& summary, Checks& checks) {
  const MssProblem problem = make_mss_problem(c.mss.data);
  const RelaxResult relaxed = relax_to_minimal(problem, c.mss.relax);
  const double h = relaxed.state.grid.spacing();
  summary["relax"] = {{"steps", relaxed.steps},
                      {"residual", relaxed.residual},
                      {"converged", relaxed.converged},
                      {"offsets", problem.offsets}};
  checks.add("converged", relaxed.converged, relaxed.residual, c.mss.relax.tol);

  std::vector<ResidualField> fields;
  Json sj = Json::object();
  for (auto form : {SubharmonicForm::log_v, SubharmonicForm::w}) {
    ResidualField f = subharmonic_residual(relaxed.state, form);
    const double tol = c.verify.tolerance.value_or(default_tolerance(h, 0.0, f.summary.scale));
    const std::string name = f.quantity.name();
    sj[name] = {{"max_slack", f.summary.max_slack},
                {"max_positive_slack", f.summary.max_positive()},
                {"q99", f.summary.q99},
                {"scale", f.summary.scale},
                {"tolerance", tol},
                {"nodes", f.summary.count}};
    checks.add(name, f.summary.max_positive() <= tol, f.summary.max_positive(), tol);
    fields.push_back(std::move(f));
  }
  summary["subharmonic"] = sj;

  try {
    const KorevaarReport k = korevaar_report(relaxed.state, c.mss.u0.value_or(0.0));
    summary["korevaar"] = {{"u0", k.params.u0},
                           {"c1", k.params.c1},
                           {"c2", k.c2},
                           {"phi_origin", k.phi_origin},
                           {"log_eta_origin", k.log_eta_origin},
                           {"w_origin", k.w_origin},
                           {"du_origin", k.du_origin},
                           {"node", k.node},
                           {"location", k.location},
                           {"log_eta_w", k.log_eta_w},
                           {"lambda1", k.lambda1},
                           {"boundary_attained", k.boundary_attained},
                           {"log_du_bound", k.log_du_bound}};
    checks.add("korevaar_lambda", k.lambda_pass, k.lambda1, 8.0 * k.params.u0);
    checks.add("korevaar_max", k.max_pass, k.log_eta_w, std::log(k.c2) + k.params.c1);
    checks.add("korevaar_chain", k.chain_pass, k.w_origin, NAN);
    checks.add("korevaar_gradient", k.du_pass, k.du_origin > 0.0 ? std::log(k.du_origin) : 0.0, k.log_du_bound);
    if (!c.mss.u0) checks.add("phi_origin_half", k.phi_origin == 0.5, k.phi_origin, 0.5);
  } catch (const std::invalid_argument& e) {
    summary["korevaar"] = {{"error", e.what()}};
    checks.add("korevaar_hypothesis", false, NAN, NAN);
  }

  const std::vector<const GraphState*> frames{&relaxed.state};
  write_frames_csv(dir / "frames.csv", frames, {"subharmonic_logv", "subharmonic_w"},
                   [&](std::size_t, std::size_t col) { return &fields[col].slack; });
}

void cmd_refine(const RunConfig& c, const fs::path& dir, Json& summary, Checks& checks) {
  const auto quantities = c.quantities();
  const RefineStudy study = refine_study(c, c.refine.levels, [&](const Trajectory& traj, const auto& residuals) {
    write_frames_csv(dir / "frames.csv", frame_ptrs(traj), column_names(quantities), residual_lookup(residuals));
  });
  Json table = Json::object();
  std::ofstream csv(dir / "refine.csv", std::ios::binary);
  csv << "quantity,points,h,dt,value,ratio,order,step_pass\n";
  for (const auto& row : study.rows) {
    Json steps = Json::array();
    for (const auto& s : row.verdict.steps)
      steps.push_back({{"ratio", nullable(s.ratio)}, {"order", nullable(s.order)}, {"at_floor", s.at_floor},
                       {"pass", s.pass}});
    table[row.quantity] = {{"values", row.values},       {"threshold", row.threshold},
                           {"floor", row.floor},         {"steps", steps},
                           {"monotone", row.verdict.monotone}, {"status", row.verdict.status},
                           {"pass", row.verdict.pass}};
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : row.verdict.steps)
      if (!s.at_floor) worst = std::min(worst, s.ratio);
    checks.add("refine_" + row.quantity, row.verdict.pass, std::isfinite(worst) ? worst : NAN, row.threshold);
    for (std::size_t l = 0; l < row.values.size(); ++l) {
      csv << row.quantity << ',' << study.points[l] << ',' << format_number(study.spacing[l]) << ','
          << format_number(study.dt[l]) << ',' << format_number(row.values[l]) << ',';
      if (l == 0) {
        csv << "NA,NA,NA\n";
      } else {
        const auto& s = row.verdict.steps[l - 1];
        csv << format_number(s.ratio) << ',' << format_number(s.order) << ',' << (s.pass ? "true" : "false") << '\n';
      }
    }
  }
  summary["refinement"] = {{"points", study.points}, {"spacing", study.spacing}, {"dt", study.dt}, {"table", table}};
}

std::uint64_t run_seed(Command command, const RunConfig& c) {
  return command == Command::mss ? c.mss.data.seed : c.scenario.seed;
}

}  // namespace

namespace {

// True when every coarse node of the cell containing `node` lies in `coarse_mask`.
bool in_footprint(const GridSpec& grid, std::size_t node, const GridSpec& coarse, const Mask& coarse_mask) {
  const double hc = coarse.spacing();
  const int centre = (coarse.points_per_axis - 1) / 2;
  std::array<int, kMaxGridDim> lo{}, hi{};
  for (int a = 0; a < grid.dim; ++a) {
    const double idx = grid.coordinate(node, a) / hc + centre;
    lo[static_cast<std::size_t>(a)] = static_cast<int>(std::floor(idx + 1e-9));
    hi[static_cast<std::size_t>(a)] = static_cast<int>(std::ceil(idx - 1e-9));
  }
  std::array<int, kMaxGridDim> corner{};
  for (int bits = 0; bits < (1 << grid.dim); ++bits) {
    for (int a = 0; a < grid.dim; ++a)
      corner[static_cast<std::size_t>(a)] = (bits >> a) & 1 ? hi[static_cast<std::size_t>(a)] : lo[static_cast<std::size_t>(a)];
    if (!coarse_mask[coarse.node_at(std::span<const int>(corner.data(), static_cast<std::size_t>(grid.dim)))]) return false;
  }
  return true;
}

}  // namespace

RefineStudy refine_study(const RunConfig& config, const std::vector<int>& levels,
                         const std::function<void(const Trajectory&, const std::vector<FrameResiduals>&)>& on_finest) {
  if (levels.size() < 2) throw std::invalid_argument("refinement needs at least two levels");
  for (std::size_t k = 0; k + 1 < levels.size(); ++k)
    if (levels[k + 1] - 1 != 2 * (levels[k] - 1))
      throw std::invalid_argument("refinement levels must double the resolution: " + std::to_string(levels[k]) +
                                  " -> " + std::to_string(levels[k + 1]));
  const auto quantities = config.quantities();
  const VerifyParams params = config.verify_params();
  const bool exact = config.scenario.generator == GeneratorKind::grim_reaper;

  RefineStudy study;
  std::vector<std::vector<double>> values(quantities.size());
  std::vector<double> scales(quantities.size(), 0.0);
  std::vector<double> errors, increases;
  double sup_scale = 0.0;
  // Slack masks of the coarsest level, per frame and quantity. Every level is
  // measured on their footprint so that the compared region does not move.
  std::optional<GridSpec> coarse;
  std::map<std::size_t, std::vector<Mask>> coarse_masks;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    Scenario s = config.scenario;
    s.points = levels[l];
    const Trajectory traj = run(s, config.resolved_flow());
    const GridSpec& grid = traj.frames.front().grid;
    study.points.push_back(levels[l]);
    study.spacing.push_back(grid.spacing());
    study.dt.push_back(traj.dt);
    const auto residuals = heat_residuals(traj, quantities, params);
    if (l == 0) {
      coarse = grid;
      for (const auto& fr : residuals)
        for (const auto& f : fr.fields) coarse_masks[fr.frame].push_back(f.slack.mask);
    }
    std::vector<double> level_max(quantities.size(), 0.0);
    for (const auto& fr : residuals) {
      const auto it = coarse_masks.find(fr.frame);
      if (it == coarse_masks.end()) continue;
      for (std::size_t q = 0; q < quantities.size(); ++q) {
        const ResidualField& f = fr.fields[q];
        scales[q] = std::max(scales[q], f.summary.scale);
        const bool two = quantities[q].two_sided();
        for (std::size_t x = 0; x < f.slack.values.size(); ++x) {
          if (!f.slack.mask[x] || !in_footprint(grid, x, *coarse, it->second[q])) continue;
          const double v = two ? std::abs(f.slack.values[x]) : f.slack.values[x];
          level_max[q] = std::max(level_max[q], v);
        }
      }
    }
    for (std::size_t q = 0; q < quantities.size(); ++q) values[q].push_back(level_max[q]);
    if (exact) errors.push_back(grim_reaper_error(traj.frames.back()));
    const SupMonitor monitor = weighted_sup_monitor(traj, params.radius);
    increases.push_back(std::max(0.0, monitor.max_forward_increase_full()));
    if (!monitor.sup_full().empty()) sup_scale = std::max(sup_scale, monitor.sup_full().front());
    if (on_finest && l + 1 == levels.size()) on_finest(traj, residuals);
  }

  const double second_order = std::pow(2.0, 1.5);
  if (exact) {
    RefineRow row{"error", second_order, 1e-13, errors, {}};
    row.verdict = refinement_verdict(row.values, row.threshold, row.floor);
    study.rows.push_back(std::move(row));
  }
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    RefineRow row;
    row.quantity = quantities[q].name();
    row.threshold = quantities[q].two_sided() ? second_order : 2.5;
    row.floor = 1e-11 * std::max(1.0, scales[q]);
    row.values = values[q];
    row.verdict = refinement_verdict(row.values, row.threshold, row.floor);
    study.rows.push_back(std::move(row));
  }
  RefineRow mono{"monotonicity", 2.5, 1e-11 * std::max(1.0, sup_scale), increases, {}};
  mono.verdict = refinement_verdict(mono.values, mono.threshold, mono.floor);
  study.rows.push_back(std::move(mono));
  return study;
}

RunOutcome report_config_error(Command command, const fs::path& out_dir, std::uint64_t seed,
                               const std::string& message, const std::string& field, int line,
                               const std::string& timestamp) {
  RunOutcome outcome;
  outcome.run_dir = make_run_dir(out_dir, command_name(command), seed, timestamp.empty() ? utc_timestamp() : timestamp);
  Json s;
  s["command"] = command_name(command);
  s["code_version"] = code_version();
  s["config"] = nullptr;
  s["error"] = {{"message", message}, {"field", field}, {"line", line}};
  fail_summary(s, "config_error", "config_error: " + message);
  write_summary(outcome.run_dir, s);
  std::ofstream(outcome.run_dir / "frames.csv", std::ios::binary);
  outcome.exit_code = s["exit_code"].get<int>();
  outcome.summary = std::move(s);
  return outcome;
}

RunOutcome run_command(const RunRequest& request) {
  const RunConfig& c = request.config;
  RunOutcome outcome;
  outcome.run_dir = make_run_dir(request.out_dir, command_name(request.command), run_seed(request.command, c),
                                 request.timestamp.empty() ? utc_timestamp() : request.timestamp);
  Json summary = base_summary(request.command, c);
  Checks checks;
  try {
    switch (request.command) {
      case Command::simulate: cmd_simulate(c, outcome.run_dir, summary, checks); break;
      case Command::verify: cmd_verify(c, outcome.run_dir, summary, checks); break;
      case Command::maxpoint: cmd_maxpoint(c, outcome.run_dir, summary, checks); break;
      case Command::bound_report: cmd_bound_report(c, outcome.run_dir, summary, checks); break;
      case Command::mss: cmd_mss(c, outcome.run_dir, summary, checks); break;
      case Command::refine: cmd_refine(c, outcome.run_dir, summary, checks); break;
    }
    finish(summary, checks);
  } catch (const BlowUpError& e) {
    summary["checks"] = checks.json();
    fail_summary(summary, "blow_up", std::string("blow_up: ") + e.what() + " at t=" + format_number(e.time()));
  } catch (const DivergenceError& e) {
    summary["checks"] = checks.json();
    fail_summary(summary, "blow_up", std::string("divergence: ") + e.what());
  } catch (const MarginError& e) {
    checks.add("initial_margin", false, NAN, c.scenario.margin);
    summary["checks"] = checks.json();
    fail_summary(summary, "check_failed", std::string("initial_margin: ") + e.what());
  } catch (const std::invalid_argument& e) {
    summary["checks"] = checks.json();
    fail_summary(summary, "config_error", std::string("config_error: ") + e.what());
  } catch (const std::runtime_error& e) {
    summary["checks"] = checks.json();
    fail_summary(summary, "check_failed", std::string("runtime: ") + e.what());
  }
  if (!fs::exists(outcome.run_dir / "frames.csv")) std::ofstream(outcome.run_dir / "frames.csv", std::ios::binary);
  write_summary(outcome.run_dir, summary);
  outcome.exit_code = summary["exit_code"].get<int>();
  outcome.summary = std::move(summary);
  return outcome;
}

}  // namespace mcflab::cli
