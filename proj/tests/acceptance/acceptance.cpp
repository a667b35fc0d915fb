#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "mcflab/mss.hpp"
#include "mcflab/smallalg.hpp"
#include "mcflab_cli/config.hpp"
#include "mcflab_cli/runner.hpp"

using namespace mcflab;
using namespace mcflab::cli;
namespace fs = std::filesystem;

namespace {

fs::path g_out;
int g_failures = 0;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig load(const std::string& name) { return parse_config(slurp(fs::path(MCFLAB_CONFIG_DIR) / name)); }

RunOutcome run(Command cmd, const RunConfig& c) {
  RunRequest req;
  req.command = cmd;
  req.config = c;
  req.out_dir = g_out;
  req.timestamp = "20260101T000000Z";
  return run_command(req);
}

int shell(const std::string& args) {
  const std::string cmd = std::string(MCFLAB_BINARY) + " " + args + " --out " + g_out.string() + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Criterion {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
  }
};

void report(int k, const std::function<void(Criterion&)>& body) {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("CRITERION %d: %s (%.1f s) %s\n", k, c.pass ? "PASS" : "FAIL", secs, c.detail.c_str());
  std::fflush(stdout);
  if (!c.pass) ++g_failures;
}

double elapsed_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// Worst per-step ratio of a refinement row, ignoring at-floor steps.
std::string ratios(const Json& row) {
  std::string s;
  for (const auto& step : row["steps"]) {
    if (!s.empty()) s += ",";
    s += step["at_floor"].get<bool>() ? std::string("floor") : fmt(step["ratio"].get<double>());
  }
  return "[" + s + "]";
}

bool steps_meet(const Json& row, double threshold) {
  for (const auto& step : row["steps"])
    if (!step["at_floor"].get<bool>() && !(step["ratio"].get<double>() >= threshold)) return false;
  return row["monotone"].get<bool>();
}

void algebra(Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  SingularSpectrum zero;
  zero.n = 3;
  c.require(area_decreasing_report(zero).phi == 1.0, "Phi(0)=1");
  c.require(phi_bound_to_pair_bound(1.0) == 0.0, "pair bound(1)=0");
  c.require(std::abs(phi_bound_to_pair_bound(2.0) - (1.0 - std::exp(-1.0))) <= 1e-10, "pair bound(2)=1-1/e");
  c.require(std::abs(calc_lemma_main(0.5, 1.0, 1).s_star - (std::sqrt(20.0) - 2.0) / 4.0) <= 1e-10,
            "s*=(sqrt20-2)/4");

  mcflab::testing::Gen gen(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int m = gen.integer(1, 4), n = gen.integer(1, 4);
    const Jacobian j = gen.jacobian(m, n, 2.0);
    const SmallMatrix rotated = gen.orthogonal(m) * j.matrix() * gen.orthogonal(n);
    const auto a = singular_spectrum(j);
    const auto b = singular_spectrum(Jacobian(rotated));
    for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(a.lambdas[k] - b.lambdas[k]));
  }
  c.require(worst <= 1e-10, "invariance 1e4 max diff " + fmt(worst));
  const double secs = elapsed_since(start);
  c.require(secs < 10.0, "runtime " + fmt(secs) + " s < 10");
}

}  // namespace

int main() {
  g_out = fs::temp_directory_path() / "mcflab_acceptance";
  fs::remove_all(g_out);
  fs::create_directories(g_out);

  report(1, algebra);

  Json grim;
  report(2, [&](Criterion& c) {
    const auto start = std::chrono::steady_clock::now();
    const RunOutcome out = run(Command::refine, load("grim_reaper.json"));
    grim = out.summary;
    const Json& row = out.summary["refinement"]["table"]["error"];
    bool ok = row["monotone"].get<bool>();
    std::string orders;
    for (const auto& step : row["steps"]) {
      const double order = step["order"].get<double>();
      ok = ok && order >= 1.5;
      orders += (orders.empty() ? "" : ",") + fmt(order);
    }
    c.require(ok, "levels 65,129,257 sup error " + fmt(row["values"].back().get<double>()) + " orders [" + orders +
                      "] >= 1.5");
    const double secs = elapsed_since(start);
    c.require(secs < 60.0, "runtime " + fmt(secs) + " s < 60");
  });

  report(3, [&](Criterion& c) {
    const Json& row = grim["refinement"]["table"]["varphi"];
    c.require(steps_meet(row, 3.0), "varphi slack ratios " + ratios(row) + " >= 3.0");
  });

  Json fourier_refine;
  std::vector<Json> fourier_verify;
  report(4, [&](Criterion& c) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig base = load("fourier.json");
    fourier_refine = run(Command::refine, base).summary;
    const Json& row = fourier_refine["refinement"]["table"]["w"];
    c.require(row["pass"].get<bool>() && steps_meet(row, 2.5),
              "w max positive slack " + row["status"].get<std::string>() + " ratios " + ratios(row));
    double coverage = 1.0;
    std::string signed_max;
    for (int points : base.refine.levels) {
      RunConfig cfg = base;
      cfg.scenario.points = points;
      fourier_verify.push_back(run(Command::verify, cfg).summary);
      coverage = std::min(coverage, fourier_verify.back()["checks"]["hypothesis_coverage"]["value"].get<double>());
      signed_max += (signed_max.empty() ? "" : ",") +
                    fmt(fourier_verify.back()["quantities"]["w"]["max_slack"].get<double>());
    }
    c.require(true, "signed max slack [" + signed_max + "]");
    c.require(coverage >= 0.95, "min coverage " + fmt(coverage) + " >= 0.95");
    const double secs = elapsed_since(start);
    c.require(secs < 600.0, "runtime " + fmt(secs) + " s < 600");
  });

  report(5, [&](Criterion& c) {
    for (const char* q : {"phi", "logdetS2"}) {
      const Json& row = fourier_refine["refinement"]["table"][q];
      std::string signed_max;
      for (const auto& v : fourier_verify) signed_max += (signed_max.empty() ? "" : ",") + fmt(v["quantities"][q]["max_slack"].get<double>());
      c.require(row["pass"].get<bool>() && steps_meet(row, 2.5), std::string(q) + " " +
                    row["status"].get<std::string>() + " ratios " + ratios(row) + " signed max [" + signed_max + "]");
    }
  });

  report(6, [&](Criterion& c) {
    for (const auto& v : fourier_verify) {
      const Json& m = v["monotonicity"];
      const double inc = m["max_forward_increase_full"].get<double>();
      const double lim = m["limit"].get<double>();
      c.require(inc <= lim, "increase " + fmt(inc) + " <= " + fmt(lim) + " (interior " +
                                fmt(m["max_forward_increase_interior"].get<double>()) + ")");
    }
    const Json& row = fourier_refine["refinement"]["table"]["monotonicity"];
    c.require(row["pass"].get<bool>(), "refinement " + row["status"].get<std::string>() + " ratios " + ratios(row));
  });

  report(7, [&](Criterion& c) {
    const RunConfig base = load("fourier.json");
    for (int points : base.refine.levels) {
      RunConfig cfg = base;
      cfg.scenario.points = points;
      const Json s = run(Command::maxpoint, cfg).summary;
      const Json& mp = s["maxpoint"];
      const bool ok = s["checks"]["maxpoint_bound"]["pass"] == true && s["checks"]["interior_certificate"]["pass"] == true;
      c.require(ok, std::to_string(points) + ": eta*lambda1 " + fmt(mp["product"].get<double>()) + " <= " +
                        fmt(mp["limit"].get<double>()) + ", interior " + (mp["certificate"].get<bool>() ? "yes" : "no"));
    }
  });

  report(8, [&](Criterion& c) {
    std::vector<fs::path> configs;
    for (const auto& e : fs::directory_iterator(MCFLAB_CONFIG_DIR))
      if (e.path().extension() == ".json") configs.push_back(e.path());
    std::sort(configs.begin(), configs.end());
    for (const auto& p : configs) {
      const Json s = run(Command::bound_report, parse_config(slurp(p))).summary;
      const bool ok = s["checks"]["gradient_bound"]["pass"] == true && s["checks"]["phi_defined_origin"]["pass"] == true;
      c.require(ok, p.stem().string() + " log|du| " + fmt(s["checks"]["gradient_bound"]["value"].get<double>()) +
                        " <= " + fmt(s["bound"]["log_bound"].get<double>()));
    }
  });

  report(9, [&](Criterion& c) {
    const auto start = std::chrono::steady_clock::now();
    MssData lin;
    lin.kind = MssDataKind::linear;
    lin.points = 65;
    lin.slopes = {{0.25, -0.375}};
    const double exact = mss_residual(make_mss_problem(lin).initial);
    lin.slopes = {{0.3, -0.2}};
    const double rounded = mss_residual(make_mss_problem(lin).initial);
    c.require(exact == 0.0, "linear residual " + fmt(exact) + " (non-dyadic slopes " + fmt(rounded) + ")");

    const RunConfig cfg = load("mss_harmonic.json");
    const Json s = run(Command::mss, cfg).summary;
    const int steps = s["relax"]["steps"].get<int>();
    c.require(s["relax"]["converged"] == true && steps <= 100000,
              "relax 65: residual " + fmt(s["relax"]["residual"].get<double>()) + " in " + std::to_string(steps) + " steps");
    c.require(s["korevaar"]["phi_origin"].get<double>() == 0.5, "phi~(0)=" + fmt(s["korevaar"]["phi_origin"].get<double>()));
    c.require(s["checks"]["korevaar_lambda"]["pass"] == true,
              "lambda1 " + fmt(s["korevaar"]["lambda1"].get<double>()) + " <= 8u0 " +
                  fmt(8.0 * s["korevaar"]["u0"].get<double>()));
    c.require(s["checks"]["korevaar_max"]["pass"] == true && s["checks"]["korevaar_gradient"]["pass"] == true &&
                  s["checks"]["korevaar_chain"]["pass"] == true,
              "gradient bound");

    for (auto form : {SubharmonicForm::log_v, SubharmonicForm::w}) {
      std::vector<double> values;
      std::string signed_max;
      double scale = 0.0;
      for (int points : {17, 33, 65}) {
        MssData d = cfg.mss.data;
        d.points = points;
        const RelaxResult r = relax_to_minimal(make_mss_problem(d), cfg.mss.relax);
        const ResidualField f = subharmonic_residual(r.state, form);
        values.push_back(f.summary.max_positive());
        scale = std::max(scale, f.summary.scale);
        signed_max += (signed_max.empty() ? "" : ",") + fmt(f.summary.max_slack);
      }
      const RefinementResult v = refinement_verdict(values, 2.5, 1e-11 * std::max(1.0, scale));
      c.require(v.pass, std::string(form == SubharmonicForm::log_v ? "log v" : "w") + " subharmonic " + v.status +
                            " signed max [" + signed_max + "]");
    }
    const double secs = elapsed_since(start);
    c.require(secs < 300.0, "runtime " + fmt(secs) + " s < 300");
  });

  report(10, [&](Criterion& c) {
    for (const char* name : {"fourier.json", "mss_harmonic.json"}) {
      const RunConfig cfg = load(name);
      const Command cmd = std::string(name) == "fourier.json" ? Command::verify : Command::mss;
      const RunOutcome a = run(cmd, cfg);
      const RunOutcome b = run(cmd, cfg);
      const bool same = slurp(a.run_dir / "frames.csv") == slurp(b.run_dir / "frames.csv") &&
                        slurp(a.run_dir / "summary.json") == slurp(b.run_dir / "summary.json");
      c.require(same, std::string(name) + " byte-identical");
    }
    bool round_trip = true;
    for (const auto& e : fs::directory_iterator(MCFLAB_CONFIG_DIR))
      if (e.path().extension() == ".json") round_trip = round_trip && serialize_config(parse_config(slurp(e.path()))) == slurp(e.path());
    c.require(round_trip, "config round trip");

    const std::string bad = (g_out / "bad.json").string();
    std::ofstream(bad) << R"({"scenario": {"foo": 1}})";
    const std::string budget = (g_out / "budget.json").string();
    std::ofstream(budget) << R"({"mss": {"max_steps": 10}})";
    const int pass = shell("verify --config " + std::string(MCFLAB_CONFIG_DIR) + "/zero.json");
    const int failed = shell("mss --config " + budget);
    const int config = shell("verify --config " + bad);
    c.require(pass == 0 && failed == 1 && config == 2,
              "exit codes pass/check_failed/config_error " + std::to_string(pass) + "/" + std::to_string(failed) + "/" +
                  std::to_string(config));
  });

  fs::remove_all(g_out);
  return g_failures == 0 ? 0 : 1;
}
