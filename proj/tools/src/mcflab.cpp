#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "mcflab/flow.hpp"
#include "mcflab_cli/config.hpp"
#include "mcflab_cli/runner.hpp"

namespace {

using namespace mcflab::cli;

struct Options {
  std::string config_path;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  std::string levels;
  std::string quantities;
  bool dry_run = false;
};

void apply_overrides(RunConfig& config, const Options& opt) {
  if (opt.seed) {
    config.scenario.seed = *opt.seed;
    config.mss.data.seed = *opt.seed;
  }
  if (!opt.levels.empty()) {
    config.refine.levels.clear();
    for (const auto& item : split_list(opt.levels)) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        config.refine.levels.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("--levels: not an integer: \"" + item + "\"", "/refine/levels", 0);
      }
    }
  }
  if (!opt.quantities.empty()) config.verify.quantities = split_list(opt.quantities);
}

int execute(Command command, const Options& opt) {
  const std::uint64_t seed_hint = opt.seed.value_or(0);
  RunConfig config;
  try {
    std::string text = "{}";
    if (!opt.config_path.empty()) {
      std::ifstream in(opt.config_path, std::ios::binary);
      if (!in) throw ConfigError("cannot read config file " + opt.config_path, "", 0);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    config = parse_config(text);
    apply_overrides(config, opt);
    config = parse_config(serialize_config(config));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    if (opt.dry_run) return kExitConfigError;
    const RunOutcome o = report_config_error(command, opt.out, seed_hint, e.what(), e.field(), e.line());
    std::cout << o.run_dir.string() << "\n";
    return o.exit_code;
  }
  if (opt.dry_run) {
    std::cout << serialize_config(config);
    return kExitPass;
  }
  RunRequest request;
  request.command = command;
  request.config = config;
  request.out_dir = opt.out;
  const RunOutcome o = run_command(request);
  std::cout << o.run_dir.string() << "\n" << o.summary["status"].get<std::string>();
  if (o.summary["reason"].is_string()) std::cout << " (" << o.summary["reason"].get<std::string>() << ")";
  std::cout << "\n";
  return o.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-difference experiments for area-decreasing graphical mean curvature flow"};
  app.set_version_flag("--version", mcflab::code_version());
  app.require_subcommand(1);

  Options opt;
  std::optional<Command> chosen;
  const std::pair<Command, const char*> commands[] = {
      {Command::simulate, "Run the flow and check the initial margin"},
      {Command::verify, "Evaluate the heat-operator inequalities and the weighted monotonicity"},
      {Command::maxpoint, "Locate the cutoff-weighted maximum on the rescaled flow"},
      {Command::bound_report, "Compare |du| at the origin with the explicit gradient bound"},
      {Command::mss, "Relax to a minimal graph and run the elliptic checks"},
      {Command::refine, "Grid refinement study over --levels"},
  };
  for (const auto& [command, help] : commands) {
    auto* sub = app.add_subcommand(command_name(command), help);
    sub->add_option("--config", opt.config_path, "JSON config file");
    sub->add_option("--out", opt.out, "Output directory for run folders")->capture_default_str();
    sub->add_option("--seed", opt.seed, "Override the scenario and mss seeds");
    sub->add_option("--levels", opt.levels, "Grid sizes for refine, e.g. 33,65,129");
    sub->add_option("--quantities", opt.quantities, "Quantities, e.g. w,phi,pair(1,2)");
    sub->add_flag("--dry-run", opt.dry_run, "Print the canonical config and exit");
    sub->callback([&chosen, command] { chosen = command; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }
  return execute(*chosen, opt);
}
