#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcflab/flow.hpp"
#include "mcflab/verify.hpp"
#include "mcflab_cli/canonical_json.hpp"
#include "mcflab_cli/config.hpp"

namespace mcflab::cli {

enum class Command { simulate, verify, maxpoint, bound_report, mss, refine };

const char* command_name(Command command);
std::optional<Command> parse_command(const std::string& name);

enum ExitCode : int { kExitPass = 0, kExitCheckFailed = 1, kExitConfigError = 2, kExitBlowUp = 3 };

/// "pass" -> 0, "check_failed" -> 1, "config_error" -> 2, "blow_up" -> 3;
/// anything else -> 2.
int exit_code_for_status(const std::string& status);
int exit_code_for(const Json& summary);

struct RunRequest {
  Command command = Command::verify;
  RunConfig config;
  std::filesystem::path out_dir = "runs";
  std::string timestamp;  // empty: current UTC time
};

struct RunOutcome {
  int exit_code = 0;
  std::filesystem::path run_dir;
  Json summary;
};

/// Creates <out>/<command>_<timestamp>_seed<seed>, adding _2, _3, ... when
/// the name is taken. Never reuses an existing directory.
std::filesystem::path make_run_dir(const std::filesystem::path& out, const std::string& command,
                                   std::uint64_t seed, const std::string& timestamp);

std::string utc_timestamp();

/// Runs one command and writes frames.csv and summary.json into a fresh run
/// directory. Numerical failures are reported through the exit code.
RunOutcome run_command(const RunRequest& request);

/// Writes summary.json for a config that could not be parsed.
RunOutcome report_config_error(Command command, const std::filesystem::path& out_dir, std::uint64_t seed,
                               const std::string& message, const std::string& field, int line,
                               const std::string& timestamp = {});

struct RefineRow {
  std::string quantity;  // "error", "monotonicity" or a quantity name
  double threshold = 0.0;
  double floor = 0.0;
  std::vector<double> values;  // per level
  RefinementResult verdict;
};

struct RefineStudy {
  std::vector<int> points;
  std::vector<double> spacing;
  std::vector<double> dt;
  std::vector<RefineRow> rows;
};

/// Per-level maxima over frames of each quantity's slack (one-sided
/// quantities use the positive part), taken on the footprint of the coarsest
/// level's slack mask so every level covers the same region, plus the sup error against the exact
/// solution for grim_reaper and the weighted monotonicity increase.
/// Throws std::invalid_argument unless levels double the resolution.
/// `on_finest` receives the finest trajectory and its residuals.
RefineStudy refine_study(const RunConfig& config, const std::vector<int>& levels,
                         const std::function<void(const Trajectory&, const std::vector<FrameResiduals>&)>& on_finest = {});

/// Name used in CSV headers: "pair(1,2)" -> "pair_1_2".
std::string column_name(const QuantityId& q);

}  // namespace mcflab::cli
