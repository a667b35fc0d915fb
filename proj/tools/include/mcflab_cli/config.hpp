#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcflab/flow.hpp"
#include "mcflab/mss.hpp"
#include "mcflab/verify.hpp"

namespace mcflab::cli {

/// Malformed or invalid configuration. `field` is a JSON pointer such as
/// "/scenario/points"; `line` is 1-based, or 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::string field, int line);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

struct VerifySection {
  std::vector<std::string> quantities;  // empty: defaults for the dimension
  std::optional<double> radius;         // R for varphi
  std::optional<double> cm_weight;      // a
  std::optional<double> radius_const;   // r0
  std::optional<double> tolerance;      // absolute single-level tolerance
  std::optional<double> horizon;        // maxpoint time horizon in the rescaled gauge
  double gap_rel = 1e-6;
  double pair_floor = 1e-6;
};

struct MssSection {
  MssData data;
  RelaxOptions relax;
  std::optional<double> u0;
};

struct RefineSection {
  std::vector<int> levels{33, 65, 129};
};

struct RunConfig {
  Scenario scenario;
  FlowConfig flow;
  bool t_end_auto = true;  // t_end = 1/(4n); maxpoint runs until the cutoff support vanishes
  VerifySection verify;
  MssSection mss;
  RefineSection refine;

  /// Flow config with t_end resolved.
  FlowConfig resolved_flow() const;
  VerifyParams verify_params() const;
  std::vector<QuantityId> quantities() const;
};

/// Parses a JSON config; missing keys take defaults, unknown keys are
/// rejected. Throws ConfigError.
RunConfig parse_config(const std::string& text);

/// Canonical form: every key present, keys sorted, 2-space indent, doubles
/// with 17 significant digits, trailing newline.
std::string serialize_config(const RunConfig& config);

/// Parses "a,b,c" into trimmed non-empty items.
std::vector<std::string> split_list(const std::string& text);

}  // namespace mcflab::cli
