#pragma once

#include <string>

#include "json.hpp"

namespace mcflab::cli {

using Json = nlohmann::json;

/// Deterministic JSON text: sorted keys, 2-space indent, doubles printed with
/// %.17g (nonfinite doubles become null), trailing newline.
std::string canonical_dump(const Json& value);

/// %.17g, or "NA" for nonfinite values.
std::string format_number(double value);

}  // namespace mcflab::cli
