#include "mcflab_cli/canonical_json.hpp"

#include <cmath>
#include <cstdio>

namespace mcflab::cli {

std::string format_number(double value) {
  if (!std::isfinite(value)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value == 0.0 ? 0.0 : value);
  return buf;
}

namespace {

void write_string(const std::string& s, std::string& out) {
  // Reuse the library's escaping for strings.
  out += Json(s).dump();
}

void write(const Json& v, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // object_t is a sorted map
        if (!first) out += ",\n";
        first = false;
        out += pad;
        write_string(it.key(), out);
        out += ": ";
        write(it.value(), depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      bool scalar = true;
      for (const auto& e : v) scalar = scalar && !e.is_structured();
      if (scalar) {
        out += "[";
        for (std::size_t k = 0; k < v.size(); ++k) {
          if (k) out += ", ";
          write(v[k], depth + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        write(v[k], depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? format_number(d) : "null";
      return;
    }
    case Json::value_t::string:
      write_string(v.get<std::string>(), out);
      return;
    default:
      out += v.dump();
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  write(value, 0, out);
  out += "\n";
  return out;
}

}  // namespace mcflab::cli
