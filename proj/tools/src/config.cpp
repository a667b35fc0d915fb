#include "mcflab_cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "mcflab_cli/canonical_json.hpp"

namespace mcflab::cli {

ConfigError::ConfigError(const std::string& message, std::string field, int line)
    : std::runtime_error(message), field_(std::move(field)), line_(line) {}

namespace {

int line_at_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  /// Best-effort line of the last component of `path`, searching each key
  /// after the previous one.
  int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    bool found = false;
    for (const auto& key : path) {
      if (key.empty() || std::isdigit(static_cast<unsigned char>(key[0]))) continue;
      const auto hit = text_.find("\"" + key + "\"", pos);
      if (hit == std::string::npos) break;
      pos = hit;
      found = true;
    }
    return found ? line_at_offset(text_, pos) : 0;
  }

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& message) const {
    std::string pointer;
    for (const auto& p : path) pointer += "/" + p;
    const int line = line_of(path);
    std::string full = pointer.empty() ? message : pointer + ": " + message;
    if (line > 0) full = "line " + std::to_string(line) + ": " + full;
    throw ConfigError(full, pointer, line);
  }

  void check_keys(const Json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) {
        auto p = path;
        p.push_back(it.key());
        std::string valid;
        for (const auto& a : allowed) valid += (valid.empty() ? "" : ", ") + a;
        fail(p, "unknown key \"" + it.key() + "\" (valid keys: " + valid + ")");
      }
    }
  }

  double number(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }

  long long integer(const Json& v, const std::vector<std::string>& path) const {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::fabs(d) < 9e15) return static_cast<long long>(d);
    }
    fail(path, "expected an integer");
  }

  std::uint64_t unsigned_integer(const Json& v, const std::vector<std::string>& path) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    fail(path, "expected a non-negative integer");
  }

  std::string string(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::optional<double> optional_number(const Json& v, const std::vector<std::string>& path) const {
    if (v.is_null()) return std::nullopt;
    return number(v, path);
  }

  std::vector<std::vector<double>> matrix(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_array()) fail(path, "expected an array of rows");
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < v.size(); ++r) {
      auto rp = path;
      rp.push_back(std::to_string(r));
      if (!v[r].is_array()) fail(rp, "expected an array of numbers");
      std::vector<double> row;
      for (std::size_t c = 0; c < v[r].size(); ++c) {
        auto cp = rp;
        cp.push_back(std::to_string(c));
        row.push_back(number(v[r][c], cp));
      }
      out.push_back(std::move(row));
    }
    return out;
  }

 private:
  const std::string& text_;
};

template <typename F>
void field(const Json& obj, const char* key, const std::vector<std::string>& path, F&& apply) {
  if (!obj.contains(key)) return;
  auto p = path;
  p.emplace_back(key);
  apply(obj.at(key), p);
}

std::string valid_generators() {
  std::string out;
  for (auto k : {GeneratorKind::zero, GeneratorKind::linear, GeneratorKind::grim_reaper, GeneratorKind::fourier})
    out += (out.empty() ? "" : ", ") + std::string(generator_name(k));
  return out;
}

void parse_scenario(const Reader& rd, const Json& obj, Scenario& s) {
  const std::vector<std::string> path{"scenario"};
  rd.check_keys(obj, path,
                {"amplitude", "codim", "dim", "extent", "generator", "margin", "max_freq", "name", "points", "seed",
                 "slopes"});
  field(obj, "name", path, [&](const Json& v, const auto& p) { s.name = rd.string(v, p); });
  if (obj.contains("generator")) {
    field(obj, "generator", path, [&](const Json& v, const auto& p) {
      const auto name = rd.string(v, p);
      const auto g = parse_generator(name);
      if (!g) rd.fail(p, "unknown generator \"" + name + "\" (valid: " + valid_generators() + ")");
      s.generator = *g;
    });
  } else {
    const auto g = parse_generator(s.name);
    if (!g) rd.fail({"scenario", "name"}, "unknown scenario \"" + s.name + "\" (valid: " + valid_generators() + ")");
    s.generator = *g;
  }
  field(obj, "dim", path, [&](const Json& v, const auto& p) { s.dim = static_cast<int>(rd.integer(v, p)); });
  field(obj, "codim", path, [&](const Json& v, const auto& p) { s.codim = static_cast<int>(rd.integer(v, p)); });
  field(obj, "points", path, [&](const Json& v, const auto& p) { s.points = static_cast<int>(rd.integer(v, p)); });
  field(obj, "extent", path, [&](const Json& v, const auto& p) { s.extent = rd.number(v, p); });
  field(obj, "amplitude", path, [&](const Json& v, const auto& p) { s.amplitude = rd.number(v, p); });
  field(obj, "max_freq", path, [&](const Json& v, const auto& p) { s.max_freq = static_cast<int>(rd.integer(v, p)); });
  field(obj, "seed", path, [&](const Json& v, const auto& p) { s.seed = rd.unsigned_integer(v, p); });
  field(obj, "slopes", path, [&](const Json& v, const auto& p) { s.slopes = rd.matrix(v, p); });
  field(obj, "margin", path, [&](const Json& v, const auto& p) { s.margin = rd.number(v, p); });
}

void parse_flow(const Reader& rd, const Json& obj, RunConfig& c) {
  const std::vector<std::string> path{"flow"};
  rd.check_keys(obj, path, {"boundary", "dt_safety", "frames", "t_end"});
  field(obj, "dt_safety", path, [&](const Json& v, const auto& p) { c.flow.dt_safety = rd.number(v, p); });
  field(obj, "frames", path, [&](const Json& v, const auto& p) { c.flow.frames = static_cast<int>(rd.integer(v, p)); });
  field(obj, "t_end", path, [&](const Json& v, const auto& p) {
    c.t_end_auto = v.is_null();
    if (!c.t_end_auto) c.flow.t_end = rd.number(v, p);
  });
  field(obj, "boundary", path, [&](const Json& v, const auto& p) {
    const auto name = rd.string(v, p);
    const auto b = parse_boundary(name);
    if (!b) rd.fail(p, "unknown boundary \"" + name + "\" (valid: dirichlet_exact, dirichlet_frozen)");
    c.flow.boundary = *b;
  });
}

void parse_verify(const Reader& rd, const Json& obj, VerifySection& s) {
  const std::vector<std::string> path{"verify"};
  rd.check_keys(obj, path,
                {"cm_weight", "gap_rel", "horizon", "pair_floor", "quantities", "radius", "radius_const", "tolerance"});
  field(obj, "quantities", path, [&](const Json& v, const auto& p) {
    if (!v.is_array()) rd.fail(p, "expected an array of quantity names");
    s.quantities.clear();
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto qp = p;
      qp.push_back(std::to_string(k));
      const auto name = rd.string(v[k], qp);
      if (!QuantityId::parse(name))
        rd.fail(qp, "unknown quantity \"" + name + "\" (valid: w, phi, logdetS2, pair(i,j), varphi, cm_cutoff)");
      s.quantities.push_back(name);
    }
  });
  field(obj, "radius", path, [&](const Json& v, const auto& p) { s.radius = rd.optional_number(v, p); });
  field(obj, "cm_weight", path, [&](const Json& v, const auto& p) { s.cm_weight = rd.optional_number(v, p); });
  field(obj, "radius_const", path, [&](const Json& v, const auto& p) { s.radius_const = rd.optional_number(v, p); });
  field(obj, "tolerance", path, [&](const Json& v, const auto& p) { s.tolerance = rd.optional_number(v, p); });
  field(obj, "horizon", path, [&](const Json& v, const auto& p) { s.horizon = rd.optional_number(v, p); });
  field(obj, "gap_rel", path, [&](const Json& v, const auto& p) { s.gap_rel = rd.number(v, p); });
  field(obj, "pair_floor", path, [&](const Json& v, const auto& p) { s.pair_floor = rd.number(v, p); });
}

void parse_mss(const Reader& rd, const Json& obj, MssSection& s) {
  const std::vector<std::string> path{"mss"};
  rd.check_keys(obj, path,
                {"amplitude", "codim", "data", "dim", "extent", "frequency", "max_steps", "points", "seed", "sigma",
                 "slopes", "tol", "translate", "u0"});
  field(obj, "data", path, [&](const Json& v, const auto& p) {
    const auto name = rd.string(v, p);
    const auto k = parse_mss_data(name);
    if (!k) rd.fail(p, "unknown mss data \"" + name + "\" (valid: harmonic, linear, zero)");
    s.data.kind = *k;
  });
  field(obj, "dim", path, [&](const Json& v, const auto& p) { s.data.dim = static_cast<int>(rd.integer(v, p)); });
  field(obj, "codim", path, [&](const Json& v, const auto& p) { s.data.codim = static_cast<int>(rd.integer(v, p)); });
  field(obj, "points", path, [&](const Json& v, const auto& p) { s.data.points = static_cast<int>(rd.integer(v, p)); });
  field(obj, "extent", path, [&](const Json& v, const auto& p) { s.data.extent = rd.number(v, p); });
  field(obj, "amplitude", path, [&](const Json& v, const auto& p) { s.data.amplitude = rd.number(v, p); });
  field(obj, "frequency", path, [&](const Json& v, const auto& p) { s.data.frequency = rd.number(v, p); });
  field(obj, "seed", path, [&](const Json& v, const auto& p) { s.data.seed = rd.unsigned_integer(v, p); });
  field(obj, "slopes", path, [&](const Json& v, const auto& p) { s.data.slopes = rd.matrix(v, p); });
  field(obj, "translate", path, [&](const Json& v, const auto& p) { s.data.translate = rd.boolean(v, p); });
  field(obj, "tol", path, [&](const Json& v, const auto& p) { s.relax.tol = rd.number(v, p); });
  field(obj, "max_steps", path, [&](const Json& v, const auto& p) { s.relax.max_steps = rd.integer(v, p); });
  field(obj, "sigma", path, [&](const Json& v, const auto& p) { s.relax.sigma = rd.number(v, p); });
  field(obj, "u0", path, [&](const Json& v, const auto& p) { s.u0 = rd.optional_number(v, p); });
}

void parse_refine(const Reader& rd, const Json& obj, RefineSection& s) {
  const std::vector<std::string> path{"refine"};
  rd.check_keys(obj, path, {"levels"});
  field(obj, "levels", path, [&](const Json& v, const auto& p) {
    if (!v.is_array()) rd.fail(p, "expected an array of grid sizes");
    s.levels.clear();
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto lp = p;
      lp.push_back(std::to_string(k));
      s.levels.push_back(static_cast<int>(rd.integer(v[k], lp)));
    }
  });
}

template <typename F>
void validated(const Reader& rd, const std::vector<std::string>& path, F&& check) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    rd.fail(path, e.what());
  }
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json matrix_json(const std::vector<std::vector<double>>& m) {
  Json out = Json::array();
  for (const auto& row : m) {
    Json r = Json::array();
    for (double x : row) r.push_back(x);
    out.push_back(r);
  }
  return out;
}

}  // namespace

FlowConfig RunConfig::resolved_flow() const {
  FlowConfig f = flow;
  if (t_end_auto) f.t_end = 1.0 / (4.0 * scenario.dim);
  return f;
}

VerifyParams RunConfig::verify_params() const {
  VerifyParams p;
  p.radius = verify.radius.value_or(0.0);
  p.cm_weight = verify.cm_weight.value_or(0.0);
  p.radius_const = verify.radius_const;
  p.gap_rel = verify.gap_rel;
  p.pair_floor = verify.pair_floor;
  return p;
}

std::vector<QuantityId> RunConfig::quantities() const {
  if (verify.quantities.empty()) return default_quantities(scenario.dim);
  std::vector<QuantityId> out;
  for (const auto& q : verify.quantities) out.push_back(*QuantityId::parse(q));
  return out;
}

RunConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const int line = line_at_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("line " + std::to_string(line) + ": malformed JSON: " + e.what(), "", line);
  }
  const Reader rd(text);
  RunConfig c;
  rd.check_keys(doc, {}, {"flow", "mss", "refine", "scenario", "verify"});
  if (doc.contains("scenario")) parse_scenario(rd, doc.at("scenario"), c.scenario);
  if (doc.contains("flow")) parse_flow(rd, doc.at("flow"), c);
  if (doc.contains("verify")) parse_verify(rd, doc.at("verify"), c.verify);
  if (doc.contains("mss")) parse_mss(rd, doc.at("mss"), c.mss);
  if (doc.contains("refine")) parse_refine(rd, doc.at("refine"), c.refine);

  validated(rd, {"scenario"}, [&] { c.scenario.validate(); });
  validated(rd, {"flow"}, [&] { c.resolved_flow().validate(); });
  validated(rd, {"mss"}, [&] { c.mss.data.validate(); });
  if (c.mss.relax.tol <= 0.0 || c.mss.relax.max_steps <= 0 || c.mss.relax.sigma <= 0.0 || c.mss.relax.sigma > 1.0)
    rd.fail({"mss"}, "tol and max_steps must be positive and sigma in (0, 1]");
  if (c.mss.u0 && *c.mss.u0 < 1.0) rd.fail({"mss", "u0"}, "u0 must be >= 1");
  for (const auto& q : c.quantities()) {
    if (q.kind == QuantityKind::pair && (q.i < 0 || q.j <= q.i || q.j >= c.scenario.dim))
      rd.fail({"verify", "quantities"}, "pair " + q.name() + " out of range for dim " + std::to_string(c.scenario.dim));
  }
  if (c.verify.tolerance && *c.verify.tolerance < 0.0) rd.fail({"verify", "tolerance"}, "must be >= 0");
  if (c.verify.horizon && !(*c.verify.horizon > 0.0)) rd.fail({"verify", "horizon"}, "must be > 0");
  if (c.verify.radius_const && !(*c.verify.radius_const > 0.0)) rd.fail({"verify", "radius_const"}, "must be > 0");
  if (c.verify.cm_weight && !(*c.verify.cm_weight >= 1.0)) rd.fail({"verify", "cm_weight"}, "must be >= 1");
  if (c.verify.radius && !(*c.verify.radius > 0.0)) rd.fail({"verify", "radius"}, "must be > 0");
  return c;
}

std::string serialize_config(const RunConfig& c) {
  Json doc;
  const auto& s = c.scenario;
  doc["scenario"] = {{"name", s.name},
                     {"generator", generator_name(s.generator)},
                     {"dim", s.dim},
                     {"codim", s.codim},
                     {"points", s.points},
                     {"extent", s.extent},
                     {"amplitude", s.amplitude},
                     {"max_freq", s.max_freq},
                     {"seed", s.seed},
                     {"slopes", matrix_json(s.slopes)},
                     {"margin", s.margin}};
  doc["flow"] = {{"dt_safety", c.flow.dt_safety},
                 {"frames", c.flow.frames},
                 {"t_end", c.t_end_auto ? Json(nullptr) : Json(c.flow.t_end)},
                 {"boundary", boundary_name(c.flow.boundary)}};
  doc["verify"] = {{"quantities", c.verify.quantities},
                   {"radius", optional_json(c.verify.radius)},
                   {"cm_weight", optional_json(c.verify.cm_weight)},
                   {"radius_const", optional_json(c.verify.radius_const)},
                   {"tolerance", optional_json(c.verify.tolerance)},
                   {"horizon", optional_json(c.verify.horizon)},
                   {"gap_rel", c.verify.gap_rel},
                   {"pair_floor", c.verify.pair_floor}};
  const auto& d = c.mss.data;
  doc["mss"] = {{"data", mss_data_name(d.kind)},
                {"dim", d.dim},
                {"codim", d.codim},
                {"points", d.points},
                {"extent", d.extent},
                {"amplitude", d.amplitude},
                {"frequency", d.frequency},
                {"seed", d.seed},
                {"slopes", matrix_json(d.slopes)},
                {"translate", d.translate},
                {"tol", c.mss.relax.tol},
                {"max_steps", c.mss.relax.max_steps},
                {"sigma", c.mss.relax.sigma},
                {"u0", optional_json(c.mss.u0)}};
  doc["refine"] = {{"levels", c.refine.levels}};
  return canonical_dump(doc);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  int depth = 0;
  auto flush = [&] {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    item.clear();
  };
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      flush();
    } else {
      item += ch;
    }
  }
  flush();
  return out;
}

}  // namespace mcflab::cli
