#include "fracsus/io.hpp"

#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fracsus/errors.hpp"
#include "fracsus/kernels.hpp"

namespace fracsus {

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ValidationError(fmt::format("unknown format '{}' (csv|json)", s));
}

std::uint64_t fnv1a(const std::string& bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0 && std::signbit(v)) return "-0.0";  // "-0" would read back as the integer 0
  return fmt::format("{:.17g}", v);
}

namespace {

void dump_into(const Json& j, int indent, int depth, std::string& out) {
  const bool pretty = indent >= 0;
  auto newline = [&](int d) {
    if (!pretty) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += pretty ? ": " : ":";
        dump_into(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_into(v, indent, depth + 1, out);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      // Non-finite reals are not JSON numbers; spell them as strings.
      out += std::isfinite(v) ? format_real(v) : Json(format_real(v)).dump();
      return;
    }
    default:
      out += j.dump();
  }
}

double real_from(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw FormatError(fmt::format("{}: expected a real, got {}", where, j.dump()));
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(fmt::format("config: '{}' must be an object", where));
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ValidationError(fmt::format("config: unknown key '{}' in '{}'", it.key(), where));
    }
  }
}

template <class T>
void read(const Json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(fmt::format("config: '{}.{}' has the wrong type", where, key));
  }
}

std::string side_name(Side s) { return s == Side::Plus ? "+" : "-"; }

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump_into(j, indent, 0, out);
  if (indent >= 0) out += '\n';
  return out;
}

// -------------------------------------------------------------- config

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig c;
  check_keys(j, {"family", "density", "fraccalc", "susceptibility", "output"}, "<root>");
  if (j.contains("family")) {
    const auto& f = j["family"];
    check_keys(f, {"kind", "t0", "t_min", "t_max", "direction", "K"}, "family");
    read(f, "kind", c.family.kind, "family");
    if (f.contains("t0")) {
      // Accept a number for convenience; a string keeps all digits.
      c.family.t0 = f["t0"].is_string() ? f["t0"].get<std::string>() : format_real(real_from(f["t0"], "family.t0"));
    }
    read(f, "t_min", c.family.t_min, "family");
    read(f, "t_max", c.family.t_max, "family");
    read(f, "direction", c.family.direction, "family");
    read(f, "K", c.family.K, "family");
  }
  if (j.contains("density")) {
    const auto& d = j["density"];
    check_keys(d, {"N", "tol", "iters", "K_spikes", "model"}, "density");
    read(d, "N", c.density.N, "density");
    read(d, "tol", c.density.tol, "density");
    read(d, "iters", c.density.iters, "density");
    read(d, "K_spikes", c.density.K_spikes, "density");
    read(d, "model", c.density.model, "density");
  }
  if (j.contains("fraccalc")) {
    const auto& q = j["fraccalc"];
    check_keys(q, {"panel_order", "grading_ratio", "grading_levels", "tail_cutoff", "inner_cutoff"}, "fraccalc");
    read(q, "panel_order", c.fraccalc.panel_order, "fraccalc");
    read(q, "grading_ratio", c.fraccalc.grading_ratio, "fraccalc");
    read(q, "grading_levels", c.fraccalc.grading_levels, "fraccalc");
    read(q, "inner_cutoff", c.fraccalc.inner_cutoff, "fraccalc");
    if (q.contains("tail_cutoff") && !q["tail_cutoff"].is_null()) {
      c.fraccalc.tail_cutoff = real_from(q["tail_cutoff"], "fraccalc.tail_cutoff");
    }
  }
  if (j.contains("susceptibility")) {
    const auto& s = j["susceptibility"];
    check_keys(s, {"kind", "eta", "phi", "J", "omega", "z", "tgrid", "j_switch"}, "susceptibility");
    read(s, "kind", c.susceptibility.kind, "susceptibility");
    if (s.contains("eta")) {
      c.susceptibility.eta.clear();
      if (s["eta"].is_array()) {
        for (const auto& e : s["eta"]) c.susceptibility.eta.push_back(real_from(e, "susceptibility.eta"));
      } else {
        c.susceptibility.eta.push_back(real_from(s["eta"], "susceptibility.eta"));
      }
    }
    read(s, "phi", c.susceptibility.phi, "susceptibility");
    read(s, "J", c.susceptibility.J, "susceptibility");
    read(s, "j_switch", c.susceptibility.j_switch, "susceptibility");
    if (s.contains("omega")) {
      c.susceptibility.omega.clear();
      for (const auto& iv : s["omega"]) {
        if (!iv.is_array() || iv.size() != 2) throw ValidationError("config: omega entries are [lo, hi]");
        c.susceptibility.omega.emplace_back(real_from(iv[0], "omega"), real_from(iv[1], "omega"));
      }
    }
    if (s.contains("z")) {
      c.susceptibility.z.clear();
      for (const auto& z : s["z"]) {
        if (z.is_array() && z.size() == 2) {
          c.susceptibility.z.emplace_back(real_from(z[0], "z"), real_from(z[1], "z"));
        } else {
          c.susceptibility.z.emplace_back(real_from(z, "z"), 0.0);
        }
      }
    }
    if (s.contains("tgrid")) {
      const auto& g = s["tgrid"];
      check_keys(g, {"ratio", "levels", "panel_order", "subpanels"}, "susceptibility.tgrid");
      read(g, "ratio", c.susceptibility.tgrid.ratio, "tgrid");
      read(g, "levels", c.susceptibility.tgrid.levels, "tgrid");
      read(g, "panel_order", c.susceptibility.tgrid.panel_order, "tgrid");
      read(g, "subpanels", c.susceptibility.tgrid.subpanels, "tgrid");
    }
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    check_keys(o, {"directory", "formats"}, "output");
    read(o, "directory", c.output.directory, "output");
    read(o, "formats", c.output.formats, "output");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("config: cannot open '{}'", path));
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(fmt::format("config: '{}' is not valid JSON: {}", path, e.what()));
  }
  return from_json(j);
}

Json RunConfig::to_json() const {
  Json j;
  j["family"] = {{"kind", family.kind},   {"t0", family.t0},
                 {"t_min", family.t_min}, {"t_max", family.t_max},
                 {"direction", family.direction}, {"K", family.K}};
  j["density"] = {{"N", density.N},
                  {"tol", density.tol},
                  {"iters", density.iters},
                  {"K_spikes", density.K_spikes},
                  {"model", density.model}};
  j["fraccalc"] = {{"panel_order", fraccalc.panel_order},
                   {"grading_ratio", fraccalc.grading_ratio},
                   {"grading_levels", fraccalc.grading_levels},
                   {"tail_cutoff", fraccalc.tail_cutoff ? Json(*fraccalc.tail_cutoff) : Json(nullptr)},
                   {"inner_cutoff", fraccalc.inner_cutoff}};
  Json omega = Json::array();
  for (const auto& [lo, hi] : susceptibility.omega) omega.push_back({lo, hi});
  Json zs = Json::array();
  for (const auto& z : susceptibility.z) zs.push_back({z.real(), z.imag()});
  j["susceptibility"] = {{"kind", susceptibility.kind},
                         {"eta", susceptibility.eta},
                         {"phi", susceptibility.phi},
                         {"J", susceptibility.J},
                         {"j_switch", susceptibility.j_switch},
                         {"omega", omega},
                         {"z", zs},
                         {"tgrid",
                          {{"ratio", susceptibility.tgrid.ratio},
                           {"levels", susceptibility.tgrid.levels},
                           {"panel_order", susceptibility.tgrid.panel_order},
                           {"subpanels", susceptibility.tgrid.subpanels}}}};
  j["output"] = {{"directory", output.directory}, {"formats", output.formats}};
  return j;
}

void RunConfig::validate() const {
  if (family.kind != "quadratic" && family.kind != "generalized") {
    throw ValidationError(fmt::format("config: family.kind '{}' (quadratic|generalized)", family.kind));
  }
  try {
    (void)Real50(family.t0);
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("config: family.t0 '{}' is not a number", family.t0));
  }
  if (!(family.t_min < 0.0 && family.t_max > 0.0)) {
    throw ValidationError("config: window needs t_min < 0 < t_max");
  }
  if (family.direction.empty()) throw ValidationError("config: family.direction is empty");
  if (family.K < 1) throw ValidationError("config: family.K < 1");
  if (density.N < 16) throw ValidationError(fmt::format("config: density.N={} < 16", density.N));
  if (!(density.tol > 0.0) || density.iters < 1) throw ValidationError("config: density tol/iters");
  if (density.K_spikes < 1) throw ValidationError("config: density.K_spikes < 1");
  if (density.model != "ulam" && density.model != "exact") {
    throw ValidationError(fmt::format("config: density.model '{}' (ulam|exact)", density.model));
  }
  try {
    fraccalc.validate();
  } catch (const Error& e) {
    throw ValidationError(fmt::format("config: fraccalc: {}", e.what()));
  }
  (void)parse_kind(susceptibility.kind);
  (void)Observable::parse(susceptibility.phi);
  if (susceptibility.eta.empty()) throw ValidationError("config: susceptibility.eta is empty");
  if (susceptibility.j_switch < 0) throw ValidationError("config: j_switch < 0");
  SusceptibilityRequest req;
  req.kind = parse_kind(susceptibility.kind);
  req.J = susceptibility.J;
  req.tgrid = susceptibility.tgrid;
  req.omega = OmegaSet{susceptibility.omega};
  for (double eta : susceptibility.eta) {
    req.eta = eta;
    req.validate(window());
  }
  for (const auto& f : output.formats) (void)parse_format(f);
}

std::uint64_t RunConfig::hash() const { return fnv1a(dump_json(to_json(), -1)); }

UnimodalFamily RunConfig::make_family() const {
  const Real50 t0(family.t0);
  if (family.kind == "quadratic") return UnimodalFamily::quadratic(t0, window());
  return UnimodalFamily::generalized(t0, window(), family.direction);
}

Json run_metadata(const RunConfig& cfg, const std::string& command) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  Json m;
  m["command"] = command;
  m["config"] = cfg.to_json();
  m["config_hash"] = fmt::format("{:016x}", cfg.hash());
  m["version"] = kVersion;
  m["compiler"] = fmt::format("{} {}.{}.{}",
#if defined(__clang__)
                              "clang", __clang_major__, __clang_minor__, __clang_patchlevel__
#else
                              "gcc", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__
#endif
  );
  m["boost"] = fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100);
  m["fmt"] = FMT_VERSION;
  m["threads"] = thread_limit();
  m["timestamp_utc"] = buf;
  return m;
}

// -------------------------------------------------------------- documents

std::string to_csv(const Table& t, const Json* metadata) {
  std::string out;
  if (metadata != nullptr) {
    for (auto it = metadata->begin(); it != metadata->end(); ++it) {
      out += fmt::format("# {}={}\n", it.key(), dump_json(it.value(), -1));
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

Json to_json(const CriticalOrbitData& d) {
  Json rows = Json::array();
  for (int k = 0; k <= d.length; ++k) {
    Json r{{"k", k}, {"c", d.c(k)}};
    if (k >= 1) {
      r["D"] = d.d(k);
      r["sigma"] = d.sigma(k);
    }
    rows.push_back(r);
  }
  return Json{{"K", d.length}, {"orbit", rows}};
}

Json to_json(const CEEstimate& e) { return Json{{"lambda_hat", e.lambda_hat}, {"per_step", e.per_step}}; }

Json to_json(const MTCertificate& m) {
  return Json{{"preperiod", m.preperiod},
              {"period", m.period},
              {"multiplier", m.multiplier},
              {"signed_multiplier", m.signed_multiplier},
              {"residual", m.residual}};
}

Json to_json(const DecayFit& f) {
  return Json{{"C_hat", f.C}, {"j_hi", f.j_hi}, {"j_lo", f.j_lo}, {"r2", f.r2}, {"theta_hat", f.theta}};
}

Json to_json(const RadiusEstimate& r) {
  return Json{{"radius", r.radius}, {"method", r.method}, {"ratio_test", r.ratio_test},
              {"j_lo", r.j_lo},     {"j_hi", r.j_hi},     {"points", r.points}};
}

Json to_json(const SeriesEvaluation& e) {
  return Json{{"z", {e.z.real(), e.z.imag()}},
              {"value", {e.value.real(), e.value.imag()}},
              {"tail_bound", e.tail_bound},
              {"divergent_bound", e.divergent_bound},
              {"J", e.J}};
}

Json to_json(const CoefficientSequence& s) {
  Json methods = Json::array();
  for (auto m : s.methods) methods.push_back(to_string(m));
  Json checks = Json::array();
  for (const auto& c : s.ulam_check) checks.push_back(c ? Json(*c) : Json(nullptr));
  return Json{{"values", s.values}, {"methods", methods}, {"ulam_check", checks},
              {"eta", s.eta},       {"kind", s.kind},     {"observable", s.observable}};
}

CoefficientSequence sequence_from_json(const Json& j) {
  CoefficientSequence s;
  try {
    for (const auto& v : j.at("values")) s.values.push_back(real_from(v, "values"));
    for (const auto& m : j.at("methods")) {
      const auto name = m.get<std::string>();
      if (name == "quadrature") {
        s.methods.push_back(CorrelationMethod::Quadrature);
      } else if (name == "ulam") {
        s.methods.push_back(CorrelationMethod::Ulam);
      } else {
        throw FormatError(fmt::format("sequence: unknown method '{}'", name));
      }
    }
    for (const auto& c : j.at("ulam_check")) {
      s.ulam_check.push_back(c.is_null() ? std::nullopt : std::optional<double>(real_from(c, "ulam_check")));
    }
    s.eta = real_from(j.at("eta"), "eta");
    s.kind = j.at("kind").get<std::string>();
    s.observable = j.at("observable").get<std::string>();
  } catch (const Json::exception& e) {
    throw FormatError(fmt::format("sequence: malformed document: {}", e.what()));
  }
  if (s.methods.size() != s.values.size() || s.ulam_check.size() != s.values.size()) {
    throw FormatError("sequence: values, methods and ulam_check differ in length");
  }
  return s;
}

Json to_json(const DensityModel& m) {
  Json atoms = Json::array();
  for (const auto& a : m.spikes.atoms) {
    atoms.push_back(Json{{"c", a.anchor},
                         {"beta", a.exponent},
                         {"sigma", side_name(a.side)},
                         {"A", a.width},
                         {"coefficient", a.coefficient}});
  }
  Json per_k = Json::array();
  for (const auto& r : m.per_k) {
    per_k.push_back(Json{{"k", r.k},
                         {"anchor", r.anchor},
                         {"side", side_name(r.side)},
                         {"sigma", r.sigma},
                         {"side_matches_sigma", r.side_matches_sigma},
                         {"abs_D", r.abs_derivative},
                         {"C0", r.c0},
                         {"C1", r.c1},
                         {"width", r.width}});
  }
  Json groups = Json::array();
  for (const auto& g : m.groups) {
    Json members = g.members;
    groups.push_back(Json{{"anchor", g.anchor},
                          {"side", side_name(g.side)},
                          {"members", members},
                          {"total0", g.total0},
                          {"total1", g.total1},
                          {"r2", g.r2},
                          {"empirical_side", g.empirical_side ? Json(side_name(*g.empirical_side)) : Json(nullptr)}});
  }
  Json j{{"atoms", atoms},
         {"per_k", per_k},
         {"groups", groups},
         {"K", m.K},
         {"mass", m.mass()},
         {"dominant_r2", m.dominant_r2},
         {"smooth_nodes", m.smooth.size()},
         {"spike_law_constant", m.spike_law_constant()}};
  j["mt"] = m.mt ? to_json(*m.mt) : Json(nullptr);
  return j;
}

Json to_json(const UlamOperator& op) {
  return Json{{"N", op.grid.n},           {"lo", op.grid.lo},
              {"hi", op.grid.hi},         {"t", op.t},
              {"nnz", op.forward.nnz()},  {"max_row_defect", op.max_row_defect()}};
}

Table to_table(const CriticalOrbitData& d) {
  Table t{{"k", "c_k", "D_k", "sigma_k"}, {}};
  for (int k = 0; k <= d.length; ++k) {
    if (k == 0) {
      t.rows.push_back({"0", format_real(d.c(0)), "", ""});
    } else {
      t.rows.push_back({std::to_string(k), format_real(d.c(k)), format_real(d.d(k)), d.sigma(k) > 0 ? "+" : "-"});
    }
  }
  return t;
}

Table to_table(const CoefficientSequence& s) {
  Table t{{"j", "a_j", "method", "abs"}, {}};
  for (int j = 0; j <= s.J(); ++j) {
    const double a = s.values[static_cast<std::size_t>(j)];
    t.rows.push_back({std::to_string(j), format_real(a), to_string(s.methods[static_cast<std::size_t>(j)]),
                      format_real(std::abs(a))});
  }
  return t;
}

Table to_table(const GridFunction& g, const std::string& column) {
  Table t{{"x", column}, {}};
  for (std::size_t i = 0; i < g.size(); ++i) {
    t.rows.push_back({format_real(g.node(i)), format_real(g.values()[i])});
  }
  return t;
}

Table to_table(const DensityModel& m) {
  Table t{{"x", "total", "spike", "smooth"}, {}};
  for (std::size_t i = 0; i < m.smooth.size(); ++i) {
    const double x = m.smooth.node(i);
    const double s = m.spikes.eval(x);
    const double r = m.smooth.values()[i];
    t.rows.push_back({format_real(x), format_real(s + r), format_real(s), format_real(r)});
  }
  return t;
}

Table to_table(const UlamOperator& op) {
  throw FormatError(fmt::format("UlamOperator (N={}, nnz={}) has no CSV form; use the JSON summary",
                                op.grid.n, op.forward.nnz()));
}

std::string write_artifact(const std::string& dir, const std::string& stem, const Json& data,
                           const Json& metadata) {
  std::filesystem::create_directories(dir);
  const auto path = (std::filesystem::path(dir) / (stem + ".json")).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot write '{}'", path));
  out << dump_json(Json{{"data", data}, {"metadata", metadata}});
  return path;
}

std::string write_artifact(const std::string& dir, const std::string& stem, const Table& data,
                           const Json& metadata) {
  std::filesystem::create_directories(dir);
  const auto path = (std::filesystem::path(dir) / (stem + ".csv")).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot write '{}'", path));
  out << to_csv(data, &metadata);
  return path;
}

}  // namespace fracsus
