#include "ionxy/scenario.hpp"

#include "ionxy/effective.hpp"
#include "ionxy/evolution.hpp"
#include "ionxy/fit.hpp"
#include "ionxy/floquet.hpp"
#include "ionxy/magnus.hpp"
#include "ionxy/units.hpp"

#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace ionxy {

namespace {

constexpr const char* kModule = "cli-io";

enum class Dim { Frequency, Time, Angle, Mass, Wavenumber, Length };

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::Frequency: return "frequency";
    case Dim::Time: return "time";
    case Dim::Angle: return "angle";
    case Dim::Mass: return "mass";
    case Dim::Wavenumber: return "wave number";
    case Dim::Length: return "length";
  }
  return "?";
}

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::ValidationError, kModule, "parse_scenario", msg, path);
}

/// Unit factor to the internal representation; nullopt when the unit is not allowed.
std::optional<double> unit_factor(Dim d, const std::string& u, bool si) {
  static const std::map<std::string, double> si_freq{
      {"Hz", kTwoPi}, {"kHz", kTwoPi * 1e3}, {"MHz", kTwoPi * 1e6}, {"rad/s", 1.0}};
  static const std::map<std::string, double> dl_freq{{"2pi", kTwoPi}, {"rad", 1.0}};
  static const std::map<std::string, double> si_time{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}};
  static const std::map<std::string, double> dl_time{{"1", 1.0}};
  static const std::map<std::string, double> angle{{"rad", 1.0}, {"deg", kPi / 180.0}, {"pi", kPi}};
  static const std::map<std::string, double> mass{{"u", constants::atomic_mass}, {"kg", 1.0}};
  static const std::map<std::string, double> wavenumber{{"1/m", 1.0}, {"1/um", 1e6}, {"1/nm", 1e9}};
  static const std::map<std::string, double> length{{"m", 1.0}, {"um", 1e-6}, {"nm", 1e-9}};
  const std::map<std::string, double>* table = nullptr;
  switch (d) {
    case Dim::Frequency: table = si ? &si_freq : &dl_freq; break;
    case Dim::Time: table = si ? &si_time : &dl_time; break;
    case Dim::Angle: table = &angle; break;
    case Dim::Mass: table = &mass; break;
    case Dim::Wavenumber: table = &wavenumber; break;
    case Dim::Length: table = &length; break;
  }
  auto it = table->find(u);
  if (it == table->end()) return std::nullopt;
  return it->second;
}

std::string allowed_units(Dim d, bool si) {
  switch (d) {
    case Dim::Frequency: return si ? "Hz, kHz, MHz, rad/s" : "2pi, rad";
    case Dim::Time: return si ? "s, ms, us" : "1";
    case Dim::Angle: return "rad, deg, pi";
    case Dim::Mass: return "u, kg";
    case Dim::Wavenumber: return "1/m, 1/um, 1/nm";
    case Dim::Length: return "m, um, nm";
  }
  return "";
}

std::string canonical_unit(Dim d, bool si) {
  switch (d) {
    case Dim::Frequency: return si ? "rad/s" : "rad";
    case Dim::Time: return si ? "s" : "1";
    case Dim::Angle: return "rad";
    case Dim::Mass: return "kg";
    case Dim::Wavenumber: return "1/m";
    case Dim::Length: return "m";
  }
  return "";
}

/// Object view that remembers which keys were read, so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) invalid(path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) invalid(sub(key), "required key is missing");
    return *v;
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw Error(ErrorKind::UnknownKey, kModule, "parse_scenario", fmt::format("unknown key '{}'", it.key()),
                    sub(it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string idx(const std::string& path, std::size_t i) { return fmt::format("{}[{}]", path, i); }

double number(const json& v, const std::string& path) {
  if (!v.is_number()) invalid(path, "expected a number");
  return v.get<double>();
}

bool boolean(const json& v, const std::string& path) {
  if (!v.is_boolean()) invalid(path, "expected true or false");
  return v.get<bool>();
}

std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) invalid(path, "expected a string");
  return v.get<std::string>();
}

long long integer(const json& v, const std::string& path, long long lo, long long hi) {
  if (!v.is_number_integer()) invalid(path, "expected an integer");
  const auto x = v.get<long long>();
  if (x < lo || x > hi) invalid(path, fmt::format("must be in [{}, {}]", lo, hi));
  return x;
}

double parse_number_text(const std::string& s, const std::string& path) {
  double x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) invalid(path, fmt::format("'{}' is not a number", s));
  return x;
}

double quantity(const json& v, Dim d, bool si, const std::string& path) {
  double value = 0;
  std::string unit;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto sp = s.find(' ');
    if (sp == std::string::npos)
      invalid(path, fmt::format("'{}' needs a {} unit tag ({})", s, dim_name(d), allowed_units(d, si)));
    value = parse_number_text(s.substr(0, sp), path);
    unit = s.substr(s.find_first_not_of(' ', sp));
  } else if (v.is_object()) {
    Reader r(v, path);
    value = number(r.require("value"), r.sub("value"));
    unit = string(r.require("unit"), r.sub("unit"));
    r.finish();
  } else if (v.is_number()) {
    invalid(path, fmt::format("bare number for a {}; add a unit tag ({})", dim_name(d), allowed_units(d, si)));
  } else {
    invalid(path, fmt::format("expected a {} such as \"1.5 {}\"", dim_name(d), canonical_unit(d, si)));
  }
  const auto f = unit_factor(d, unit, si);
  if (!f)
    invalid(path, fmt::format("unit '{}' is not a {} unit in the {} system ({})", unit, dim_name(d),
                              si ? "si" : "dimensionless", allowed_units(d, si)));
  if (!std::isfinite(value)) invalid(path, "value must be finite");
  return value * *f;
}

std::string q(double value, Dim d, bool si) { return fmt::format("{} {}", value, canonical_unit(d, si)); }

std::vector<double> quantity_list(const json& v, Dim d, bool si, const std::string& path, std::size_t n) {
  std::vector<double> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(quantity(v[i], d, si, idx(path, i)));
    if (n && out.size() != n) invalid(path, fmt::format("expected {} entries, got {}", n, out.size()));
  } else {
    out.assign(n ? n : 1, quantity(v, d, si, path));
  }
  return out;
}

std::vector<double> number_list(const json& v, const std::string& path, std::size_t n) {
  std::vector<double> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], idx(path, i)));
    if (n && out.size() != n) invalid(path, fmt::format("expected {} entries, got {}", n, out.size()));
  } else {
    out.assign(n ? n : 1, number(v, path));
  }
  return out;
}

std::vector<std::size_t> index_list(const json& v, const std::string& path, std::size_t bound) {
  if (!v.is_array()) invalid(path, "expected a list of indices");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto k = static_cast<std::size_t>(integer(v[i], idx(path, i), 0, 1 << 20));
    if (bound && k >= bound) invalid(idx(path, i), fmt::format("index {} out of range (< {})", k, bound));
    if (std::find(out.begin(), out.end(), k) != out.end()) invalid(idx(path, i), "duplicate index");
    out.push_back(k);
  }
  return out;
}

Eigen::MatrixXd matrix(const json& v, const std::string& path, std::size_t rows, std::size_t cols) {
  if (!v.is_array() || v.size() != rows) invalid(path, fmt::format("expected {} rows", rows));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = number_list(v[r], idx(path, r), cols);
    if (!v[r].is_array()) invalid(idx(path, r), "expected a list");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

/// Re-tags errors from library calls with the scenario path that fed them.
template <class F>
auto at(const std::string& path, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnknownKey || e.kind() == ErrorKind::ParseError) throw;
    if (e.module() == kModule) throw;
    throw e.with_parameter(path);
  }
}

Envelope parse_envelope(const json& v, const std::string& path) {
  Reader r(v, path);
  const std::string type = string(r.require("type"), r.sub("type"));
  Envelope env;
  if (type == "flat") {
    env = Envelope(FlatEnvelope{});
  } else if (type == "blackman") {
    const double f = r.has("edge_fraction") ? number(*r.get("edge_fraction"), r.sub("edge_fraction")) : 0.4;
    env = at(r.sub("edge_fraction"), [&] { return Envelope(BlackmanEdges{f}); });
  } else if (type == "piecewise") {
    const json& k = r.require("knots");
    if (!k.is_array()) invalid(r.sub("knots"), "expected a list of [s, value] pairs");
    PiecewiseLinear p;
    for (std::size_t i = 0; i < k.size(); ++i) {
      const auto pair = number_list(k[i], idx(r.sub("knots"), i), 2);
      if (!k[i].is_array()) invalid(idx(r.sub("knots"), i), "expected [s, value]");
      p.knots.emplace_back(pair[0], pair[1]);
    }
    env = at(r.sub("knots"), [&] { return Envelope(p); });
  } else {
    invalid(r.sub("type"), fmt::format("unknown envelope '{}' (flat, blackman, piecewise)", type));
  }
  r.finish();
  return env;
}

json envelope_json(const Envelope& e) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FlatEnvelope>) {
          return {{"type", "flat"}};
        } else if constexpr (std::is_same_v<T, BlackmanEdges>) {
          return {{"type", "blackman"}, {"edge_fraction", s.edge_fraction}};
        } else {
          json k = json::array();
          for (const auto& [x, y] : s.knots) k.push_back({x, y});
          return {{"type", "piecewise"}, {"knots", k}};
        }
      },
      e.shape());
}

struct ParseContext {
  bool si = true;
  std::size_t n = 0;
  const ModeSet* modes = nullptr;
  CouplingOptions copt;
};

SDFTone parse_tone(const json& v, const std::string& path, const ParseContext& c,
                   const std::vector<SDFTone>& earlier) {
  Reader r(v, path);
  SDFTone t;
  // spin axis
  if (r.has("spin") && r.has("spin_phase")) invalid(path, "give either spin or spin_phase");
  if (const json* s = r.get("spin")) {
    const std::string ax = string(*s, r.sub("spin"));
    if (ax == "x") t.spin_phase = 0.0;
    else if (ax == "y") t.spin_phase = kPi / 2;
    else invalid(r.sub("spin"), "spin must be \"x\" or \"y\"");
  } else if (const json* s = r.get("spin_phase")) {
    t.spin_phase = quantity(*s, Dim::Angle, true, r.sub("spin_phase"));
  } else {
    invalid(path, "tone needs spin (\"x\"/\"y\") or spin_phase");
  }
  // frequency
  if (r.has("mu") == r.has("detuning")) invalid(path, "give exactly one of mu or detuning");
  if (const json* m = r.get("mu")) {
    t.mu = quantity(*m, Dim::Frequency, c.si, r.sub("mu"));
    if (r.has("reference_mode")) invalid(r.sub("reference_mode"), "reference_mode only applies with detuning");
  } else {
    const double det = quantity(*r.get("detuning"), Dim::Frequency, c.si, r.sub("detuning"));
    std::size_t ref = 0;
    if (const json* k = r.get("reference_mode"))
      ref = static_cast<std::size_t>(integer(*k, r.sub("reference_mode"), 0, 1 << 20));
    if (ref >= c.modes->n_modes())
      invalid(r.sub("reference_mode"), fmt::format("mode {} does not exist ({} modes)", ref, c.modes->n_modes()));
    t.mu = c.modes->omega[ref] + det;
  }
  if (!(t.mu > 0)) invalid(r.sub("mu"), "tone frequency must be > 0");
  for (std::size_t m = 0; m < c.modes->n_modes(); ++m) {
    if (!c.copt.mode_mask.empty() &&
        std::find(c.copt.mode_mask.begin(), c.copt.mode_mask.end(), m) == c.copt.mode_mask.end())
      continue;
    const double gap = std::abs(t.mu - c.modes->omega[m]);
    if (gap < c.copt.resonance_guard || gap == 0.0)
      throw Error(ErrorKind::ResonantTone, kModule, "parse_scenario",
                  fmt::format("tone at {:.9g} rad/s sits on mode {} ({:.9g} rad/s)", t.mu, m, c.modes->omega[m]),
                  r.sub(r.has("mu") ? "mu" : "detuning"));
  }
  if (const json* p = r.get("motional_phase")) t.motional_phase = quantity_list(*p, Dim::Angle, true, r.sub("motional_phase"), c.n);
  if (const json* p = r.get("stark_factor")) t.stark_factor = number_list(*p, r.sub("stark_factor"), c.n);
  if (const json* e = r.get("envelope")) t.envelope = parse_envelope(*e, r.sub("envelope"));
  // amplitude last: match_tone needs mu
  const json& rabi = r.require("rabi");
  if (rabi.is_object() && rabi.contains("match_tone")) {
    Reader rr(rabi, r.sub("rabi"));
    const auto k = static_cast<std::size_t>(integer(rr.require("match_tone"), rr.sub("match_tone"), 0, 1 << 20));
    rr.finish();
    if (k >= earlier.size()) invalid(rr.sub("match_tone"), "must name an earlier tone of the same segment");
    const SDFTone scaled = at(r.sub("rabi"), [&] { return scale_omega_y(earlier[k], t.mu, *c.modes, c.copt); });
    t.rabi = scaled.rabi;
  } else {
    t.rabi = quantity_list(rabi, Dim::Frequency, c.si, r.sub("rabi"), c.n);
  }
  r.finish();
  at(path, [&] { t.validate(); });
  if (t.n_ions() != c.n) invalid(r.sub("rabi"), fmt::format("expected {} Rabi rates", c.n));
  return t;
}

json tone_json(const SDFTone& t, bool si) {
  json j;
  j["spin_phase"] = q(t.spin_phase, Dim::Angle, si);
  j["mu"] = q(t.mu, Dim::Frequency, si);
  json rabi = json::array();
  for (double r : t.rabi) rabi.push_back(q(r, Dim::Frequency, si));
  j["rabi"] = rabi;
  if (!t.motional_phase.empty()) {
    json p = json::array();
    for (double x : t.motional_phase) p.push_back(q(x, Dim::Angle, si));
    j["motional_phase"] = p;
  }
  if (!t.stark_factor.empty()) j["stark_factor"] = t.stark_factor;
  j["envelope"] = envelope_json(t.envelope);
  return j;
}

std::vector<SDFTone> parse_tones(const json& v, const std::string& path, const ParseContext& c) {
  if (!v.is_array() || v.empty()) invalid(path, "expected a non-empty list of tones");
  std::vector<SDFTone> tones;
  for (std::size_t i = 0; i < v.size(); ++i) tones.push_back(parse_tone(v[i], idx(path, i), c, tones));
  return tones;
}

/// Returns the x and y tones of a one-segment two-tone drive.
std::pair<const SDFTone*, const SDFTone*> xy_pair(const DriveProgram& d, const std::string& op) {
  if (d.segments.size() != 1 || d.segments[0].tones.size() != 2)
    throw Error(ErrorKind::UnsupportedDrive, kModule, op, "expected one segment with an x tone and a y tone",
                "drive.tones");
  const SDFTone* a = &d.segments[0].tones[0];
  const SDFTone* b = &d.segments[0].tones[1];
  if (std::abs(a->spin_phase) > 1e-12) std::swap(a, b);
  if (std::abs(a->spin_phase) > 1e-12 || std::abs(b->spin_phase - kPi / 2) > 1e-12)
    throw Error(ErrorKind::UnsupportedDrive, kModule, op, "tones must carry spin phases 0 and pi/2",
                "drive.tones");
  return {a, b};
}

double time_unit_factor(const std::string& unit, bool si) {
  if (unit.empty()) return 1.0;
  const auto f = unit_factor(Dim::Time, unit, si);
  if (!f) invalid("output.time_unit", fmt::format("unknown time unit '{}'", unit));
  return *f;
}

}  // namespace

std::string to_string(RunKind k) {
  switch (k) {
    case RunKind::Modes: return "modes";
    case RunKind::Couplings: return "couplings";
    case RunKind::Engineer: return "engineer";
    case RunKind::Evolve: return "evolve";
    case RunKind::FloquetScan: return "floquet-scan";
    case RunKind::Diagnostics: return "diagnostics";
  }
  return "?";
}

RunKind run_kind_from(const std::string& verb) {
  for (auto k : {RunKind::Modes, RunKind::Couplings, RunKind::Engineer, RunKind::Evolve, RunKind::FloquetScan,
                 RunKind::Diagnostics})
    if (to_string(k) == verb) return k;
  invalid("run", fmt::format("unknown run kind '{}' (modes, couplings, engineer, evolve, floquet-scan, diagnostics)",
                             verb));
}

ModeSet Scenario::mode_set() const {
  if (literal_modes) return *literal_modes;
  return chain_modes(n_ions, *trap, axis);
}

CouplingOptions Scenario::coupling_options() const { return {.resonance_guard = resonance_guard, .mode_mask = mode_mask}; }

json error_json(const Error& e) {
  return {{"error", std::string(to_string(e.kind()))},
          {"exit_code", exit_code(e.kind())},
          {"module", e.module()},
          {"operation", e.operation()},
          {"parameter", e.parameter()},
          {"message", e.what()}};
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::IoError, kModule, "parse_scenario", fmt::format("cannot open {}", path.string()),
                "scenario");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path.string());
}

Scenario parse_scenario_text(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw Error(ErrorKind::ParseError, kModule, "parse_scenario",
                fmt::format("{}:{}:{}: {}", source, line, col, msg), fmt::format("line {}, column {}", line, col));
  }
  // a run manifest embeds the resolved scenario
  if (doc.is_object() && doc.contains("scenario") && doc.contains("tool")) doc = doc["scenario"];
  // a misspelt section should read as unknown, not as the required one missing
  if (doc.is_object()) {
    static const std::set<std::string> known{"run",       "units",  "n_ions", "trap",     "modes",
                                             "axis",      "mode_mask", "resonance_guard", "hilbert",
                                             "drive",     "engineer", "evolve", "floquet", "diagnostics",
                                             "output"};
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (!known.count(it.key()))
        throw Error(ErrorKind::UnknownKey, kModule, "parse_scenario", fmt::format("unknown key '{}'", it.key()),
                    it.key());
  }

  Reader root(doc, "");
  Scenario s;
  s.run = run_kind_from(string(root.require("run"), "run"));
  if (const json* u = root.get("units")) {
    s.units = string(*u, "units");
    if (s.units != "si" && s.units != "dimensionless") invalid("units", "units must be \"si\" or \"dimensionless\"");
  }
  const bool si = s.units == "si";
  s.n_ions = static_cast<std::size_t>(integer(root.require("n_ions"), "n_ions", 1, 200));

  if (root.has("trap") && root.has("modes") && root.get("modes")->is_object() && root.get("modes")->contains("omega"))
    invalid("modes", "give either a trap or literal modes, not both");
  if (const json* t = root.get("trap")) {
    if (!si) invalid("trap", "a trap needs the si unit system");
    Reader r(*t, "trap");
    TrapConfig trap;
    trap.omega_x = quantity(r.require("omega_x"), Dim::Frequency, si, "trap.omega_x");
    trap.omega_y = quantity(r.require("omega_y"), Dim::Frequency, si, "trap.omega_y");
    trap.omega_z = quantity(r.require("omega_z"), Dim::Frequency, si, "trap.omega_z");
    trap.mass = quantity(r.require("mass"), Dim::Mass, si, "trap.mass");
    const json& dk = r.require("delta_k");
    if (dk.is_object() && dk.contains("wavelength")) {
      Reader rk(dk, "trap.delta_k");
      const double lambda = quantity(rk.require("wavelength"), Dim::Length, si, "trap.delta_k.wavelength");
      const double factor = rk.has("factor") ? number(*rk.get("factor"), "trap.delta_k.factor") : 1.0;
      rk.finish();
      if (!(lambda > 0)) invalid("trap.delta_k.wavelength", "wavelength must be > 0");
      trap.delta_k = factor * wave_number(lambda);
    } else {
      trap.delta_k = quantity(dk, Dim::Wavenumber, si, "trap.delta_k");
    }
    r.finish();
    at("trap", [&] { trap.validate(); });
    s.trap = trap;
  }
  if (const json* a = root.get("axis")) {
    const std::string ax = string(*a, "axis");
    if (ax == "X" || ax == "x" || ax == "X'") s.axis = Axis::X;
    else if (ax == "Y" || ax == "y" || ax == "Y'") s.axis = Axis::Y;
    else invalid("axis", "axis must be X or Y");
  }
  if (const json* m = root.get("modes")) {
    if (m->is_object() && m->contains("omega")) {
      Reader r(*m, "modes");
      const json& om = r.require("omega");
      if (!om.is_array() || om.empty()) invalid("modes.omega", "expected a non-empty list");
      auto omega = quantity_list(om, Dim::Frequency, si, "modes.omega", 0);
      const Eigen::MatrixXd eta = matrix(r.require("eta"), "modes.eta", s.n_ions, omega.size());
      std::optional<Eigen::MatrixXd> b;
      if (const json* bj = r.get("b")) b = matrix(*bj, "modes.b", s.n_ions, omega.size());
      std::string label = "literal";
      if (const json* l = r.get("axis_label")) label = string(*l, "modes.axis_label");
      r.finish();
      for (double w : omega)
        if (!(w > 0)) invalid("modes.omega", "mode frequencies must be > 0");
      s.literal_modes = at("modes", [&] { return ModeSet::literal(omega, eta, b, label); });
    } else if (s.run == RunKind::Modes) {
      Reader r(*m, "modes");
      if (const json* n = r.get("n_scan")) {
        if (n->is_object()) {
          Reader rn(*n, "modes.n_scan");
          const auto lo = integer(rn.require("from"), "modes.n_scan.from", 1, 200);
          const auto hi = integer(rn.require("to"), "modes.n_scan.to", lo, 200);
          rn.finish();
          for (auto k = lo; k <= hi; ++k) s.modes.n_scan.push_back(static_cast<std::size_t>(k));
        } else {
          s.modes.n_scan = index_list(*n, "modes.n_scan", 201);
          for (auto k : s.modes.n_scan)
            if (k == 0) invalid("modes.n_scan", "chain sizes must be >= 1");
        }
      }
      r.finish();
    } else {
      invalid("modes", "literal modes need omega and eta");
    }
  }
  if (!s.trap && !s.literal_modes) invalid("trap", "a trap or literal modes are required");
  if (s.run == RunKind::Modes && !s.trap) invalid("trap", "run=modes needs a trap");
  if (s.run == RunKind::Engineer && !s.trap) invalid("trap", "run=engineer needs a trap");

  const ModeSet modes = at(s.trap ? "trap" : "modes", [&] { return s.mode_set(); });
  if (modes.n_ions() != s.n_ions)
    invalid("n_ions", fmt::format("n_ions is {} but the mode set has {} ions", s.n_ions, modes.n_ions()));

  if (const json* mm = root.get("mode_mask")) s.mode_mask = index_list(*mm, "mode_mask", modes.n_modes());
  s.resonance_guard = si ? hz(100.0) : 0.0;
  if (const json* g = root.get("resonance_guard")) {
    s.resonance_guard = quantity(*g, Dim::Frequency, si, "resonance_guard");
    if (s.resonance_guard < 0) invalid("resonance_guard", "must be >= 0");
  }

  // hilbert
  s.hilbert.n_ions = s.n_ions;
  s.hilbert.modes = s.mode_mask;
  if (s.hilbert.modes.empty())
    for (std::size_t m = 0; m < modes.n_modes(); ++m) s.hilbert.modes.push_back(m);
  if (const json* h = root.get("hilbert")) {
    Reader r(*h, "hilbert");
    if (const json* v = r.get("n_max")) s.hilbert.n_max = static_cast<int>(integer(*v, "hilbert.n_max", 1, 1000));
    if (const json* v = r.get("modes")) {
      s.hilbert.modes = index_list(*v, "hilbert.modes", modes.n_modes());
      s.hilbert_modes_given = true;
    }
    if (const json* v = r.get("dimension_cap"))
      s.hilbert.dimension_cap = static_cast<std::size_t>(integer(*v, "hilbert.dimension_cap", 1, 1LL << 40));
    r.finish();
  }

  ParseContext ctx{si, s.n_ions, &modes, s.coupling_options()};

  // evolve section (before the drive so its duration can default to t_final)
  const bool wants_drive = s.run == RunKind::Couplings || s.run == RunKind::Evolve ||
                           s.run == RunKind::FloquetScan || s.run == RunKind::Diagnostics;
  if (const json* e = root.get("evolve")) {
    if (s.run != RunKind::Evolve) invalid("evolve", "evolve section given but run is not evolve");
    Reader r(*e, "evolve");
    auto& ev = s.evolve;
    if (const json* v = r.get("init")) ev.init = string(*v, "evolve.init");
    at("evolve.init", [&] { return spin_index(ev.init, s.n_ions); });
    if (const json* v = r.get("fock")) {
      const auto f = number_list(*v, "evolve.fock", s.hilbert.modes.size());
      for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] < 0 || f[k] != std::floor(f[k]) || f[k] > s.hilbert.n_max)
          invalid(idx("evolve.fock", k), "Fock numbers must be integers in [0, n_max]");
        ev.fock.push_back(static_cast<int>(f[k]));
      }
    }
    ev.t_final = quantity(r.require("t_final"), Dim::Time, si, "evolve.t_final");
    ev.sample_dt = quantity(r.require("sample_dt"), Dim::Time, si, "evolve.sample_dt");
    if (!(ev.t_final > 0)) invalid("evolve.t_final", "must be > 0");
    if (!(ev.sample_dt > 0) || ev.sample_dt > ev.t_final) invalid("evolve.sample_dt", "must be in (0, t_final]");
    if (const json* v = r.get("rtol")) ev.rtol = number(*v, "evolve.rtol");
    if (const json* v = r.get("atol")) ev.atol = number(*v, "evolve.atol");
    if (!(ev.rtol > 0) || !(ev.atol > 0)) invalid("evolve.rtol", "tolerances must be > 0");
    if (const json* v = r.get("steps_per_period"))
      ev.steps_per_period = static_cast<int>(integer(*v, "evolve.steps_per_period", 4, 100000));
    if (const json* v = r.get("reference")) {
      const std::string ref = string(*v, "evolve.reference");
      if (ref == "effective") ev.reference_effective = true;
      else if (ref != "none") invalid("evolve.reference", "reference must be \"effective\" or \"none\"");
    }
    if (const json* v = r.get("fit")) {
      Reader rf(*v, "evolve.fit");
      FitSection f;
      f.column = string(rf.require("column"), "evolve.fit.column");
      if (const json* x = rf.get("t_start")) f.t_start = quantity(*x, Dim::Time, si, "evolve.fit.t_start");
      if (const json* x = rf.get("t_stop")) f.t_stop = quantity(*x, Dim::Time, si, "evolve.fit.t_stop");
      rf.finish();
      if (f.t_stop == 0) f.t_stop = ev.t_final;
      if (f.t_start < 0 || f.t_stop <= f.t_start || f.t_stop > ev.t_final * (1 + 1e-12))
        invalid("evolve.fit", "fit window must satisfy 0 <= t_start < t_stop <= t_final");
      ev.fit = f;
    }
    if (const json* v = r.get("thermal")) {
      Reader rt(*v, "evolve.thermal");
      ThermalSection th;
      th.nbar = number_list(rt.require("nbar"), "evolve.thermal.nbar", s.hilbert.modes.size());
      for (double x : th.nbar)
        if (x < 0) invalid("evolve.thermal.nbar", "nbar must be >= 0");
      if (const json* x = rt.get("samples"))
        th.samples = static_cast<int>(integer(*x, "evolve.thermal.samples", 1, 1000000));
      rt.finish();
      if (!ev.fock.empty()) invalid("evolve.fock", "fock and thermal are exclusive");
      if (ev.reference_effective) invalid("evolve.reference", "the effective reference needs a pure initial state");
      ev.thermal = th;
    }
    r.finish();
  } else if (s.run == RunKind::Evolve) {
    invalid("evolve", "run=evolve needs an evolve section");
  }

  // diagnostics section needs only numbers here; the auto time uses the tones
  if (const json* d = root.get("diagnostics")) {
    if (s.run != RunKind::Diagnostics) invalid("diagnostics", "diagnostics section given but run is not diagnostics");
    Reader r(*d, "diagnostics");
    if (const json* v = r.get("t_final")) {
      if (!(v->is_string() && *v == "auto")) s.diagnostics.t_final = quantity(*v, Dim::Time, si, "diagnostics.t_final");
      if (s.diagnostics.t_final < 0) invalid("diagnostics.t_final", "must be > 0");
    }
    if (const json* v = r.get("points")) s.diagnostics.points = static_cast<int>(integer(*v, "diagnostics.points", 2, 100000));
    if (const json* v = r.get("steps_per_period"))
      s.diagnostics.steps_per_period = static_cast<int>(integer(*v, "diagnostics.steps_per_period", 8, 100000));
    r.finish();
  }

  // drive
  if (const json* d = root.get("drive")) {
    if (!wants_drive) invalid("drive", fmt::format("run={} takes no drive", to_string(s.run)));
    Reader r(*d, "drive");
    s.has_drive = true;
    if (const json* v = r.get("rwa")) s.drive.use_rwa = boolean(*v, "drive.rwa");
    if (r.has("tones") == r.has("segments")) invalid("drive", "give exactly one of tones or segments");
    if (const json* t = r.get("tones")) {
      DriveProgram::Segment seg;
      seg.tones = parse_tones(*t, "drive.tones", ctx);
      if (const json* v = r.get("duration")) seg.duration = quantity(*v, Dim::Time, si, "drive.duration");
      s.drive.segments.push_back(std::move(seg));
    } else {
      const json& segs = *r.get("segments");
      if (!segs.is_array() || segs.empty()) invalid("drive.segments", "expected a non-empty list");
      if (r.has("duration")) invalid("drive.duration", "segments carry their own durations");
      for (std::size_t i = 0; i < segs.size(); ++i) {
        Reader rs(segs[i], idx("drive.segments", i));
        DriveProgram::Segment seg;
        seg.duration = quantity(rs.require("duration"), Dim::Time, si, rs.sub("duration"));
        seg.tones = parse_tones(rs.require("tones"), rs.sub("tones"), ctx);
        rs.finish();
        s.drive.segments.push_back(std::move(seg));
      }
    }
    if (const json* v = r.get("sigma_z_offsets"))
      s.drive.sigma_z_offsets = quantity_list(*v, Dim::Frequency, si, "drive.sigma_z_offsets", s.n_ions);
    r.finish();
  } else if (wants_drive) {
    invalid("drive", fmt::format("run={} needs a drive", to_string(s.run)));
  }

  if (s.run == RunKind::Diagnostics && s.diagnostics.t_final == 0) {
    const auto [tx, ty] = at("drive.tones", [&] { return xy_pair(s.drive, "parse_scenario"); });
    CouplingOptions o = ctx.copt;
    o.resonance_guard = 0.0;
    const double jmax =
        std::max(ising_couplings(modes, *tx, o).max_abs(), ising_couplings(modes, *ty, o).max_abs());
    if (!(jmax > 0)) invalid("diagnostics.t_final", "couplings vanish; give t_final explicitly");
    s.diagnostics.t_final = 1.0 / jmax;
  }
  if (s.has_drive && s.drive.segments.size() == 1 && s.drive.segments[0].duration == 0) {
    double d = 1.0;
    if (s.run == RunKind::Evolve) d = s.evolve.t_final;
    if (s.run == RunKind::Diagnostics) d = s.diagnostics.t_final;
    s.drive.segments[0].duration = d;
  }
  if (s.has_drive) {
    at("drive", [&] { s.drive.validate(s.n_ions); });
    if (s.run == RunKind::Evolve && s.evolve.t_final > s.drive.duration() * (1 + 1e-12))
      invalid("evolve.t_final", "t_final exceeds the drive duration");
    if (s.run == RunKind::Diagnostics && s.diagnostics.t_final > s.drive.duration() * (1 + 1e-12))
      invalid("diagnostics.t_final", "t_final exceeds the drive duration");
  }
  if (s.run == RunKind::Evolve) {
    at("hilbert", [&] { s.hilbert.validate(modes); });
    if (s.evolve.reference_effective) at("evolve.reference", [&] { xy_pair(s.drive, "parse_scenario"); });
  }
  if (s.run == RunKind::Diagnostics) at("drive.tones", [&] { xy_pair(s.drive, "parse_scenario"); });

  // engineer
  if (const json* e = root.get("engineer")) {
    if (s.run != RunKind::Engineer) invalid("engineer", "engineer section given but run is not engineer");
    Reader r(*e, "engineer");
    auto& en = s.engineer;
    en.options.axis = s.axis;
    if (const json* v = r.get("targets")) {
      en.targets = number_list(*v, "engineer.targets", 0);
      if (!v->is_array() || en.targets.empty()) invalid("engineer.targets", "expected a non-empty list");
    }
    en.j_max = quantity(r.require("j_max"), Dim::Frequency, si, "engineer.j_max");
    if (!(en.j_max > 0)) invalid("engineer.j_max", "must be > 0");
    en.mu2_offset = quantity(r.require("mu2_offset"), Dim::Frequency, si, "engineer.mu2_offset");
    if (const json* v = r.get("grid_points"))
      en.options.grid_points = static_cast<int>(integer(*v, "engineer.grid_points", 8, 1000000));
    if (const json* v = r.get("min_detuning"))
      en.options.min_detuning = quantity(*v, Dim::Frequency, si, "engineer.min_detuning");
    if (const json* v = r.get("max_detuning"))
      en.options.max_detuning = quantity(*v, Dim::Frequency, si, "engineer.max_detuning");
    if (const json* v = r.get("tolerance")) en.options.alpha_tolerance = number(*v, "engineer.tolerance");
    r.finish();
    if (!(en.options.min_detuning > 0) || en.options.max_detuning <= en.options.min_detuning)
      invalid("engineer.min_detuning", "need 0 < min_detuning < max_detuning");
    for (std::size_t i = 0; i < en.targets.size(); ++i)
      if (!(en.targets[i] > 0.05 && en.targets[i] < 2.0)) invalid(idx("engineer.targets", i), "target alpha must be in (0.05, 2)");
  } else if (s.run == RunKind::Engineer) {
    invalid("engineer", "run=engineer needs an engineer section");
  }

  // floquet
  if (const json* f = root.get("floquet")) {
    if (s.run != RunKind::FloquetScan) invalid("floquet", "floquet section given but run is not floquet-scan");
    Reader r(*f, "floquet");
    auto& fl = s.floquet;
    const json& nf = r.require("nf_values");
    if (nf.is_object()) {
      Reader rn(nf, "floquet.nf_values");
      const double lo = number(rn.require("from"), "floquet.nf_values.from");
      const double hi = number(rn.require("to"), "floquet.nf_values.to");
      const double st = number(rn.require("step"), "floquet.nf_values.step");
      rn.finish();
      if (!(st > 0) || hi < lo) invalid("floquet.nf_values", "need from <= to and step > 0");
      for (int k = 0; lo + k * st <= hi * (1 + 1e-12); ++k) fl.nf_values.push_back(lo + k * st);
    } else {
      fl.nf_values = number_list(nf, "floquet.nf_values", 0);
    }
    for (std::size_t i = 0; i < fl.nf_values.size(); ++i)
      if (!(fl.nf_values[i] > 0)) invalid(idx("floquet.nf_values", i), "N_f must be > 0");
    if (const json* v = r.get("edge_fraction")) fl.edge_fraction = number(*v, "floquet.edge_fraction");
    if (fl.edge_fraction < 0 || fl.edge_fraction > 0.9)
      throw Error(ErrorKind::InvalidEdgeFraction, kModule, "parse_scenario", "edge_fraction must be in [0, 0.9]",
                  "floquet.edge_fraction");
    if (const json* v = r.get("inits")) {
      if (!v->is_array() || v->empty()) invalid("floquet.inits", "expected a non-empty list of spin labels");
      fl.inits.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        fl.inits.push_back(string((*v)[i], idx("floquet.inits", i)));
        at(idx("floquet.inits", i), [&] { return spin_index(fl.inits.back(), s.n_ions); });
      }
    }
    if (const json* v = r.get("n_max")) fl.n_max = static_cast<int>(integer(*v, "floquet.n_max", 1, 1000));
    if (const json* v = r.get("max_sample_dt")) fl.max_sample_dt = quantity(*v, Dim::Time, si, "floquet.max_sample_dt");
    else if (si) fl.max_sample_dt = 1e-6;
    if (!(fl.max_sample_dt > 0)) invalid("floquet.max_sample_dt", "must be > 0");
    if (const json* v = r.get("min_samples_per_period"))
      fl.min_samples_per_period = static_cast<int>(integer(*v, "floquet.min_samples_per_period", 2, 1000000));
    if (const json* v = r.get("trajectories")) fl.trajectories = boolean(*v, "floquet.trajectories");
    const auto [tx, ty] = at("drive.tones", [&] { return xy_pair(s.drive, "parse_scenario"); });
    if (const json* v = r.get("j_target"); v && !(v->is_string() && *v == "auto")) {
      fl.j_target = quantity(*v, Dim::Frequency, si, "floquet.j_target") / kTwoPi;
      if (!(fl.j_target > 0)) invalid("floquet.j_target", "must be > 0");
    } else {
      CouplingOptions o = ctx.copt;
      o.resonance_guard = 0.0;
      const double jcw = ising_couplings(modes, *tx, o).max_abs();
      if (!(jcw > 0)) invalid("floquet.j_target", "the XX tone gives no coupling");
      fl.j_target = jcw / kTwoPi * floquet_coupling_factor(fl.edge_fraction);
    }
    if (const json* v = r.get("total_time"); v && !(v->is_string() && *v == "auto"))
      fl.total_time = quantity(*v, Dim::Time, si, "floquet.total_time");
    else
      fl.total_time = 1.0 / fl.j_target;
    if (!(fl.total_time > 0)) invalid("floquet.total_time", "must be > 0");
    if (const json* v = r.get("baseline")) {
      Reader rb(*v, "floquet.baseline");
      const double d1 = quantity(rb.require("delta1"), Dim::Frequency, si, "floquet.baseline.delta1");
      const double d2 = quantity(rb.require("delta2"), Dim::Frequency, si, "floquet.baseline.delta2");
      rb.finish();
      if (d1 == d2)
        throw Error(ErrorKind::DegenerateTones, kModule, "parse_scenario", "baseline detunings must differ",
                    "floquet.baseline");
      if (d1 == 0 || d2 == 0)
        throw Error(ErrorKind::ResonantTone, kModule, "parse_scenario", "baseline detunings must be nonzero",
                    "floquet.baseline");
      fl.baseline = std::make_pair(d1, d2);
    }
    r.finish();
    if (modes.n_modes() != 1 && s.mode_mask.size() != 1)
      invalid("mode_mask", "the Floquet scan runs on a single mode; give one mode or a one-entry mode_mask");
  } else if (s.run == RunKind::FloquetScan) {
    invalid("floquet", "run=floquet-scan needs a floquet section");
  }

  if (const json* o = root.get("output")) {
    Reader r(*o, "output");
    if (const json* v = r.get("gnuplot")) s.output.gnuplot = boolean(*v, "output.gnuplot");
    if (const json* v = r.get("states")) s.output.states = boolean(*v, "output.states");
    if (const json* v = r.get("time_unit")) {
      s.output.time_unit = string(*v, "output.time_unit");
      time_unit_factor(s.output.time_unit, si);
    }
    r.finish();
    if (s.output.states && (s.run != RunKind::Evolve || s.evolve.thermal))
      invalid("output.states", "state dumps need a pure-state evolve run");
  }
  root.finish();
  return s;
}

json scenario_to_json(const Scenario& s) {
  const bool si = s.units == "si";
  json j;
  j["run"] = to_string(s.run);
  j["units"] = s.units;
  j["n_ions"] = s.n_ions;
  if (s.trap) {
    j["trap"] = {{"omega_x", q(s.trap->omega_x, Dim::Frequency, si)},
                 {"omega_y", q(s.trap->omega_y, Dim::Frequency, si)},
                 {"omega_z", q(s.trap->omega_z, Dim::Frequency, si)},
                 {"mass", q(s.trap->mass, Dim::Mass, si)},
                 {"delta_k", q(s.trap->delta_k, Dim::Wavenumber, si)}};
    j["axis"] = s.axis == Axis::X ? "X" : "Y";
  }
  if (s.literal_modes) {
    json om = json::array();
    for (double w : s.literal_modes->omega) om.push_back(q(w, Dim::Frequency, si));
    j["modes"] = {{"omega", om},
                  {"eta", matrix_json(s.literal_modes->eta)},
                  {"b", matrix_json(s.literal_modes->b)},
                  {"axis_label", s.literal_modes->axis}};
  } else if (s.run == RunKind::Modes && !s.modes.n_scan.empty()) {
    j["modes"] = {{"n_scan", s.modes.n_scan}};
  }
  j["mode_mask"] = s.mode_mask;
  j["resonance_guard"] = q(s.resonance_guard, Dim::Frequency, si);
  j["hilbert"] = {{"n_max", s.hilbert.n_max}, {"modes", s.hilbert.modes}, {"dimension_cap", s.hilbert.dimension_cap}};
  if (s.has_drive) {
    json segs = json::array();
    for (const auto& seg : s.drive.segments) {
      json tones = json::array();
      for (const auto& t : seg.tones) tones.push_back(tone_json(t, si));
      segs.push_back({{"duration", q(seg.duration, Dim::Time, si)}, {"tones", tones}});
    }
    json d = {{"rwa", s.drive.use_rwa}, {"segments", segs}};
    if (!s.drive.sigma_z_offsets.empty()) {
      json z = json::array();
      for (double x : s.drive.sigma_z_offsets) z.push_back(q(x, Dim::Frequency, si));
      d["sigma_z_offsets"] = z;
    }
    j["drive"] = d;
  }
  if (s.run == RunKind::Evolve) {
    const auto& ev = s.evolve;
    json e = {{"init", ev.init},
              {"t_final", q(ev.t_final, Dim::Time, si)},
              {"sample_dt", q(ev.sample_dt, Dim::Time, si)},
              {"rtol", ev.rtol},
              {"atol", ev.atol},
              {"steps_per_period", ev.steps_per_period},
              {"reference", ev.reference_effective ? "effective" : "none"}};
    if (!ev.fock.empty()) e["fock"] = ev.fock;
    if (ev.fit)
      e["fit"] = {{"column", ev.fit->column},
                  {"t_start", q(ev.fit->t_start, Dim::Time, si)},
                  {"t_stop", q(ev.fit->t_stop, Dim::Time, si)}};
    if (ev.thermal) e["thermal"] = {{"nbar", ev.thermal->nbar}, {"samples", ev.thermal->samples}};
    j["evolve"] = e;
  }
  if (s.run == RunKind::Engineer) {
    const auto& en = s.engineer;
    j["engineer"] = {{"targets", en.targets},
                     {"j_max", q(en.j_max, Dim::Frequency, si)},
                     {"mu2_offset", q(en.mu2_offset, Dim::Frequency, si)},
                     {"grid_points", en.options.grid_points},
                     {"min_detuning", q(en.options.min_detuning, Dim::Frequency, si)},
                     {"max_detuning", q(en.options.max_detuning, Dim::Frequency, si)},
                     {"tolerance", en.options.alpha_tolerance}};
  }
  if (s.run == RunKind::FloquetScan) {
    const auto& fl = s.floquet;
    json f = {{"nf_values", fl.nf_values},
              {"j_target", q(fl.j_target * kTwoPi, Dim::Frequency, si)},
              {"edge_fraction", fl.edge_fraction},
              {"inits", fl.inits},
              {"total_time", q(fl.total_time, Dim::Time, si)},
              {"max_sample_dt", q(fl.max_sample_dt, Dim::Time, si)},
              {"min_samples_per_period", fl.min_samples_per_period},
              {"n_max", fl.n_max},
              {"trajectories", fl.trajectories}};
    if (fl.baseline)
      f["baseline"] = {{"delta1", q(fl.baseline->first, Dim::Frequency, si)},
                       {"delta2", q(fl.baseline->second, Dim::Frequency, si)}};
    j["floquet"] = f;
  }
  if (s.run == RunKind::Diagnostics)
    j["diagnostics"] = {{"t_final", q(s.diagnostics.t_final, Dim::Time, si)},
                        {"points", s.diagnostics.points},
                        {"steps_per_period", s.diagnostics.steps_per_period}};
  j["output"] = {{"gnuplot", s.output.gnuplot}, {"states", s.output.states}, {"time_unit", s.output.time_unit}};
  return j;
}

// ---------------------------------------------------------------------------------------------
// run

namespace {

std::string time_label(const Scenario& s) {
  if (!s.output.time_unit.empty()) return s.output.time_unit;
  return s.units == "si" ? "s" : "1";
}

double time_scale(const Scenario& s) { return time_unit_factor(s.output.time_unit, s.units == "si"); }

CouplingMatrix couplings_for(const Scenario& s, const ModeSet& modes, const SDFTone& tone, const CouplingOptions& o) {
  return s.trap ? ising_couplings(modes, tone, *s.trap, o) : ising_couplings(modes, tone, o);
}

json run_modes(const Scenario& s, OutputSink& sink) {
  json summary;
  for (Axis ax : {Axis::X, Axis::Y}) {
    const ModeSet m = chain_modes(s.n_ions, *s.trap, ax);
    sink.write_csv(fmt::format("modes_{}", ax == Axis::X ? "X" : "Y"), mode_table(m));
    summary[ax == Axis::X ? "X" : "Y"] = to_json(m);
  }
  const auto report = mode_spectrum_report(*s.trap, s.n_ions);
  summary["spectrum"] = to_json(report);
  if (!s.modes.n_scan.empty()) {
    CsvTable t;
    t.description = "mode crowding against chain length";
    t.columns = {{"n_ions", "", "chain length"},
                 {"x_lowest", "rad/s", "lowest X' mode"},
                 {"y_highest", "rad/s", "highest Y' mode"},
                 {"band_gap", "rad/s", "lowest X' minus highest Y' (negative when the bands overlap)"},
                 {"min_gap", "rad/s", "smallest |w_x - w_y| over all pairs"},
                 {"overlap", "", "1 when the bands overlap"}};
    for (auto n : s.modes.n_scan) {
      const auto r = mode_spectrum_report(*s.trap, n);
      t.add_row({static_cast<double>(n), r.x_modes.back(), r.y_modes.front(), r.band_gap, r.min_gap,
                 r.overlap ? 1.0 : 0.0});
    }
    sink.write_csv("mode_crowding", t);
  }
  sink.write_json("modes.json", summary);
  if (s.output.gnuplot)
    sink.write_text("modes.gp",
                    "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'mode'\n"
                    "set ylabel 'frequency (Hz)'\nplot 'modes_X.csv' using 1:3 with points pt 7, \\\n"
                    "     'modes_Y.csv' using 1:3 with points pt 5\n");
  return summary;
}

json run_couplings(const Scenario& s, const ModeSet& modes, OutputSink& sink) {
  const auto& tones = s.drive.segments.front().tones;
  if (s.drive.segments.size() != 1)
    throw Error(ErrorKind::UnsupportedDrive, kModule, "run_couplings", "couplings are defined for one segment",
                "drive.segments");
  const auto opt = s.coupling_options();
  json out;
  json list = json::array();
  std::vector<CouplingMatrix> mats;
  for (std::size_t k = 0; k < tones.size(); ++k) {
    CouplingMatrix c = at(idx("drive.tones", k), [&] { return couplings_for(s, modes, tones[k], opt); });
    const bool y = std::abs(tones[k].spin_phase - kPi / 2) < 1e-12;
    c.axis_label = y ? "yy" : "xx";
    sink.write_csv(fmt::format("J_tone{}_{}", k, c.axis_label), coupling_table(c));
    json cj = to_json(c);
    if (s.n_ions >= 3) {
      try {
        const auto fit = power_law_fit(c);
        cj["power_law"] = {{"alpha", fit.alpha}, {"residual", fit.residual}};
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ZeroCoupling) throw;
        cj["power_law"] = nullptr;
      }
    }
    list.push_back(cj);
    mats.push_back(c);
  }
  out["couplings"] = list;
  if (tones.size() == 2) {
    out["frobenius_proximity"] = frobenius_proximity(mats[0], mats[1]);
    try {
      const auto [tx, ty] = xy_pair(s.drive, "run_couplings");
      const bool swapped = tx != &tones[0];
      const auto& jx = swapped ? mats[1] : mats[0];
      const auto& jy = swapped ? mats[0] : mats[1];
      if (tx->mu == ty->mu) {
        out["validity"] = {{"verdict", "fail"},
                           {"note", "equal tone frequencies: the resulting effective spin-spin Hamiltonian is Ising "
                                    "type in a rotated basis"}};
      } else {
        out["validity"] = to_json(validity_report(jx, jy, *tx, *ty, opt.mode_mask.empty() ? modes : modes.subset(opt.mode_mask)));
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UnsupportedDrive) throw;
    }
  }
  sink.write_json("couplings.json", out);
  return out;
}

json run_engineer(const Scenario& s, OutputSink& sink) {
  const auto& en = s.engineer;
  const ModeSet modes = chain_modes(s.n_ions, *s.trap, en.options.axis);
  const auto scan = power_law_scan(modes, *s.trap, en.options);
  CsvTable st;
  st.description = "fitted power-law exponent against the x-tone detuning above the COM mode";
  st.columns = {{"detuning", "rad/s", "mu1 - omega_COM"}, {"alpha", "", "fitted exponent"}};
  for (std::size_t k = 0; k < scan.detunings.size(); ++k) st.add_row({scan.detunings[k], scan.alphas[k]});
  sink.write_csv("alpha_scan", st);

  CsvTable t;
  t.description = "power-law designs; y tone at mu1 + mu2_offset with a globally scaled Rabi rate";
  t.columns = {{"target_alpha", "", "requested exponent"},
               {"alpha", "", "achieved exponent of J^x"},
               {"mu1", "rad/s", "x tone frequency"},
               {"detuning", "rad/s", "mu1 - omega_COM"},
               {"rabi_x", "rad/s", "uniform x-tone Rabi rate"},
               {"mu2", "rad/s", "y tone frequency"},
               {"rabi_y", "rad/s", "uniform y-tone Rabi rate"},
               {"max_jx", "rad/s", "max |J^x_ij|"},
               {"max_jy", "rad/s", "max |J^y_ij|"},
               {"alpha_y", "", "fitted exponent of J^y"},
               {"proximity", "", "Frobenius proximity of J^x and J^y"}};
  json designs = json::array();
  const CouplingOptions o{.resonance_guard = s.resonance_guard, .mode_mask = {}};
  for (std::size_t k = 0; k < en.targets.size(); ++k) {
    const auto d = at(idx("engineer.targets", k), [&] {
      return engineer_power_law(en.targets[k], modes, *s.trap, scan, en.j_max, en.options);
    });
    const SDFTone tx = SDFTone::uniform(s.n_ions, d.mu1, d.rabi, 0.0);
    SDFTone ty = at("engineer.mu2_offset", [&] { return scale_omega_y(tx, d.mu1 + en.mu2_offset, modes, o); });
    ty.spin_phase = kPi / 2;
    const auto [jx, jy] = xy_couplings(modes, tx, ty, *s.trap, o);
    const double prox = frobenius_proximity(jx, jy);
    const double alpha_y = power_law_fit(jy).alpha;
    t.add_row({en.targets[k], d.alpha, d.mu1, d.detuning, d.rabi, ty.mu, ty.rabi[0], jx.max_abs(), jy.max_abs(),
               alpha_y, prox});
    sink.write_csv(fmt::format("J_x_alpha{}", en.targets[k]), coupling_table(jx));
    sink.write_csv(fmt::format("J_y_alpha{}", en.targets[k]), coupling_table(jy));
    json dj = to_json(d);
    dj["mu2"] = ty.mu;
    dj["rabi_y"] = ty.rabi[0];
    dj["max_jy"] = jy.max_abs();
    dj["alpha_y"] = alpha_y;
    dj["proximity"] = prox;
    designs.push_back(dj);
  }
  sink.write_csv("engineer", t);
  json out = {{"monotone_scan", scan.monotone}, {"designs", designs}};
  sink.write_json("engineer.json", out);
  if (s.output.gnuplot)
    sink.write_text("engineer.gp",
                    "set datafile separator ','\nset key autotitle columnhead\nset logscale x\n"
                    "set xlabel 'detuning above COM (rad/s)'\nset ylabel 'alpha'\n"
                    "plot 'alpha_scan.csv' using 1:2 with lines\n");
  return out;
}

StateVector spin_vector(const Scenario& s) {
  StateVector v = StateVector::Zero(static_cast<Eigen::Index>(std::size_t{1} << s.n_ions));
  v[static_cast<Eigen::Index>(spin_index(s.evolve.init, s.n_ions))] = 1.0;
  return v;
}

json run_evolve(const Scenario& s, const ModeSet& modes, OutputSink& sink, const RunContext& ctx) {
  const auto& ev = s.evolve;
  EvolveOptions eo;
  eo.rtol = ev.rtol;
  eo.atol = ev.atol;
  eo.steps_per_period = ev.steps_per_period;
  eo.store_states = ev.reference_effective || s.output.states;
  const double ts = time_scale(s);
  const std::string tl = time_label(s);

  Trajectory tr;
  if (ev.thermal) {
    tr = evolve_thermal(s.hilbert, spin_vector(s), ev.thermal->nbar, ev.thermal->samples, ctx.seed, s.drive, modes,
                        ev.t_final, ev.sample_dt, eo, ctx.jobs);
  } else {
    const auto init = QuantumState::product(s.hilbert, spin_index(ev.init, s.n_ions), ev.fock);
    tr = evolve_full(init, s.drive, modes, ev.t_final, ev.sample_dt, eo);
  }
  const CsvTable table = trajectory_table(tr, ts, tl);
  sink.write_csv("trajectory", table);

  json out;
  out["dimension"] = s.hilbert.dim();
  out["samples"] = tr.size();
  out["accepted_steps"] = tr.accepted_steps;
  out["rejected_steps"] = tr.rejected_steps;
  out["max_norm_error"] = tr.max_norm_error;
  out["max_leakage"] = tr.max_leakage;
  out["time_averaged_phonons"] = time_averaged_phonons(tr);
  out["max_phonons"] = tr.mean_n.cols() ? tr.mean_n.rowwise().sum().maxCoeff() : 0.0;
  json pmax, pfin;
  for (std::size_t b = 0; b < s.hilbert.spin_dim(); ++b) {
    const auto col = tr.populations.col(static_cast<Eigen::Index>(b));
    pmax[spin_label(b, s.n_ions)] = col.maxCoeff();
    pfin[spin_label(b, s.n_ions)] = col[col.size() - 1];
  }
  out["max_population"] = pmax;
  out["final_population"] = pfin;
  if (ev.thermal) out["thermal"] = {{"nbar", ev.thermal->nbar}, {"samples", ev.thermal->samples}, {"seed", ctx.seed}};

  // predicted couplings for two-tone x/y drives
  std::optional<std::pair<CouplingMatrix, CouplingMatrix>> jxy;
  try {
    const auto [tx, ty] = xy_pair(s.drive, "run_evolve");
    const CouplingOptions o{.resonance_guard = 0.0, .mode_mask = s.hilbert.modes};
    jxy = std::make_pair(couplings_for(s, modes, *tx, o), couplings_for(s, modes, *ty, o));
    if (s.n_ions >= 2) out["predicted"] = {{"jx12", jxy->first(0, 1)}, {"jy12", jxy->second(0, 1)}};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnsupportedDrive) throw;
  }

  if (ev.reference_effective) {
    const Trajectory ref = evolve_effective(jxy->first, jxy->second, spin_vector(s), tr.times);
    const Observables ob = observables(tr, &ref);
    CsvTable et;
    et.description = "effective XY evolution on the same grid and its fidelity with the phonon-traced full state";
    et.columns.push_back({"t", tl, "sample time"});
    for (std::size_t b = 0; b < s.hilbert.spin_dim(); ++b)
      et.columns.push_back({"Peff_" + spin_label(b, s.n_ions), "", "population under the effective Hamiltonian"});
    et.columns.push_back({"fidelity", "", "<phi_eff| rho_spin |phi_eff>"});
    for (std::size_t r = 0; r < ref.size(); ++r) {
      std::vector<double> row{ref.times[r] / ts};
      for (std::size_t b = 0; b < s.hilbert.spin_dim(); ++b)
        row.push_back(ref.populations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b)));
      row.push_back(ob.fidelity[r]);
      et.add_row(std::move(row));
    }
    sink.write_csv("effective", et);
    out["min_fidelity"] = *std::min_element(ob.fidelity.begin(), ob.fidelity.end());
    out["final_fidelity"] = ob.fidelity.back();
  }

  if (ev.fit) {
    std::size_t col = table.columns.size();
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      if (table.columns[c].name == ev.fit->column) col = c;
    if (col == table.columns.size() || col == 0)
      throw Error(ErrorKind::ValidationError, kModule, "run_evolve",
                  fmt::format("no trajectory column named '{}'", ev.fit->column), "evolve.fit.column");
    std::vector<double> t, v;
    for (std::size_t r = 0; r < tr.size(); ++r)
      if (tr.times[r] >= ev.fit->t_start * (1 - 1e-12) && tr.times[r] <= ev.fit->t_stop * (1 + 1e-12)) {
        t.push_back(tr.times[r]);
        v.push_back(table.rows[r][col]);
      }
    const auto f = at("evolve.fit", [&] { return fit_oscillation(t, v); });
    json fj = to_json(f);
    fj["column"] = ev.fit->column;
    fj["time_unit"] = s.units == "si" ? "s" : "1";
    out["fit"] = fj;
  }
  if (s.output.states) sink.write_states("states", tr);
  sink.write_json("evolve.json", out);
  if (s.output.gnuplot) {
    std::string gp = fmt::format(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't ({})'\nset ylabel 'population'\n"
        "plot ",
        tl);
    for (std::size_t b = 0; b < s.hilbert.spin_dim(); ++b)
      gp += fmt::format("{}'trajectory.csv' using 1:{} with lines", b ? ", \\\n     " : "", b + 2);
    gp += "\n";
    sink.write_text("trajectory.gp", gp);
  }
  return out;
}

json run_floquet(const Scenario& s, const ModeSet& full_modes, OutputSink& sink, const RunContext& ctx) {
  const auto& fl = s.floquet;
  const ModeSet modes = s.mode_mask.empty() ? full_modes : full_modes.subset(s.mode_mask);
  const auto [tx, ty] = xy_pair(s.drive, "run_floquet");
  const auto sched =
      at("floquet", [&] { return FloquetSchedule::make(fl.nf_values.front(), fl.j_target, *tx, *ty, fl.edge_fraction); });
  FloquetScanOptions o;
  o.inits = fl.inits;
  o.total_time = fl.total_time;
  o.max_sample_dt = fl.max_sample_dt;
  o.min_samples_per_period = fl.min_samples_per_period;
  o.n_max = fl.n_max;
  o.use_rwa = s.drive.use_rwa;
  o.keep_trajectories = fl.trajectories;

  auto retag = [](const Error& e) {
    if (e.parameter() == "hilbert.n_max") return e.with_parameter("floquet.n_max");
    return e;
  };
  FloquetScanResult res;
  try {
    res = scan_nf(fl.nf_values, sched, modes, o, ctx.jobs);
  } catch (const Error& e) {
    throw retag(e);
  }

  CsvTable t;
  t.description = "Floquet period scan: time-averaged phonons and deviation from the ideal XY evolution";
  t.columns = {{"n_f", "", "Floquet periods per coupling cycle"}, {"t_f", time_label(s), "Floquet period"}};
  for (const auto& in : fl.inits) t.columns.push_back({"nbar_" + in, "", "time-averaged total <n>, init " + in});
  t.columns.push_back({"nbar_avg", "", "mean over inits"});
  for (const auto& in : fl.inits) {
    t.columns.push_back({"dev_strobe_" + in, "", "max stroboscopic deviation (sum over basis), init " + in});
    t.columns.push_back({"dev_all_" + in, "", "max deviation over all samples, init " + in});
    t.columns.push_back({"dev_final_" + in, "", "deviation at the final time, init " + in});
  }
  t.columns.push_back({"slow_amplitude", "", "spectral amplitude of P(all down) at 2 pi / t_f"});
  t.columns.push_back({"max_leakage", "", "largest top-Fock-level population"});
  const double ts = time_scale(s);
  for (const auto& p : res.points) {
    std::vector<double> row{p.n_f, p.t_f / ts};
    for (double n : p.mean_phonons) row.push_back(n);
    row.push_back(p.mean_phonons_avg);
    for (const auto& d : p.deviations) {
      row.push_back(d.stroboscopic);
      row.push_back(d.all_samples);
      row.push_back(d.final_time);
    }
    row.push_back(p.slow_amplitude);
    row.push_back(p.max_leakage);
    t.add_row(std::move(row));
    if (fl.trajectories)
      for (std::size_t k = 0; k < p.trajectories.size(); ++k)
        sink.write_csv(fmt::format("floquet_nf{}_{}", p.n_f, fl.inits[k]),
                       trajectory_table(p.trajectories[k], ts, time_label(s)));
  }
  sink.write_csv("floquet_scan", t);

  json out = {{"j_target_cycles", fl.j_target},
              {"coupling_factor", floquet_coupling_factor(fl.edge_fraction)},
              {"total_time", fl.total_time},
              {"points", res.points.size()}};
  if (fl.baseline) {
    const auto b = [&] {
      try {
        return dual_sdf_baseline(fl.j_target, fl.baseline->first, fl.baseline->second, modes, o, ctx.jobs);
      } catch (const Error& e) {
        throw retag(e);
      }
    }();
    out["baseline"] = to_json(b);
    CsvTable bt;
    bt.description = "continuous two-tone baseline at the same coupling";
    bt.columns = {{"delta1", "rad/unit", "x tone detuning"},
                  {"delta2", "rad/unit", "y tone detuning"},
                  {"nbar_avg", "", "time-averaged total <n>, mean over inits"},
                  {"max_leakage", "", "largest top-Fock-level population"}};
    bt.add_row({fl.baseline->first, fl.baseline->second, b.mean_phonons_avg, b.max_leakage});
    sink.write_csv("baseline", bt);
  }
  sink.write_json("floquet.json", out);
  if (s.output.gnuplot) {
    std::string gp =
        "set datafile separator ','\nset key autotitle columnhead\nset logscale x\nset xlabel 'N_f'\n"
        "set ylabel 'time-averaged <n>'\n";
    const std::size_t col = 3 + fl.inits.size();
    if (fl.baseline) {
      gp += fmt::format("stats 'baseline.csv' using 3 name 'B' nooutput\n");
      gp += fmt::format("plot 'floquet_scan.csv' using 1:{} with linespoints, B_max with lines lc black title "
                        "'baseline'\n",
                        col);
    } else {
      gp += fmt::format("plot 'floquet_scan.csv' using 1:{} with linespoints\n", col);
    }
    sink.write_text("floquet_scan.gp", gp);
  }
  return out;
}

json run_diagnostics(const Scenario& s, const ModeSet& full_modes, OutputSink& sink) {
  const auto& dg = s.diagnostics;
  const ModeSet modes = s.mode_mask.empty() ? full_modes : full_modes.subset(s.mode_mask);
  std::vector<double> tau;
  for (int k = 0; k <= dg.points; ++k) tau.push_back(dg.t_final * k / dg.points);
  tau.back() = std::min(dg.t_final, s.drive.duration());
  MagnusOptions mo;
  mo.steps_per_period = dg.steps_per_period;
  const auto d = magnus_diagnostics(s.drive, modes, tau, mo);
  const std::size_t n = s.n_ions;
  const double ts = time_scale(s);

  CsvTable t;
  t.description = "second-order Magnus terms against the evolution time";
  t.columns.push_back({"tau", time_label(s), "evolution time"});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      t.columns.push_back({fmt::format("chi_x_{}{}", i + 1, j + 1), "", "accumulated sx sx phase"});
      t.columns.push_back({fmt::format("chi_y_{}{}", i + 1, j + 1), "", "accumulated sy sy phase"});
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) t.columns.push_back({fmt::format("lambda_{}{}", i + 1, j + 1), "", "sx_i sy_j cross term"});
  for (std::size_t i = 0; i < n; ++i) t.columns.push_back({fmt::format("zeta_{}", i + 1), "", "sz_i cross term norm"});
  for (std::size_t i = 0; i < n; ++i)
    t.columns.push_back({fmt::format("phi_{}", i + 1), "", "residual spin-motion displacement"});
  for (std::size_t k = 0; k < d.tau.size(); ++k) {
    std::vector<double> row{d.tau[k] / ts};
    const auto I = [](std::size_t x) { return static_cast<Eigen::Index>(x); };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        row.push_back(d.chi_x[k](I(i), I(j)));
        row.push_back(d.chi_y[k](I(i), I(j)));
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) row.push_back(d.lambda[k](I(i), I(j)));
    for (std::size_t i = 0; i < n; ++i) row.push_back(d.zeta[k][I(i)]);
    for (std::size_t i = 0; i < n; ++i) row.push_back(d.phi[k][I(i)]);
    t.add_row(std::move(row));
  }
  sink.write_csv("magnus", t);
  json out = to_json(d);
  const auto [tx, ty] = xy_pair(s.drive, "run_diagnostics");
  if (tx->mu != ty->mu) {
    const CouplingOptions o{.resonance_guard = 0.0, .mode_mask = {}};
    out["validity"] = to_json(validity_report(ising_couplings(modes, *tx, o), ising_couplings(modes, *ty, o), *tx,
                                              *ty, modes));
  }
  sink.write_json("diagnostics.json", out);
  if (s.output.gnuplot && n >= 2)
    sink.write_text("magnus.gp",
                    fmt::format("set datafile separator ','\nset key autotitle columnhead\nset xlabel 'tau ({})'\n"
                                "plot 'magnus.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:{} with "
                                "lines\n",
                                time_label(s), 2 + n * (n - 1) + 1));
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

json run_scenario(const Scenario& s, OutputSink& sink, const RunContext& ctx) {
  if (!ctx.verb.empty() && ctx.verb != to_string(s.run))
    throw Error(ErrorKind::ValidationError, kModule, "run_scenario",
                fmt::format("verb '{}' does not match the scenario run '{}'", ctx.verb, to_string(s.run)), "run");
  if (ctx.jobs < 1) throw Error(ErrorKind::ValidationError, kModule, "run_scenario", "--jobs must be >= 1", "jobs");
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  const ModeSet modes = s.mode_set();
  json result;
  switch (s.run) {
    case RunKind::Modes: result = run_modes(s, sink); break;
    case RunKind::Couplings: result = run_couplings(s, modes, sink); break;
    case RunKind::Engineer: result = run_engineer(s, sink); break;
    case RunKind::Evolve: result = run_evolve(s, modes, sink, ctx); break;
    case RunKind::FloquetScan: result = run_floquet(s, modes, sink, ctx); break;
    case RunKind::Diagnostics: result = run_diagnostics(s, modes, sink); break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"tool", "ionxy"},
                   {"version", ctx.tool_version},
                   {"verb", to_string(s.run)},
                   {"seed", ctx.seed},
                   {"jobs", ctx.jobs},
                   {"started_utc", started},
                   {"wall_clock_s", wall},
                   {"scenario", scenario_to_json(s)},
                   {"outputs", sink.file_list()}};
  sink.write_json("manifest.json", manifest);
  return manifest;
}

}  // namespace ionxy
