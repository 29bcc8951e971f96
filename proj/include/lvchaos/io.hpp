#pragma once

// Run configuration, JSON reports and CSV emission. All floats are written
// with 17 significant digits; object keys keep insertion order.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvchaos/detail/format.hpp"
#include "lvchaos/errors.hpp"
#include "lvchaos/geometry.hpp"
#include "lvchaos/integrate.hpp"
#include "lvchaos/model.hpp"
#include "lvchaos/sap.hpp"
#include "lvchaos/symbolic.hpp"

namespace lvchaos {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void dump_string(std::string& out, const std::string& s) {
  out += Json(s).dump();
}

inline void dump_json(std::string& out, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string pad_end(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) { out += "{}"; return; }
      out += '{';
      out += nl;
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) { out += ','; out += nl; }
        first = false;
        out += pad;
        dump_string(out, k);
        out += indent > 0 ? ": " : ":";
        dump_json(out, v, indent, depth + 1);
      }
      out += nl;
      out += pad_end;
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) { out += "[]"; return; }
      // Short numeric arrays (points, intervals) stay on one line.
      const bool flat = j.size() <= 2 && std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_number(); });
      out += '[';
      if (!flat) out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) { out += ','; if (flat) out += ' '; else out += nl; }
        first = false;
        if (!flat) out += pad;
        dump_json(out, v, indent, depth + 1);
      }
      if (!flat) { out += nl; out += pad_end; }
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? fmt17(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Deterministic text form: ordered keys, 17-digit floats, LF line endings.
inline std::string to_text(const Json& j, int indent = 2) {
  std::string out;
  detail::dump_json(out, j, indent, 0);
  out += '\n';
  return out;
}

inline Json point_json(const PhasePoint& z) { return Json::array({z.x, z.y}); }

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  VolterraParams params;
  double mu = 0.0;
  double ell1 = 0.0, ell2 = 0.0, h1 = 0.0, h2 = 0.0;
  int m1 = 1;
  int m2 = 1;
  std::optional<double> r0;
  std::optional<double> rmu;
  Tolerances tol;
  int paths = 3;                   ///< test paths per phase
  std::size_t initial_samples = 65;
  std::size_t budget = 200'000;
  int seed_grid = 1;               ///< seeds per band for periodic-orbit search
  int plot_samples = 256;          ///< points per level curve in plot data
  bool swap_rectangles = false;

  CertifyRequest certify_request(int threads = 1) const {
    CertifyRequest r;
    r.base = params;
    r.mu = mu;
    r.ell1 = ell1;
    r.ell2 = ell2;
    r.h1 = h1;
    r.h2 = h2;
    r.m1 = m1;
    r.m2 = m2;
    r.r0 = r0;
    r.rmu = rmu;
    r.paths = paths;
    r.swap_rectangles = swap_rectangles;
    r.tol = tol;
    r.sap.initial_samples = initial_samples;
    r.sap.budget = budget;
    r.sap.threads = threads;
    return r;
  }

  /// Schedule with missing durations filled in from the twist bounds.
  Schedule schedule() const {
    double a = r0.value_or(0.0), b = rmu.value_or(0.0);
    if (!r0 || !rmu) {
      const VolterraParams pmu = harvested(params, mu);
      if (!r0) a = std::ceil(twist_bound(m1, period(params, ell1, tol), period(params, ell2, tol)));
      if (!rmu) b = std::ceil(twist_bound(m2, period(pmu, h1, tol), period(pmu, h2, tol)));
    }
    return Schedule::make(params, mu, a, b);
  }

  /// Throws NotLinked when the annuli are not linked.
  LinkedConfig linked() const { return LinkedConfig::make(schedule(), ell1, ell2, h1, h2, swap_rectangles); }

  void validate() const {
    params.validate();
    const VolterraParams pmu = harvested(params, mu);
    Annulus{params, ell1, ell2}.validate();
    Annulus{pmu, h1, h2}.validate();
    if (m1 < 1 || m2 < 1) throw ConfigError("m1 and m2 must be at least 1");
    if (r0 && !(*r0 > 0.0)) throw ConfigError("r0 must be positive");
    if (rmu && !(*rmu > 0.0)) throw ConfigError("rmu must be positive");
    tol.validate();
    if (paths < 1) throw ConfigError("search.paths must be at least 1");
    if (initial_samples < 2) throw ConfigError("search.initial_samples must be at least 2");
    if (budget < initial_samples) throw ConfigError("search.budget must be at least initial_samples");
    if (seed_grid < 1) throw ConfigError("search.seed_grid must be at least 1");
    if (plot_samples < 16) throw ConfigError("search.plot_samples must be at least 16");
  }
};

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

inline double num(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
  if (!j.at(key).is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
  return j.at(key).get<double>();
}

inline int integer(const Json& j, const std::string& key, const std::string& where) {
  const double v = num(j, key, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("'" + key + "' in " + where + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses and validates a run configuration; unknown keys are rejected.
inline RunConfig parse_config(const Json& j) {
  using detail::integer;
  using detail::num;
  detail::reject_unknown(j, {"params", "mu", "levels", "m1", "m2", "r0", "rmu", "tolerances", "search", "swap_rectangles"},
                         "config");
  RunConfig c;
  const Json& p = j.contains("params") ? j.at("params") : throw ConfigError("missing key 'params'");
  detail::reject_unknown(p, {"a", "b", "c", "d"}, "params");
  c.params = {num(p, "a", "params"), num(p, "b", "params"), num(p, "c", "params"), num(p, "d", "params")};
  c.mu = num(j, "mu", "config");
  const Json& l = j.contains("levels") ? j.at("levels") : throw ConfigError("missing key 'levels'");
  detail::reject_unknown(l, {"ell1", "ell2", "h1", "h2"}, "levels");
  c.ell1 = num(l, "ell1", "levels");
  c.ell2 = num(l, "ell2", "levels");
  c.h1 = num(l, "h1", "levels");
  c.h2 = num(l, "h2", "levels");
  c.m1 = integer(j, "m1", "config");
  c.m2 = integer(j, "m2", "config");
  if (j.contains("r0") && !j.at("r0").is_null()) c.r0 = num(j, "r0", "config");
  if (j.contains("rmu") && !j.at("rmu").is_null()) c.rmu = num(j, "rmu", "config");
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    detail::reject_unknown(t, {"rel_tol", "abs_tol", "energy_budget", "event_tol"}, "tolerances");
    if (t.contains("rel_tol")) c.tol.rel_tol = num(t, "rel_tol", "tolerances");
    if (t.contains("abs_tol")) c.tol.abs_tol = num(t, "abs_tol", "tolerances");
    if (t.contains("energy_budget")) c.tol.energy_budget = num(t, "energy_budget", "tolerances");
    if (t.contains("event_tol")) c.tol.event_tol = num(t, "event_tol", "tolerances");
  }
  if (j.contains("search")) {
    const Json& s = j.at("search");
    detail::reject_unknown(s, {"paths", "initial_samples", "budget", "seed_grid", "plot_samples"}, "search");
    if (s.contains("paths")) c.paths = integer(s, "paths", "search");
    if (s.contains("initial_samples")) c.initial_samples = static_cast<std::size_t>(std::max(0, integer(s, "initial_samples", "search")));
    if (s.contains("budget")) c.budget = static_cast<std::size_t>(std::max(0, integer(s, "budget", "search")));
    if (s.contains("seed_grid")) c.seed_grid = integer(s, "seed_grid", "search");
    if (s.contains("plot_samples")) c.plot_samples = integer(s, "plot_samples", "search");
  }
  if (j.contains("swap_rectangles")) {
    if (!j.at("swap_rectangles").is_boolean()) throw ConfigError("'swap_rectangles' must be a boolean");
    c.swap_rectangles = j.at("swap_rectangles").get<bool>();
  }
  c.validate();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline Json config_json(const RunConfig& c) {
  Json j;
  j["params"] = {{"a", c.params.a}, {"b", c.params.b}, {"c", c.params.c}, {"d", c.params.d}};
  j["mu"] = c.mu;
  j["levels"] = {{"ell1", c.ell1}, {"ell2", c.ell2}, {"h1", c.h1}, {"h2", c.h2}};
  j["m1"] = c.m1;
  j["m2"] = c.m2;
  j["r0"] = c.r0 ? Json(*c.r0) : Json(nullptr);
  j["rmu"] = c.rmu ? Json(*c.rmu) : Json(nullptr);
  j["tolerances"] = {{"rel_tol", c.tol.rel_tol},
                     {"abs_tol", c.tol.abs_tol},
                     {"energy_budget", c.tol.energy_budget},
                     {"event_tol", c.tol.event_tol}};
  j["search"] = {{"paths", c.paths},
                 {"initial_samples", c.initial_samples},
                 {"budget", c.budget},
                 {"seed_grid", c.seed_grid},
                 {"plot_samples", c.plot_samples}};
  j["swap_rectangles"] = c.swap_rectangles;
  return j;
}

// ---------------------------------------------------------------------------
// Certificate

inline Json witness_json(const StretchWitness& w) {
  Json j;
  j["symbol"] = w.symbol;
  j["band_interval"] = Json::array({w.band_lo, w.band_hi});
  j["t_star"] = w.t_star;
  j["t_star_star"] = w.t_star_star;
  j["side_at_star"] = to_string(w.side_at_star);
  j["side_at_star_star"] = to_string(w.side_at_star_star);
  j["energy_at_star"] = w.energy_at_star;
  j["energy_at_star_star"] = w.energy_at_star_star;
  Json img = Json::array();
  for (const auto& z : w.image) img.push_back(point_json(z));
  j["image"] = std::move(img);
  return j;
}

inline Json phase_json(const PhaseResult& ph) {
  Json paths = Json::array();
  for (const PathResult& p : ph.paths) {
    Json pj;
    pj["path"] = p.path;
    pj["samples"] = p.samples;
    pj["theta_start"] = p.theta_start;
    pj["theta_end"] = p.theta_end;
    pj["inclusion"] = p.inclusion;
    pj["disjoint"] = p.disjoint;
    pj["failure"] = p.failure ? Json(*p.failure) : Json(nullptr);
    Json ws = Json::array();
    for (const auto& w : p.witnesses) ws.push_back(witness_json(w));
    pj["witnesses"] = std::move(ws);
    paths.push_back(std::move(pj));
  }
  return paths;
}

inline Json certificate_json(const Certificate& c, const RunConfig& cfg) {
  Json j;
  j["kind"] = "lvchaos-certificate";
  j["config"] = config_json(cfg);
  Json ab;
  for (std::size_t i = 0; i < c.abscissae.size(); ++i) ab[kChainNames[i]] = c.abscissae[i];
  j["linking"] = {{"linked", c.linked}, {"abscissae", ab},
                  {"violation", c.link_violation.empty() ? Json(nullptr) : Json(c.link_violation)}};
  j["periods"] = {{"tau_ell1", c.tau_ell1}, {"tau_ell2", c.tau_ell2}, {"tau_h1", c.tau_h1}, {"tau_h2", c.tau_h2}};
  j["bounds"] = {{"m1", c.bounds.m1},
                 {"m2", c.bounds.m2},
                 {"alpha", c.bounds.alpha},
                 {"beta", c.bounds.beta},
                 {"r0", c.r0},
                 {"rmu", c.rmu},
                 {"n_star", c.bounds.n_star ? Json(*c.bounds.n_star) : Json(nullptr)},
                 {"n_star_star", c.bounds.n_star_star ? Json(*c.bounds.n_star_star) : Json(nullptr)}};
  j["witnesses_phase0"] = phase_json(c.phase0);
  j["witnesses_phase_mu"] = phase_json(c.phase_mu);
  Json failures = Json::array();
  for (const auto& f : c.failures) failures.push_back(f);
  j["verdict"] = {{"certified", c.certified},
                  {"scope", "numerical, path-sampled"},
                  {"failures", std::move(failures)},
                  {"entropy_floor", c.entropy_floor}};
  return j;
}

// ---------------------------------------------------------------------------
// Plot data

namespace detail {

inline Json polyline_json(const std::vector<PhasePoint>& pts) {
  Json a = Json::array();
  for (const auto& z : pts) a.push_back(point_json(z));
  return a;
}

// Closed boundary of a rectangle through its chart: bottom, right, top, left.
inline std::vector<PhasePoint> rect_boundary(const LinkedConfig& cfg, Rect r, int n) {
  std::vector<PhasePoint> pts;
  auto at = [&](double u, double v) { pts.push_back(rect_point(cfg, r, u, v)); };
  for (int i = 0; i < n; ++i) at(static_cast<double>(i) / n, 0.0);
  for (int i = 0; i < n; ++i) at(1.0, static_cast<double>(i) / n);
  for (int i = 0; i < n; ++i) at(1.0 - static_cast<double>(i) / n, 1.0);
  for (int i = 0; i < n; ++i) at(0.0, 1.0 - static_cast<double>(i) / n);
  return pts;
}

}  // namespace detail

/// Level curves of both annuli, the rectangle boundaries (empty when the
/// annuli are not linked) and the segment of r inside the quadrant.
inline Json plot_json(const RunConfig& c, int n) {
  const VolterraParams p0 = c.params;
  const VolterraParams pmu = harvested(p0, c.mu);
  Json j;
  j["annulusP"] = {{"inner", detail::polyline_json(sample_level_curve(p0, c.ell1, n))},
                   {"outer", detail::polyline_json(sample_level_curve(p0, c.ell2, n))}};
  j["annulusQ"] = {{"inner", detail::polyline_json(sample_level_curve(pmu, c.h1, n))},
                   {"outer", detail::polyline_json(sample_level_curve(pmu, c.h2, n))}};
  const LinkReport rep = check_linked(Annulus{p0, c.ell1, c.ell2}, Annulus{pmu, c.h1, c.h2});
  if (rep.linked) {
    const LinkedConfig cfg = LinkedConfig::make(Schedule::make(p0, c.mu, 1.0, 1.0), c.ell1, c.ell2, c.h1, c.h2,
                                                c.swap_rectangles);
    const int side = std::max(4, n / 4);
    j["rect1"] = detail::polyline_json(detail::rect_boundary(cfg, c.swap_rectangles ? Rect::R2 : Rect::R1, side));
    j["rect2"] = detail::polyline_json(detail::rect_boundary(cfg, c.swap_rectangles ? Rect::R1 : Rect::R2, side));
  } else {
    j["rect1"] = Json::array();
    j["rect2"] = Json::array();
  }
  const double x_end = (p0.a + p0.c) / p0.d;
  j["line_r"] = Json::array({point_json({0.0, (p0.a + p0.c) / p0.b}), point_json({x_end, 0.0})});
  j["linked"] = rep.linked;
  return j;
}

// ---------------------------------------------------------------------------
// Symbolic reports

inline Json orbit_json(const PeriodicOrbit& o, const std::optional<CrossingCounts>& cc = std::nullopt) {
  Json j;
  j["word"] = to_string(o.word);
  j["period"] = o.word.size();
  j["anchor"] = point_json(o.anchor);
  j["residual"] = o.residual;
  Json s = Json::array();
  for (const auto& z : o.samples) s.push_back(point_json(z));
  j["samples"] = std::move(s);
  j["newton_iterations"] = o.newton_iterations;
  if (cc) j["crossings"] = {{"count2", cc->count2}, {"count1", cc->count1}};
  return j;
}

inline Json realization_json(const RealizationReport& r) {
  Json j;
  j["length"] = r.length;
  j["words"] = r.entries.size();
  j["realized"] = r.realized;
  j["min_separation"] = std::isfinite(r.min_separation) ? Json(r.min_separation) : Json(nullptr);
  j["kappa1"] = r.kappa1 ? Json(*r.kappa1) : Json(nullptr);
  j["kappa2"] = r.kappa2 ? Json(*r.kappa2) : Json(nullptr);
  Json e;
  for (const auto& en : r.entries) {
    e[to_string(en.word)] = en.orbit ? orbit_json(*en.orbit, en.crossings) : Json{{"error", en.error}};
  }
  j["entries"] = std::move(e);
  return j;
}

/// `cycle,phase,t,x,y` rows of the switched trajectory from z over whole cycles.
inline void write_switched_csv(std::ostream& os, const Schedule& s, const PhasePoint& z, int cycles,
                               const Tolerances& tol = {}) {
  os << "cycle,phase,t,x,y\n";
  PhasePoint cur = z;
  const double T = s.period();
  for (int i = 0; i < cycles; ++i) {
    for (int leg = 0; leg < 2; ++leg) {
      const VolterraParams p = leg == 0 ? s.base : s.harvested_params();
      const double dur = leg == 0 ? s.r0 : s.rmu;
      const double off = i * T + (leg == 0 ? 0.0 : s.r0);
      const auto rows = sample_trajectory(p, cur, dur, tol);
      for (std::size_t r = leg == 0 && i == 0 ? 0 : 1; r < rows.size(); ++r) {
        os << i << ',' << (leg == 0 ? "0" : "mu") << ',' << detail::fmt17(off + rows[r].t) << ','
           << detail::fmt17(rows[r].x) << ',' << detail::fmt17(rows[r].y) << '\n';
      }
      cur = {rows.back().x, rows.back().y};
    }
  }
}

}  // namespace lvchaos
