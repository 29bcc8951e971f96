#pragma once

// Stretching along paths. For each phase of the switched system we push test
// paths that cross the source rectangle from its left side to its right side
// through the phase map, and look for sub-paths whose images cross the target
// rectangle from side to side inside each symbol band. The search is
// path-sampled: a finite family of test paths stands in for "every path".

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lvchaos/detail/format.hpp"
#include "lvchaos/detail/parallel.hpp"
#include "lvchaos/errors.hpp"
#include "lvchaos/geometry.hpp"
#include "lvchaos/integrate.hpp"
#include "lvchaos/model.hpp"
#include "lvchaos/twist.hpp"

namespace lvchaos {

/// Phase of the switched system: zero = unharvested (duration r0), mu =
/// harvested (duration rmu).
enum class Phase { zero, mu };

inline const char* to_string(Phase p) { return p == Phase::zero ? "phase0" : "phase_mu"; }

/// One phase map together with the rectangles and bands it is tested on.
struct PhaseMap {
  Phase phase = Phase::zero;
  VolterraParams params;
  AngularFrame frame;
  double duration = 0.0;
  Rect source = Rect::R1;
  Rect target = Rect::R2;
  BandVariant variant = BandVariant::H;
};

inline PhaseMap phase_map(const LinkedConfig& cfg, Phase phase) {
  if (phase == Phase::zero) {
    return {phase, cfg.base(), AngularFrame::of(cfg.base()), cfg.schedule.r0, Rect::R1, Rect::R2, BandVariant::H};
  }
  const VolterraParams pmu = cfg.harvested();
  return {phase, pmu, AngularFrame::of(pmu), cfg.schedule.rmu, Rect::R2, Rect::R1, BandVariant::K};
}

/// Same map with a different duration.
inline PhaseMap with_duration(PhaseMap m, double duration) {
  m.duration = duration;
  return m;
}

/// Levels of the left and right sides of a rectangle, and the energy that
/// defines them: R1 sides lie on base levels l1/l2, R2 sides on harvested
/// levels h1/h2.
inline std::pair<double, double> side_levels(const LinkedConfig& cfg, Rect r) {
  return r == Rect::R1 ? std::pair{cfg.ell1(), cfg.ell2()} : std::pair{cfg.h1(), cfg.h2()};
}

inline double side_energy(const LinkedConfig& cfg, Rect r, const PhasePoint& z) {
  return r == Rect::R1 ? energy(cfg.base(), z) : energy(cfg.harvested(), z);
}

enum class Side { left, right };

inline const char* to_string(Side s) { return s == Side::left ? "left" : "right"; }

/// Continuous path s in [0, 1] -> quadrant.
class PlanePath {
 public:
  PlanePath(std::string name, std::function<PhasePoint(double)> curve)
      : name_(std::move(name)), curve_(std::move(curve)) {}

  PhasePoint at(double s) const { return curve_(s); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::function<PhasePoint(double)> curve_;
};

/// Left-to-right path of the rectangle along a fixed value of the other
/// chart coordinate; `fixed` = 0 or 1 gives the two boundary arcs.
inline PlanePath chart_path(const LinkedConfig& cfg, Rect r, double fixed, std::string name = {}) {
  if (name.empty()) name = "chart@" + detail::fmt17(fixed);
  if (r == Rect::R1) {
    return PlanePath(std::move(name), [cfg, fixed](double s) { return rect_point(cfg, Rect::R1, s, fixed); });
  }
  return PlanePath(std::move(name), [cfg, fixed](double s) { return rect_point(cfg, Rect::R2, fixed, s); });
}

/// Radial path in energy coordinates: the other chart coordinate is held at
/// its mid value while the side-defining energy runs from the inner to the
/// outer level. A Euclidean ray from the center does not stay inside these
/// skewed rectangles, so the radial direction is taken in the (E0, Emu) chart.
inline PlanePath radial_path(const LinkedConfig& cfg, Rect r) { return chart_path(cfg, r, 0.5, "radial"); }

/// Test family of size k on rectangle r: the radial segment, the two boundary
/// arcs joining left to right, then interior chart paths.
inline std::vector<PlanePath> test_paths(const LinkedConfig& cfg, Rect r, int k) {
  if (k < 1) throw InvalidParams("path family size must be at least 1");
  std::vector<PlanePath> out;
  out.push_back(radial_path(cfg, r));
  if (k >= 2) out.push_back(chart_path(cfg, r, 0.0, "boundary@0"));
  if (k >= 3) out.push_back(chart_path(cfg, r, 1.0, "boundary@1"));
  for (int j = 1; j <= k - 3; ++j) out.push_back(chart_path(cfg, r, static_cast<double>(j) / (k - 2)));
  return out;
}

struct SapOptions {
  std::size_t initial_samples = 65;
  std::size_t budget = 200'000;  ///< max samples per pushed path
  int threads = 1;
  double class_margin = kClassMargin;
  double edge_tol = 1e-12;  ///< parameter tolerance for band/side edges
  double side_tol = 1e-9;   ///< energy tolerance for witness endpoints
};

struct AnnotatedSample {
  double s = 0.0;
  PhasePoint source;
  PhasePoint image;
  double theta0 = 0.0;  ///< initial angle in (-pi, pi]
  double theta = 0.0;   ///< final unwrapped angle about the map's center
  double e0 = 0.0;      ///< base energy of the image
  double emu = 0.0;     ///< harvested energy of the image
};

/// A test path with its pushed-forward samples.
struct AnnotatedPath {
  PhaseMap map;
  PlanePath path;
  Tolerances tol;
  std::vector<AnnotatedSample> samples;
};

inline AnnotatedSample evaluate_sample(const LinkedConfig& cfg, const PhaseMap& map, const PlanePath& path,
                                       double s, const Tolerances& tol) {
  const PhasePoint z = path.at(s);
  const AngleResult r = advance_angle(map.params, map.frame, z, map.duration, tol);
  return {s, z, r.z, r.theta0, r.theta, energy(cfg.base(), r.z), energy(cfg.harvested(), r.z)};
}

/// Pushes every sample of the path through the phase map, refining the
/// parameter until consecutive final angles differ by at most pi/4 and
/// consecutive images differ in each energy by at most 1/8 of its band.
inline AnnotatedPath push_path(const LinkedConfig& cfg, const PhaseMap& map, const PlanePath& path,
                               const Tolerances& tol = {}, const SapOptions& opt = {}) {
  AnnotatedPath out{map, path, tol, {}};
  const std::size_t n0 = std::max<std::size_t>(opt.initial_samples, 2);
  out.samples.resize(n0);
  detail::parallel_for(n0, opt.threads, [&](std::size_t i) {
    out.samples[i] = evaluate_sample(cfg, map, path, static_cast<double>(i) / static_cast<double>(n0 - 1), tol);
  });
  const double w0 = (cfg.ell2() - cfg.ell1()) / 8.0;
  const double wmu = (cfg.h2() - cfg.h1()) / 8.0;
  auto too_coarse = [&](const AnnotatedSample& a, const AnnotatedSample& b) {
    return std::abs(b.theta - a.theta) > std::numbers::pi / 4.0 || std::abs(b.e0 - a.e0) > w0 ||
           std::abs(b.emu - a.emu) > wmu;
  };
  while (true) {
    std::vector<double> mids;
    for (std::size_t i = 0; i + 1 < out.samples.size(); ++i) {
      const auto& a = out.samples[i];
      const auto& b = out.samples[i + 1];
      if (!too_coarse(a, b)) continue;
      if (b.s - a.s < 1e-14) throw RefinementBudgetExceeded("path image is not resolvable near s=" + detail::fmt17(a.s));
      mids.push_back(0.5 * (a.s + b.s));
    }
    if (mids.empty()) break;
    if (out.samples.size() + mids.size() > opt.budget) {
      throw RefinementBudgetExceeded("path '" + path.name() + "' needs more than " + std::to_string(opt.budget) +
                                     " samples");
    }
    std::vector<AnnotatedSample> fresh(mids.size());
    detail::parallel_for(mids.size(), opt.threads,
                         [&](std::size_t i) { fresh[i] = evaluate_sample(cfg, map, path, mids[i], tol); });
    std::vector<AnnotatedSample> merged;
    merged.reserve(out.samples.size() + fresh.size());
    std::merge(out.samples.begin(), out.samples.end(), fresh.begin(), fresh.end(), std::back_inserter(merged),
               [](const AnnotatedSample& a, const AnnotatedSample& b) { return a.s < b.s; });
    out.samples = std::move(merged);
  }
  return out;
}

/// Target angle interval that the pushed path must cover: [2 pi n, 2 pi (n+m) - pi]
/// for H, [pi (2n+1), 2 pi (n+m)] for K.
inline Band inclusion_target(long n, int m, BandVariant variant) {
  constexpr double pi = std::numbers::pi;
  const double nn = static_cast<double>(n);
  return variant == BandVariant::H ? Band{2.0 * pi * nn, 2.0 * pi * (nn + m) - pi}
                                   : Band{pi * (2.0 * nn + 1.0), 2.0 * pi * (nn + m)};
}

/// True iff [theta(end), theta(start)] contains the target interval (the path
/// starts on the inner level, which turns faster).
inline bool verify_inclusion(const AnnotatedPath& ap, long n, int m, BandVariant variant) {
  if (ap.samples.empty()) return false;
  const Band target = inclusion_target(n, m, variant);
  return ap.samples.back().theta <= target.lo && ap.samples.front().theta >= target.hi;
}

struct StretchWitness {
  int symbol = 0;
  double band_lo = 0.0;  ///< parameter interval whose final angles fill band `symbol`
  double band_hi = 0.0;
  double t_star = 0.0;  ///< sub-interval whose image crosses the target rectangle
  double t_star_star = 0.0;
  Side side_at_star = Side::left;
  Side side_at_star_star = Side::right;
  double energy_at_star = 0.0;  ///< target side-energy of the image endpoints
  double energy_at_star_star = 0.0;
  std::vector<PhasePoint> image;  ///< sampled image sub-path, endpoints included
};

namespace detail {

// Bisection on the path parameter for a sign change of f(sample) on [sa, sb].
template <class F>
AnnotatedSample bisect_samples(const LinkedConfig& cfg, const AnnotatedPath& ap, AnnotatedSample a,
                               AnnotatedSample b, F&& f, double tol_s) {
  const bool neg_a = f(a) < 0.0;
  while (b.s - a.s > tol_s) {
    const double mid = 0.5 * (a.s + b.s);
    if (mid <= a.s || mid >= b.s) break;
    AnnotatedSample m = evaluate_sample(cfg, ap.map, ap.path, mid, ap.tol);
    if ((f(m) < 0.0) == neg_a) {
      a = std::move(m);
    } else {
      b = std::move(m);
    }
  }
  return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

}  // namespace detail

/// For each band i < m, finds the maximal parameter interval whose final angle
/// runs through band i from one edge to the other, and inside it a
/// sub-interval whose image runs inside the target rectangle from one side to
/// the other. Throws WitnessNotFound naming the first band that fails.
inline std::vector<StretchWitness> find_witnesses(const LinkedConfig& cfg, const AnnotatedPath& ap, int m, long n,
                                                  const SapOptions& opt = {}) {
  const auto& S = ap.samples;
  const Rect target = ap.map.target;
  const auto [left_level, right_level] = side_levels(cfg, target);
  std::vector<StretchWitness> out;
  for (int i = 0; i < m; ++i) {
    const Band band = symbol_band(n, i, ap.map.variant);
    auto inside = [&](double th) { return th >= band.lo && th <= band.hi; };
    // Locate a run of samples inside the band entered and left through
    // opposite edges.
    std::optional<std::pair<std::size_t, std::size_t>> run;
    for (std::size_t j = 1; j + 1 < S.size() && !run; ++j) {
      if (!inside(S[j].theta) || inside(S[j - 1].theta)) continue;
      std::size_t k = j;
      while (k + 1 < S.size() && inside(S[k + 1].theta)) ++k;
      if (k + 1 >= S.size()) break;
      const bool enter_high = S[j - 1].theta > band.hi;
      const bool exit_high = S[k + 1].theta > band.hi;
      if (enter_high != exit_high) run = {j, k};
      j = k;
    }
    if (!run) {
      throw WitnessNotFound("symbol " + std::to_string(i) + " of " + to_string(ap.map.phase) + " on path '" +
                            ap.path.name() + "': final angles never sweep band [" + detail::fmt17(band.lo) + ", " +
                            detail::fmt17(band.hi) + "]");
    }
    const auto [j, k] = *run;
    const double edge_in = S[j - 1].theta > band.hi ? band.hi : band.lo;
    const double edge_out = S[k + 1].theta > band.hi ? band.hi : band.lo;
    const AnnotatedSample a = detail::bisect_samples(
        cfg, ap, S[j - 1], S[j], [&](const AnnotatedSample& x) { return x.theta - edge_in; }, opt.edge_tol);
    const AnnotatedSample b = detail::bisect_samples(
        cfg, ap, S[k], S[k + 1], [&](const AnnotatedSample& x) { return x.theta - edge_out; }, opt.edge_tol);
    if (std::abs(a.theta - edge_in) > opt.class_margin || std::abs(b.theta - edge_out) > opt.class_margin) {
      throw BandEdgeAmbiguous("band " + std::to_string(i) + " edge could not be localized on path '" +
                              ap.path.name() + "'");
    }
    std::vector<AnnotatedSample> run_samples;
    run_samples.push_back(a);
    for (std::size_t q = j; q <= k; ++q) run_samples.push_back(S[q]);
    run_samples.push_back(b);

    // Inside the band run, find the first stretch whose target side-energy
    // enters [left, right] through one level and leaves through the other.
    auto e_of = [&](const AnnotatedSample& x) { return side_energy(cfg, target, x.image); };
    auto level_state = [&](double e) { return e < left_level ? -1 : (e > right_level ? 1 : 0); };
    std::optional<std::pair<std::size_t, std::size_t>> cross;
    for (std::size_t q = 1; q < run_samples.size() && !cross; ++q) {
      const int prev = level_state(e_of(run_samples[q - 1]));
      if (prev == 0 || level_state(e_of(run_samples[q])) != 0) continue;
      std::size_t r = q;
      while (r + 1 < run_samples.size() && level_state(e_of(run_samples[r + 1])) == 0) ++r;
      if (r + 1 >= run_samples.size()) break;
      const int next = level_state(e_of(run_samples[r + 1]));
      if (next == -prev) cross = {q, r};
      q = r;
    }
    if (!cross) {
      throw WitnessNotFound("symbol " + std::to_string(i) + " of " + to_string(ap.map.phase) + " on path '" +
                            ap.path.name() + "': band image does not cross the target rectangle side to side");
    }
    const auto [q, r] = *cross;
    const double level_in = level_state(e_of(run_samples[q - 1])) < 0 ? left_level : right_level;
    const double level_out = level_in == left_level ? right_level : left_level;
    const AnnotatedSample ea = detail::bisect_samples(
        cfg, ap, run_samples[q - 1], run_samples[q], [&](const AnnotatedSample& x) { return e_of(x) - level_in; },
        opt.edge_tol);
    const AnnotatedSample eb = detail::bisect_samples(
        cfg, ap, run_samples[r], run_samples[r + 1], [&](const AnnotatedSample& x) { return e_of(x) - level_out; },
        opt.edge_tol);

    StretchWitness w;
    w.symbol = i;
    w.band_lo = std::min(a.s, b.s);
    w.band_hi = std::max(a.s, b.s);
    const bool forward = ea.s <= eb.s;
    const AnnotatedSample& lo_end = forward ? ea : eb;
    const AnnotatedSample& hi_end = forward ? eb : ea;
    w.t_star = lo_end.s;
    w.t_star_star = hi_end.s;
    w.energy_at_star = e_of(lo_end);
    w.energy_at_star_star = e_of(hi_end);
    auto side_of = [&](double e) {
      return std::abs(e - left_level) <= std::abs(e - right_level) ? Side::left : Side::right;
    };
    w.side_at_star = side_of(w.energy_at_star);
    w.side_at_star_star = side_of(w.energy_at_star_star);
    w.image.push_back(lo_end.image);
    for (std::size_t t = q; t <= r; ++t) w.image.push_back(run_samples[t].image);
    if (!forward) std::reverse(w.image.begin() + 1, w.image.end());
    w.image.push_back(hi_end.image);

    auto side_gap = [&](double e, Side sd) { return std::abs(e - (sd == Side::left ? left_level : right_level)); };
    if (side_gap(w.energy_at_star, w.side_at_star) > opt.side_tol ||
        side_gap(w.energy_at_star_star, w.side_at_star_star) > opt.side_tol ||
        w.side_at_star == w.side_at_star_star) {
      throw WitnessNotFound("symbol " + std::to_string(i) + " on path '" + ap.path.name() +
                            "': sub-path endpoints do not land on opposite sides");
    }
    for (std::size_t t = 0; t < w.image.size(); ++t) {
      const bool endpoint = t == 0 || t + 1 == w.image.size();
      if (!in_rect(cfg, target, w.image[t], endpoint ? opt.side_tol : 1e-12)) {
        throw WitnessNotFound("symbol " + std::to_string(i) + " on path '" + ap.path.name() +
                              "': image sub-path leaves the target rectangle");
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

struct PathResult {
  std::string path;
  std::size_t samples = 0;
  double theta_start = 0.0;  ///< final angle at s = 0 (inner side)
  double theta_end = 0.0;    ///< final angle at s = 1 (outer side)
  bool inclusion = false;
  bool disjoint = false;
  std::vector<StretchWitness> witnesses;
  std::optional<std::string> failure;

  bool ok() const { return inclusion && disjoint && !failure && !witnesses.empty(); }
};

struct PhaseResult {
  Phase phase = Phase::zero;
  double duration = 0.0;
  double bound = 0.0;  ///< alpha or beta
  long winding = 0;    ///< n* or n**
  std::vector<PathResult> paths;

  bool ok() const {
    return duration >= bound && !paths.empty() &&
           std::all_of(paths.begin(), paths.end(), [](const PathResult& p) { return p.ok(); });
  }
};

struct CertifyRequest {
  VolterraParams base;
  double mu = 0.0;
  double ell1 = 0.0, ell2 = 0.0, h1 = 0.0, h2 = 0.0;
  int m1 = 1;
  int m2 = 1;
  std::optional<double> r0;  ///< defaults to ceil(alpha)
  std::optional<double> rmu; ///< defaults to ceil(beta)
  int paths = 3;             ///< test paths per phase
  bool swap_rectangles = false;
  Tolerances tol;
  SapOptions sap;
};

struct Certificate {
  CertifyRequest request;
  bool linked = false;
  LinkChain abscissae{};
  std::string link_violation;
  double tau_ell1 = 0.0, tau_ell2 = 0.0, tau_h1 = 0.0, tau_h2 = 0.0;
  TwistBounds bounds;
  double r0 = 0.0;
  double rmu = 0.0;
  PhaseResult phase0;
  PhaseResult phase_mu;
  bool certified = false;
  std::vector<std::string> failures;  ///< "<stage>: <reason>", in stage order
  double entropy_floor = 0.0;
};

inline double entropy_floor(int m1, int m2) {
  if (m1 < 1 || m2 < 1) throw InvalidParams("symbol counts must be at least 1");
  return std::log(static_cast<double>(m1) * static_cast<double>(m2));
}

namespace detail {

inline bool witnesses_disjoint(const std::vector<StretchWitness>& ws) {
  for (std::size_t i = 0; i < ws.size(); ++i) {
    for (std::size_t j = i + 1; j < ws.size(); ++j) {
      if (!(ws[i].t_star_star < ws[j].t_star || ws[j].t_star_star < ws[i].t_star)) return false;
    }
  }
  return true;
}

inline PathResult run_path(const LinkedConfig& cfg, const PhaseMap& map, const PlanePath& path, int m, long n,
                           const Tolerances& tol, const SapOptions& opt) {
  PathResult r;
  r.path = path.name();
  try {
    const AnnotatedPath ap = push_path(cfg, map, path, tol, opt);
    r.samples = ap.samples.size();
    r.theta_start = ap.samples.front().theta;
    r.theta_end = ap.samples.back().theta;
    r.inclusion = verify_inclusion(ap, n, m, map.variant);
    r.witnesses = find_witnesses(cfg, ap, m, n, opt);
    r.disjoint = witnesses_disjoint(r.witnesses);
    if (!r.inclusion) r.failure = "angle interval inclusion fails";
    else if (!r.disjoint) r.failure = "witness intervals overlap";
  } catch (const error& e) {
    r.failure = e.what();
  }
  return r;
}

inline PhaseResult run_phase(const LinkedConfig& cfg, Phase phase, int m, long n, double bound, int k,
                             const Tolerances& tol, const SapOptions& opt) {
  const PhaseMap map = phase_map(cfg, phase);
  PhaseResult out{phase, map.duration, bound, n, {}};
  for (const PlanePath& path : test_paths(cfg, map.source, k)) {
    out.paths.push_back(run_path(cfg, map, path, m, n, tol, opt));
  }
  return out;
}

}  // namespace detail

/// Full certification: linking, boundary periods, twist bounds, then witness
/// searches for both phases on k test paths each. Configuration errors throw;
/// every other failure is reported in the certificate.
inline Certificate certify(const CertifyRequest& req) {
  req.base.validate();
  req.tol.validate();
  const VolterraParams pmu = harvested(req.base, req.mu);
  if (req.m1 < 1 || req.m2 < 1) throw InvalidParams("symbol counts must be at least 1");
  if (req.paths < 1) throw InvalidParams("path family size must be at least 1");
  const Annulus ap{req.base, req.ell1, req.ell2};
  const Annulus aq{pmu, req.h1, req.h2};
  ap.validate();
  aq.validate();

  Certificate cert;
  cert.request = req;
  cert.entropy_floor = entropy_floor(req.m1, req.m2);
  const LinkReport link = check_linked(ap, aq);
  cert.linked = link.linked;
  cert.abscissae = link.abscissae;
  cert.link_violation = link.violated;
  if (!link.linked) cert.failures.push_back("linking: " + link.violated);

  cert.bounds.m1 = req.m1;
  cert.bounds.m2 = req.m2;
  try {
    cert.tau_ell1 = period(req.base, req.ell1, req.tol);
    cert.tau_ell2 = period(req.base, req.ell2, req.tol);
    cert.tau_h1 = period(pmu, req.h1, req.tol);
    cert.tau_h2 = period(pmu, req.h2, req.tol);
    cert.bounds.alpha = twist_bound(req.m1, cert.tau_ell1, cert.tau_ell2);
    cert.bounds.beta = twist_bound(req.m2, cert.tau_h1, cert.tau_h2);
  } catch (const error& e) {
    cert.failures.push_back(std::string("twist: ") + e.what());
    return cert;
  }
  cert.r0 = req.r0.value_or(std::ceil(cert.bounds.alpha));
  cert.rmu = req.rmu.value_or(std::ceil(cert.bounds.beta));
  if (!(cert.r0 > 0.0) || !(cert.rmu > 0.0)) throw InvalidParams("phase durations must be positive");
  cert.bounds.n_star = winding_floor(cert.r0, cert.tau_ell2);
  cert.bounds.n_star_star = winding_floor(cert.rmu, cert.tau_h2);
  if (cert.r0 < cert.bounds.alpha) cert.failures.push_back("phase0: r0 is below alpha");
  if (cert.rmu < cert.bounds.beta) cert.failures.push_back("phase_mu: rmu is below beta");
  if (!cert.linked) return cert;

  const LinkedConfig cfg = LinkedConfig::make(Schedule::make(req.base, req.mu, cert.r0, cert.rmu), req.ell1, req.ell2,
                                              req.h1, req.h2, req.swap_rectangles);
  cert.phase0 = detail::run_phase(cfg, Phase::zero, req.m1, *cert.bounds.n_star, cert.bounds.alpha, req.paths,
                                  req.tol, req.sap);
  cert.phase_mu = detail::run_phase(cfg, Phase::mu, req.m2, *cert.bounds.n_star_star, cert.bounds.beta, req.paths,
                                    req.tol, req.sap);
  for (const PhaseResult* ph : {&cert.phase0, &cert.phase_mu}) {
    for (const PathResult& p : ph->paths) {
      if (p.failure) cert.failures.push_back(std::string(to_string(ph->phase)) + ": path '" + p.path + "': " + *p.failure);
    }
  }
  cert.certified = cert.failures.empty() && cert.phase0.ok() && cert.phase_mu.ok();
  return cert;
}

}  // namespace lvchaos
