#pragma once

// Energy annuli around the two centers, the line r through both centers, the
// linking test on r, and the two rectangles where the annuli overlap.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "lvchaos/detail/format.hpp"
#include "lvchaos/errors.hpp"
#include "lvchaos/integrate.hpp"
#include "lvchaos/model.hpp"

namespace lvchaos {

/// b y + d x - a - c: negative below r, positive above. Both centers lie on r
/// for every harvesting rate since a - mu + c + mu = a + c.
inline double line_r_signed(const VolterraParams& p, const PhasePoint& z) {
  return p.b * z.y + p.d * z.x - p.a - p.c;
}

inline PhasePoint point_on_r(const VolterraParams& p, double x) { return {x, (p.a + p.c - p.d * x) / p.b}; }

namespace detail {

// Bisection down to adjacent doubles; f(lo) and f(hi) must differ in sign.
template <class F>
double bisect(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline void require_above_minimum(const VolterraParams& p, double level) {
  const double chi = min_energy(p);
  if (!(level > chi)) {
    throw LevelBelowMinimum("level " + fmt17(level) + " is not above the minimum energy " + fmt17(chi));
  }
}

}  // namespace detail

struct Abscissae {
  double minus = 0.0;  ///< left of the center
  double plus = 0.0;   ///< right of the center
};

/// The two points of the level curve on r, as x coordinates. `line` fixes r;
/// `field` is the energy being levelled (they share r when they differ only by
/// harvesting).
inline Abscissae level_abscissae(const VolterraParams& field, double level, const VolterraParams& line) {
  detail::require_above_minimum(field, level);
  const double x_end = (line.a + line.c) / line.d;
  auto g = [&](double x) { return energy(field, point_on_r(line, x)) - level; };
  // Center of `field` projected on r; for fields sharing r it is the center.
  const double xc = field.c / field.d;
  if (!(xc > 0.0 && xc < x_end) || !(g(xc) < 0.0)) {
    throw LevelBelowMinimum("line r misses the interior of the level curve");
  }
  // Near the separatrix the crossing with r rounds onto an axis before the
  // bracket closes; such levels cannot be resolved in double precision.
  auto unresolved = [&] {
    return OutOfCertifiedRange("level " + detail::fmt17(level) + " meets r too close to an axis to resolve");
  };
  double lo = xc;
  do {
    lo *= 0.5;
    if (!(lo > 0.0)) throw unresolved();
  } while (g(lo) <= 0.0);
  double hi = xc;
  double gap = x_end - xc;
  do {
    gap *= 0.5;
    hi = x_end - gap;
    if (!(point_on_r(line, hi).y > 0.0)) throw unresolved();
  } while (g(hi) <= 0.0);
  return {detail::bisect(g, lo, xc), detail::bisect(g, xc, hi)};
}

inline Abscissae level_abscissae(const VolterraParams& p, double level) { return level_abscissae(p, level, p); }

/// Closed region between two level curves of one field.
struct Annulus {
  VolterraParams params;
  double inner = 0.0;
  double outer = 0.0;

  void validate() const {
    params.validate();
    detail::require_above_minimum(params, inner);
    if (!(outer > inner)) {
      throw InvalidParams("annulus outer level " + detail::fmt17(outer) + " must exceed inner level " +
                          detail::fmt17(inner));
    }
  }

  bool contains_level(double e, double eps = 1e-12) const { return e >= inner - eps && e <= outer + eps; }
};

/// Abscissae on r in chain order P2-, P1-, Q2-, Q1-, P1+, P2+, Q1+, Q2+.
using LinkChain = std::array<double, 8>;

inline constexpr std::array<const char*, 8> kChainNames{"P2-", "P1-", "Q2-", "Q1-", "P1+", "P2+", "Q1+", "Q2+"};
// true = strict comparison between consecutive chain entries.
inline constexpr std::array<bool, 7> kChainStrict{true, false, true, false, true, false, true};

inline constexpr double kStrictMargin = 1e-9;
inline constexpr double kLooseSlack = 1e-12;

struct LinkReport {
  bool linked = false;
  LinkChain abscissae{};
  std::string violated;  ///< first failing comparison, empty when linked
};

/// Computes the eight abscissae and checks the linking chain.
inline LinkReport check_linked(const Annulus& ap, const Annulus& aq) {
  ap.validate();
  aq.validate();
  const VolterraParams& line = ap.params;
  if (aq.params.b != line.b || aq.params.d != line.d ||
      std::abs((aq.params.a + aq.params.c) - (line.a + line.c)) > 1e-12 * (line.a + line.c)) {
    throw InvalidParams("annuli must come from fields sharing the line r");
  }
  const Abscissae p1 = level_abscissae(ap.params, ap.inner, line);
  const Abscissae p2 = level_abscissae(ap.params, ap.outer, line);
  const Abscissae q1 = level_abscissae(aq.params, aq.inner, line);
  const Abscissae q2 = level_abscissae(aq.params, aq.outer, line);
  LinkReport rep;
  rep.abscissae = {p2.minus, p1.minus, q2.minus, q1.minus, p1.plus, p2.plus, q1.plus, q2.plus};
  for (std::size_t i = 0; i + 1 < rep.abscissae.size(); ++i) {
    const double gap = rep.abscissae[i + 1] - rep.abscissae[i];
    const bool ok = kChainStrict[i] ? gap >= kStrictMargin : gap >= -kLooseSlack;
    if (!ok) {
      rep.violated = std::string(kChainNames[i]) + (kChainStrict[i] ? " < " : " <= ") + kChainNames[i + 1] +
                     " (" + detail::fmt17(rep.abscissae[i]) + " vs " + detail::fmt17(rep.abscissae[i + 1]) + ")";
      return rep;
    }
  }
  rep.linked = true;
  return rep;
}

/// A schedule together with two linked annuli: A_P of the base field and A_Q
/// of the harvested field.
struct LinkedConfig {
  Schedule schedule;
  Annulus annulus_p;
  Annulus annulus_q;
  LinkChain abscissae{};
  bool swap_rectangles = false;

  static LinkedConfig make(const Schedule& s, double ell1, double ell2, double h1, double h2,
                           bool swap_rectangles = false) {
    s.validate();
    LinkedConfig cfg{s, {s.base, ell1, ell2}, {s.harvested_params(), h1, h2}, {}, swap_rectangles};
    const LinkReport rep = check_linked(cfg.annulus_p, cfg.annulus_q);
    if (!rep.linked) throw NotLinked("annuli are not linked: " + rep.violated);
    cfg.abscissae = rep.abscissae;
    return cfg;
  }

  const VolterraParams& base() const { return schedule.base; }
  VolterraParams harvested() const { return schedule.harvested_params(); }
  double ell1() const { return annulus_p.inner; }
  double ell2() const { return annulus_p.outer; }
  double h1() const { return annulus_q.inner; }
  double h2() const { return annulus_q.outer; }
};

/// Geometric rectangle tags: R1 is the overlap below r, R2 above.
enum class Rect { R1, R2 };

enum class Region { R1, R2, AP_only, AQ_only, outside };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::R1: return "R1";
    case Region::R2: return "R2";
    case Region::AP_only: return "AP_only";
    case Region::AQ_only: return "AQ_only";
    default: return "outside";
  }
}

/// Classification by the two energy bands and the side of r. Boundary points
/// within eps of a defining equality count as members. With swap_rectangles
/// the labels R1/R2 are exchanged.
inline Region membership(const LinkedConfig& cfg, const PhasePoint& z, double eps = 1e-12) {
  if (!z.in_quadrant()) return Region::outside;
  const bool in_p = cfg.annulus_p.contains_level(energy(cfg.base(), z), eps);
  const bool in_q = cfg.annulus_q.contains_level(energy(cfg.harvested(), z), eps);
  if (in_p && in_q) {
    const bool below = line_r_signed(cfg.base(), z) <= 0.0;
    return (below != cfg.swap_rectangles) ? Region::R1 : Region::R2;
  }
  if (in_p) return Region::AP_only;
  if (in_q) return Region::AQ_only;
  return Region::outside;
}

/// Geometric test ignoring the swap flag.
inline bool in_rect(const LinkedConfig& cfg, Rect r, const PhasePoint& z, double eps = 1e-12) {
  if (!z.in_quadrant()) return false;
  if (!cfg.annulus_p.contains_level(energy(cfg.base(), z), eps)) return false;
  if (!cfg.annulus_q.contains_level(energy(cfg.harvested(), z), eps)) return false;
  const double side = line_r_signed(cfg.base(), z);
  return r == Rect::R1 ? side <= eps : side >= -eps;
}

namespace detail {

// Point at polar angle psi (in `frame`) on the level curve of `p`.
inline PhasePoint radial_point(const VolterraParams& p, const AngularFrame& frame, double psi, double level) {
  const double c = std::cos(frame.omega), s = std::sin(frame.omega);
  const double u = std::cos(psi), v = std::sin(psi);
  const double dx = c * u + s * v;
  const double dy = -s * u + c * v;
  const PhasePoint o = frame.center;
  double rho_max = std::numeric_limits<double>::infinity();
  if (dx < 0.0) rho_max = std::min(rho_max, -o.x / dx);
  if (dy < 0.0) rho_max = std::min(rho_max, -o.y / dy);
  auto g = [&](double rho) { return energy(p, {o.x + rho * dx, o.y + rho * dy}) - level; };
  double hi;
  if (std::isfinite(rho_max)) {
    double gap = rho_max;
    do {
      gap *= 0.5;
      hi = rho_max - gap;
    } while (g(hi) <= 0.0 && gap > 1e-300);
  } else {
    hi = 1.0;
    while (g(hi) <= 0.0) hi *= 2.0;
  }
  const double rho = bisect(g, 0.0, hi);
  return {o.x + rho * dx, o.y + rho * dy};
}

}  // namespace detail

/// n points of the level curve at equal angular spacing about the center,
/// starting on the positive first axis of the rotated frame.
inline std::vector<PhasePoint> sample_level_curve(const VolterraParams& p, double level, int n) {
  detail::require_above_minimum(p, level);
  if (n < 16) throw InvalidParams("level curve sampling needs n >= 16");
  const AngularFrame frame = AngularFrame::of(p);
  std::vector<PhasePoint> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    pts.push_back(detail::radial_point(p, frame, 2.0 * std::numbers::pi * k / n, level));
  }
  return pts;
}

/// Scaled energy coordinates (u, v) = ((E0 - l1)/(l2 - l1), (Emu - h1)/(h2 - h1)).
inline std::array<double, 2> rect_coords(const LinkedConfig& cfg, const PhasePoint& z) {
  return {(energy(cfg.base(), z) - cfg.ell1()) / (cfg.ell2() - cfg.ell1()),
          (energy(cfg.harvested(), z) - cfg.h1()) / (cfg.h2() - cfg.h1())};
}

/// Inverse of rect_coords on the chosen rectangle: the point of the base level
/// curve at u, on the side of r of `r`, whose harvested energy sits at v.
/// Accepts (u, v) slightly outside [0, 1]^2 as long as the curves still meet.
inline PhasePoint rect_point(const LinkedConfig& cfg, Rect r, double u, double v) {
  const double ell = cfg.ell1() + u * (cfg.ell2() - cfg.ell1());
  const double h = cfg.h1() + v * (cfg.h2() - cfg.h1());
  const VolterraParams& p0 = cfg.base();
  const VolterraParams pmu = cfg.harvested();
  const AngularFrame frame = AngularFrame::of(p0);
  auto g = [&](double psi) { return energy(pmu, detail::radial_point(p0, frame, psi, ell)) - h; };
  // Along the lower half-curve (psi from -pi to 0) the harvested energy runs
  // from above h2 down to below h1; along the upper half it runs back up.
  const double lo = r == Rect::R1 ? -std::numbers::pi : 0.0;
  const double hi = r == Rect::R1 ? 0.0 : std::numbers::pi;
  const double glo = g(lo), ghi = g(hi);
  if ((glo < 0.0) == (ghi < 0.0)) {
    throw DomainError("level curves E0=" + detail::fmt17(ell) + " and Emu=" + detail::fmt17(h) +
                      " do not meet on this side of r");
  }
  return detail::radial_point(p0, frame, detail::bisect(g, lo, hi), ell);
}

}  // namespace lvchaos
