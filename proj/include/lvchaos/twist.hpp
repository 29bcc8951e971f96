#pragma once

// Period map by time of flight, twist bounds on the phase durations, winding
// floors, and angular symbol bands.

#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "lvchaos/detail/format.hpp"
#include "lvchaos/errors.hpp"
#include "lvchaos/geometry.hpp"
#include "lvchaos/integrate.hpp"
#include "lvchaos/model.hpp"

namespace lvchaos {

/// Small-amplitude limit 2 pi / sqrt(a c) of the period.
inline double center_period(const VolterraParams& p) { return 2.0 * std::numbers::pi / std::sqrt(p.a * p.c); }

/// Levels whose period exceeds this multiple of the center period are outside
/// the certified range of the period map.
inline constexpr double kMaxPeriodFactor = 50.0;

/// Minimal period of the closed orbit at `level`: time for the unwrapped angle
/// about the center to gain 2 pi, starting where the orbit crosses r to the
/// right of the center.
inline double period(const VolterraParams& p, double level, const Tolerances& tol = {}) {
  const Abscissae ab = level_abscissae(p, level);
  const PhasePoint start = point_on_r(p, ab.plus);
  const AngularFrame frame = AngularFrame::of(p);
  const double target = frame.angle(start) + 2.0 * std::numbers::pi;
  std::optional<double> hit;
  double theta = 0.0;
  detail::integrate_angle(p, frame, start, kMaxPeriodFactor * center_period(p), tol, theta,
                          [&](auto& st, double th_prev, double th) {
                            if (th < target) return true;
                            const double a_prev = frame.angle(detail::to_point(st.y_prev()));
                            auto g = [&](double t) {
                              return th_prev + detail::wrap_pi(frame.angle(detail::to_point(st.dense(t))) - a_prev) -
                                     target;
                            };
                            hit = detail::refine_root(g, st.t_prev(), st.t(), th_prev - target, th - target,
                                                      tol.event_tol);
                            return false;
                          });
  if (!hit) {
    throw OutOfCertifiedRange("period at level " + detail::fmt17(level) + " exceeds " +
                              detail::fmt17(kMaxPeriodFactor) + " center periods");
  }
  return *hit;
}

struct PeriodTable {
  std::vector<double> levels;
  std::vector<double> periods;
  double tol = 0.0;  ///< integrator relative tolerance used
};

/// Periods over an increasing level grid; a non-increasing consecutive pair
/// means the integration is not accurate enough.
inline PeriodTable monotonicity_scan(const VolterraParams& p, const std::vector<double>& levels,
                                     const Tolerances& tol = {}) {
  PeriodTable table;
  table.tol = tol.rel_tol;
  const double chi = min_energy(p);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > chi)) {
      throw LevelBelowMinimum("grid level " + detail::fmt17(levels[i]) + " is not above " + detail::fmt17(chi));
    }
    if (i > 0 && !(levels[i] > levels[i - 1])) throw InvalidParams("level grid must be strictly increasing");
  }
  for (double level : levels) {
    const double tau = period(p, level, tol);
    if (!table.periods.empty() && !(tau > table.periods.back())) {
      throw MonotonicityViolated("period " + detail::fmt17(tau) + " at level " + detail::fmt17(level) +
                                 " does not exceed " + detail::fmt17(table.periods.back()));
    }
    table.levels.push_back(level);
    table.periods.push_back(tau);
  }
  return table;
}

/// `level,period` rows in grid order.
inline void write_period_csv(std::ostream& os, const PeriodTable& t) {
  os << "level,period\n";
  for (std::size_t i = 0; i < t.levels.size(); ++i) {
    os << detail::fmt17(t.levels[i]) << ',' << detail::fmt17(t.periods[i]) << '\n';
  }
}

/// Minimal phase duration (m + 7/2) tau_in tau_out / (tau_out - tau_in) that
/// forces the inner boundary to out-turn the outer one by enough to cover m
/// symbol bands.
inline double twist_bound(int m, double tau_inner, double tau_outer) {
  if (m < 1) throw InvalidParams("symbol count must be at least 1");
  if (!(tau_inner > 0.0)) throw InvalidParams("periods must be positive");
  if (!(tau_outer > tau_inner)) {
    throw NonTwist("outer period " + detail::fmt17(tau_outer) + " does not exceed inner period " +
                   detail::fmt17(tau_inner));
  }
  return (m + 3.5) * tau_inner * tau_outer / (tau_outer - tau_inner);
}

inline long winding_floor(double duration, double tau_outer) {
  if (!(duration > 0.0) || !(tau_outer > 0.0)) throw InvalidParams("winding floor needs positive inputs");
  return static_cast<long>(std::ceil(duration / tau_outer));
}

struct TwistBounds {
  int m1 = 1;
  int m2 = 1;
  double alpha = 0.0;  ///< lower bound for r0
  double beta = 0.0;   ///< lower bound for rmu
  std::optional<long> n_star;
  std::optional<long> n_star_star;
};

/// Band family: H bands (end of the unharvested phase) sit in the upper half
/// turn, K bands (end of the harvested phase) in the lower half turn.
enum class BandVariant { H, K };

struct SymbolClass {
  enum class Kind { index, ambiguous, none };
  Kind kind = Kind::none;
  int index = -1;

  bool is_index() const { return kind == Kind::index; }
  friend bool operator==(const SymbolClass&, const SymbolClass&) = default;
};

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

inline Band symbol_band(long n, int i, BandVariant variant) {
  constexpr double pi = std::numbers::pi;
  const double base = 2.0 * pi * static_cast<double>(n) + 2.0 * pi * i;
  return variant == BandVariant::H ? Band{base, base + pi} : Band{base + pi, base + 2.0 * pi};
}

inline constexpr double kClassMargin = 1e-6;

/// Which of the m bands contains the final angle.
inline SymbolClass classify_symbol(double theta_final, long n, int m, BandVariant variant,
                                   double margin = kClassMargin) {
  for (int i = 0; i < m; ++i) {
    const Band b = symbol_band(n, i, variant);
    if (theta_final >= b.lo + margin && theta_final <= b.hi - margin) return {SymbolClass::Kind::index, i};
    if (std::abs(theta_final - b.lo) < margin || std::abs(theta_final - b.hi) < margin) {
      return {SymbolClass::Kind::ambiguous, -1};
    }
  }
  return {SymbolClass::Kind::none, -1};
}

}  // namespace lvchaos
