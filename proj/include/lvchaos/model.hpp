#pragma once

// Volterra predator-prey fields, their first integrals, and the
// piecewise-constant harvesting schedule that switches between them.

#include <array>
#include <cmath>
#include <string>

#include "lvchaos/errors.hpp"

namespace lvchaos {

/// Rates of x' = x(a - b y), y' = y(-c + d x). All strictly positive.
struct VolterraParams {
  double a = 1.0;  ///< prey growth
  double b = 1.0;  ///< predation
  double c = 1.0;  ///< predator death
  double d = 1.0;  ///< conversion

  static VolterraParams make(double a, double b, double c, double d) {
    VolterraParams p{a, b, c, d};
    p.validate();
    return p;
  }

  void validate() const {
    if (!(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0) || !std::isfinite(a + b + c + d)) {
      throw InvalidParams("rates must be finite and positive (a=" + std::to_string(a) +
                          ", b=" + std::to_string(b) + ", c=" + std::to_string(c) +
                          ", d=" + std::to_string(d) + ")");
    }
  }

  friend bool operator==(const VolterraParams&, const VolterraParams&) = default;
};

/// A point of the open first quadrant.
struct PhasePoint {
  double x = 1.0;
  double y = 1.0;

  bool in_quadrant() const { return x > 0.0 && y > 0.0; }
  friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

using Velocity = std::array<double, 2>;

inline void require_quadrant(const PhasePoint& z) {
  if (!z.in_quadrant()) {
    throw DomainError("point (" + std::to_string(z.x) + ", " + std::to_string(z.y) +
                      ") is outside the open first quadrant");
  }
}

/// Center (c/d, a/b) of the field.
inline PhasePoint equilibrium(const VolterraParams& p) { return {p.c / p.d, p.a / p.b}; }

/// The harvested field (a - mu, b, c + mu, d).
inline VolterraParams harvested(const VolterraParams& p, double mu) {
  if (!(mu > 0.0) || !(mu < p.a)) {
    throw MuOutOfRange("harvesting rate mu=" + std::to_string(mu) + " must lie in (0, a=" +
                       std::to_string(p.a) + ")");
  }
  return {p.a - mu, p.b, p.c + mu, p.d};
}

/// First integral d x - c ln x + b y - a ln y.
inline double energy(const VolterraParams& p, const PhasePoint& z) {
  require_quadrant(z);
  return p.d * z.x - p.c * std::log(z.x) + p.b * z.y - p.a * std::log(z.y);
}

inline std::array<double, 2> energy_gradient(const VolterraParams& p, const PhasePoint& z) {
  require_quadrant(z);
  return {p.d - p.c / z.x, p.b - p.a / z.y};
}

/// Strict global minimum of the energy, attained at the equilibrium.
inline double min_energy(const VolterraParams& p) { return energy(p, equilibrium(p)); }

inline Velocity vector_field(const VolterraParams& p, const PhasePoint& z) {
  require_quadrant(z);
  return {z.x * (p.a - p.b * z.y), z.y * (-p.c + p.d * z.x)};
}

/// T-periodic switching: base field on [0, r0), harvested field on [r0, T).
struct Schedule {
  VolterraParams base;
  double mu = 0.0;
  double r0 = 1.0;
  double rmu = 1.0;

  static Schedule make(const VolterraParams& base, double mu, double r0, double rmu) {
    Schedule s{base, mu, r0, rmu};
    s.validate();
    return s;
  }

  void validate() const {
    base.validate();
    (void)harvested(base, mu);
    if (!(r0 > 0.0) || !(rmu > 0.0) || !std::isfinite(r0 + rmu)) {
      throw InvalidParams("phase durations must be positive (r0=" + std::to_string(r0) +
                          ", rmu=" + std::to_string(rmu) + ")");
    }
  }

  double period() const { return r0 + rmu; }
  // mu == 0 is the degenerate no-harvest schedule; make() rejects it but the
  // flows accept it so both phases run the base field.
  VolterraParams harvested_params() const { return mu == 0.0 ? base : harvested(base, mu); }
};

/// Phase of t within one period, in [0, T).
inline double schedule_phase(const Schedule& s, double t) {
  const double T = s.period();
  double r = std::fmod(t, T);
  if (r < 0.0) r += T;
  if (r >= T) r = 0.0;
  return r;
}

inline bool harvesting_active(const Schedule& s, double t) { return schedule_phase(s, t) >= s.r0; }

inline VolterraParams coefficients_at(const Schedule& s, double t) {
  return harvesting_active(s, t) ? s.harvested_params() : s.base;
}

}  // namespace lvchaos
