#pragma once

// Adaptive integration of the Volterra fields with energy-drift monitoring,
// unwrapped angles about a center, and event location on dense output.

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lvchaos/detail/dop853.hpp"
#include "lvchaos/detail/format.hpp"
#include "lvchaos/errors.hpp"
#include "lvchaos/model.hpp"

namespace lvchaos {

struct Tolerances {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double energy_budget = 1e-8;  ///< max |E(z(t)) - E(z(0))| over one run
  double event_tol = 1e-10;     ///< time localization of events

  void validate() const {
    if (!(rel_tol > 0.0 && abs_tol > 0.0 && energy_budget > 0.0 && event_tol > 0.0)) {
      throw InvalidParams("all tolerances must be strictly positive");
    }
  }

  /// Same tolerances with the step-error targets scaled by `factor`.
  Tolerances refined(double factor) const {
    Tolerances t = *this;
    t.rel_tol *= factor;
    t.abs_tol *= factor;
    return t;
  }
};

namespace detail {

struct VolterraRhs {
  VolterraParams p;
  double sign = 1.0;
  State2 operator()(double, const State2& z) const {
    return {sign * z[0] * (p.a - p.b * z[1]), sign * z[1] * (-p.c + p.d * z[0])};
  }
};

/// Reduces an angle to (-pi, pi].
inline double wrap_pi(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

inline PhasePoint to_point(const State2& s) { return {s[0], s[1]}; }
inline State2 to_state(const PhasePoint& z) { return {z.x, z.y}; }

// Refines a sign change of g on [ta, tb] (g(ta) and g(tb) of opposite sign)
// by Illinois false position, falling back to bisection.
template <class G>
double refine_root(G&& g, double ta, double tb, double ga, double gb, double tol) {
  if (ga == 0.0) return ta;
  if (gb == 0.0) return tb;
  int side = 0;
  for (int it = 0; it < 200 && (tb - ta) > tol; ++it) {
    double tm = (ta * gb - tb * ga) / (gb - ga);
    if (!(tm > ta && tm < tb) || it % 4 == 3) tm = 0.5 * (ta + tb);
    const double gm = g(tm);
    if (gm == 0.0) return tm;
    if ((gm < 0.0) == (ga < 0.0)) {
      ta = tm;
      ga = gm;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      tb = tm;
      gb = gm;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (ta + tb);
}

}  // namespace detail

struct FlowResult {
  PhasePoint z;
  double drift = 0.0;  ///< max |E(z(s)) - E(z0)| over accepted steps
  std::size_t steps = 0;
};

/// Drives the integrator from z0 over [0, t] under field p. `on_step` runs
/// after every accepted step with the stepper (dense output valid on the
/// step) and returns false to stop early; `veto` may reject a proposed step.
template <class OnStep, class Veto>
FlowResult integrate_field(const VolterraParams& p, const PhasePoint& z0, double t, const Tolerances& tol,
                           OnStep&& on_step, Veto&& veto, double sign = 1.0) {
  require_quadrant(z0);
  if (t < 0.0) throw DomainError("negative integration time");
  tol.validate();
  FlowResult res{z0, 0.0, 0};
  if (t == 0.0) return res;
  detail::StepperOptions opt;
  opt.rtol = tol.rel_tol;
  opt.atol = tol.abs_tol;
  detail::Dop853 stepper(detail::VolterraRhs{p, sign}, 0.0, detail::to_state(z0), opt);
  const double e0 = energy(p, z0);
  while (stepper.step(t, veto)) {
    const PhasePoint z = detail::to_point(stepper.y());
    if (!z.in_quadrant()) throw StepFailure("trajectory left the open quadrant");
    const double drift = std::abs(energy(p, z) - e0);
    if (drift > res.drift) res.drift = drift;
    if (res.drift > tol.energy_budget) {
      throw EnergyBudgetExceeded("energy drift " + detail::fmt17(res.drift) + " exceeds budget " +
                                 detail::fmt17(tol.energy_budget));
    }
    ++res.steps;
    if (!on_step(stepper)) break;
  }
  res.z = detail::to_point(stepper.y());
  return res;
}

/// Time-t map of the autonomous field p.
inline FlowResult flow(const VolterraParams& p, const PhasePoint& z0, double t, const Tolerances& tol = {}) {
  return integrate_field(
      p, z0, t, tol, [](auto&) { return true; }, [](const auto&, const auto&) { return true; });
}

/// Time-t map of the switched system starting at phase 0 of the schedule.
/// The stepper restarts exactly at every switch instant; drift is the max over
/// phases, each measured against the active field's energy.
inline FlowResult flow_switched(const Schedule& s, const PhasePoint& z0, double t, const Tolerances& tol = {}) {
  require_quadrant(z0);
  if (t < 0.0) throw DomainError("negative integration time");
  const double T = s.period();
  const VolterraParams pmu = s.harvested_params();
  FlowResult res{z0, 0.0, 0};
  double now = 0.0;
  long cycle = 0;
  while (now < t) {
    const double cycle_start = static_cast<double>(cycle) * T;
    const double switch_at = cycle_start + s.r0;
    const double cycle_end = static_cast<double>(cycle + 1) * T;
    if (now < switch_at) {
      const double until = std::min(t, switch_at);
      const FlowResult part = flow(s.base, res.z, until - now, tol);
      res.z = part.z;
      res.drift = std::max(res.drift, part.drift);
      res.steps += part.steps;
      now = until;
    }
    if (now >= t) break;
    const double until = std::min(t, cycle_end);
    const FlowResult part = flow(pmu, res.z, until - now, tol);
    res.z = part.z;
    res.drift = std::max(res.drift, part.drift);
    res.steps += part.steps;
    now = until;
    ++cycle;
  }
  return res;
}

/// Rotated frame about a center whose first axis runs along the line
/// b y + d x = a + c in the direction of increasing x.
struct AngularFrame {
  PhasePoint center;
  double omega = 0.0;  ///< arctan(d / b)

  static AngularFrame of(const VolterraParams& p) { return {equilibrium(p), std::atan(p.d / p.b)}; }

  std::array<double, 2> local(const PhasePoint& z) const {
    const double dx = z.x - center.x;
    const double dy = z.y - center.y;
    const double c = std::cos(omega), s = std::sin(omega);
    return {dx * c - dy * s, dx * s + dy * c};
  }

  /// Polar angle in (-pi, pi].
  double angle(const PhasePoint& z) const {
    const auto [u, v] = local(z);
    return std::atan2(v, u);
  }

  double radius(const PhasePoint& z) const {
    const auto [u, v] = local(z);
    return std::hypot(u, v);
  }
};

struct RotationTrace {
  std::vector<double> times;
  std::vector<double> theta;  ///< unwrapped, theta[0] in (-pi, pi]
  std::vector<double> rot;    ///< (theta - theta[0]) / 2 pi
};

namespace detail {

inline constexpr double kCenterRadius = 1e-12;
inline constexpr double kMaxAngleStep = std::numbers::pi / 4.0;

// Integrates with per-step unwrapping of the angle about frame.center. The
// callback receives (stepper, theta_prev, theta_now) after each step.
template <class OnStep>
FlowResult integrate_angle(const VolterraParams& p, const AngularFrame& frame, const PhasePoint& z0, double t,
                           const Tolerances& tol, double& theta, OnStep&& on_step) {
  if (frame.radius(z0) < kCenterRadius) throw CenterHit("initial point coincides with the center");
  theta = frame.angle(z0);
  auto veto = [&](const State2& a, const State2& b) {
    return std::abs(wrap_pi(frame.angle(to_point(b)) - frame.angle(to_point(a)))) <= kMaxAngleStep;
  };
  auto step = [&](auto& st) {
    const PhasePoint z = to_point(st.y());
    if (frame.radius(z) < kCenterRadius) throw CenterHit("trajectory reached the center");
    const double prev = theta;
    theta += wrap_pi(frame.angle(z) - frame.angle(to_point(st.y_prev())));
    return on_step(st, prev, theta);
  };
  return integrate_field(p, z0, t, tol, step, veto);
}

}  // namespace detail

/// Unwrapped angle about `frame.center` along the flow of p, one sample per
/// accepted step.
inline RotationTrace angular_trace(const VolterraParams& p, const AngularFrame& frame, const PhasePoint& z0,
                                   double t, const Tolerances& tol = {}) {
  RotationTrace tr;
  double theta = 0.0;
  tr.times.push_back(0.0);
  tr.theta.push_back(frame.angle(z0));
  tr.rot.push_back(0.0);
  detail::integrate_angle(p, frame, z0, t, tol, theta, [&](auto& st, double, double th) {
    tr.times.push_back(st.t());
    tr.theta.push_back(th);
    tr.rot.push_back((th - tr.theta.front()) / (2.0 * std::numbers::pi));
    return true;
  });
  return tr;
}

struct AngleResult {
  PhasePoint z;        ///< final point
  double theta0 = 0.0; ///< initial angle in (-pi, pi]
  double theta = 0.0;  ///< final unwrapped angle
  double drift = 0.0;
};

/// Final point and unwrapped final angle after time t.
inline AngleResult advance_angle(const VolterraParams& p, const AngularFrame& frame, const PhasePoint& z0, double t,
                                 const Tolerances& tol = {}) {
  double theta = 0.0;
  const FlowResult r = detail::integrate_angle(p, frame, z0, t, tol, theta, [](auto&, double, double) {
    return true;
  });
  return {r.z, frame.angle(z0), theta, r.drift};
}

enum class Crossing { any, rising, falling };

/// First time in (0, window] at which predicate(z(t)) changes sign in the
/// requested direction, localized to tol.event_tol on the dense output.
/// Sign changes are detected at step ends and at `subsamples` interior dense
/// points per step.
inline double locate_event(const VolterraParams& p, const PhasePoint& z0,
                           const std::function<double(const PhasePoint&)>& predicate, double window,
                           const Tolerances& tol = {}, Crossing dir = Crossing::any, int subsamples = 4) {
  std::optional<double> hit;
  double g_prev = predicate(z0);
  auto matches = [&](double ga, double gb) {
    switch (dir) {
      case Crossing::rising: return ga < 0.0 && gb >= 0.0;
      case Crossing::falling: return ga > 0.0 && gb <= 0.0;
      default: return (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0);
    }
  };
  integrate_field(
      p, z0, window, tol,
      [&](auto& st) {
        const double t0 = st.t_prev(), t1 = st.t();
        double ta = t0, ga = g_prev;
        for (int k = 1; k <= subsamples + 1; ++k) {
          const double tb = (k == subsamples + 1) ? t1 : t0 + (t1 - t0) * k / (subsamples + 1);
          const double gb = predicate(detail::to_point(k == subsamples + 1 ? st.y() : st.dense(tb)));
          if (matches(ga, gb)) {
            auto g = [&](double tt) { return predicate(detail::to_point(st.dense(tt))); };
            hit = detail::refine_root(g, ta, tb, ga, gb, tol.event_tol);
            return false;
          }
          ta = tb;
          ga = gb;
        }
        g_prev = ga;
        return true;
      },
      [](const auto&, const auto&) { return true; });
  if (!hit) throw NoSignChange("predicate keeps its sign over the window");
  return *hit;
}

struct TrajectoryRow {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double energy = 0.0;
  std::optional<double> theta;
};

/// One row per accepted step (plus the initial point); theta is filled when a
/// frame is supplied.
inline std::vector<TrajectoryRow> sample_trajectory(const VolterraParams& p, const PhasePoint& z0, double t,
                                                    const Tolerances& tol = {},
                                                    const std::optional<AngularFrame>& frame = std::nullopt) {
  std::vector<TrajectoryRow> rows;
  if (frame) {
    double theta = 0.0;
    rows.push_back({0.0, z0.x, z0.y, energy(p, z0), frame->angle(z0)});
    detail::integrate_angle(p, *frame, z0, t, tol, theta, [&](auto& st, double, double th) {
      const PhasePoint z = detail::to_point(st.y());
      rows.push_back({st.t(), z.x, z.y, energy(p, z), th});
      return true;
    });
    return rows;
  }
  rows.push_back({0.0, z0.x, z0.y, energy(p, z0), std::nullopt});
  integrate_field(
      p, z0, t, tol,
      [&](auto& st) {
        const PhasePoint z = detail::to_point(st.y());
        rows.push_back({st.t(), z.x, z.y, energy(p, z), std::nullopt});
        return true;
      },
      [](const auto&, const auto&) { return true; });
  return rows;
}

namespace detail {

inline constexpr std::array<double, 5> kGaussNodes{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                                   0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                                     0.2369268850561891, 0.2369268850561891};

}  // namespace detail

/// Time average of (x, y) over [0, t]: five-point Gauss-Legendre on the dense
/// output of every accepted step.
inline PhasePoint time_average(const VolterraParams& p, const PhasePoint& z0, double t, const Tolerances& tol = {}) {
  if (!(t > 0.0)) throw DomainError("time average needs a positive window");
  const auto& node = detail::kGaussNodes;
  const auto& weight = detail::kGaussWeights;
  double sx = 0.0, sy = 0.0;
  integrate_field(
      p, z0, t, tol,
      [&](auto& st) {
        const double a = st.t_prev(), b = st.t();
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t i = 0; i < node.size(); ++i) {
          const auto y = st.dense(mid + half * node[i]);
          sx += half * weight[i] * y[0];
          sy += half * weight[i] * y[1];
        }
        return true;
      },
      [](const auto&, const auto&) { return true; });
  return {sx / t, sy / t};
}

/// CSV with header `t,x,y,energy[,theta]`, LF line endings, 17 significant digits.
inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  const bool with_theta = !rows.empty() && rows.front().theta.has_value();
  os << (with_theta ? "t,x,y,energy,theta\n" : "t,x,y,energy\n");
  for (const auto& r : rows) {
    os << detail::fmt17(r.t) << ',' << detail::fmt17(r.x) << ',' << detail::fmt17(r.y) << ','
       << detail::fmt17(r.energy);
    if (with_theta) os << ',' << detail::fmt17(r.theta.value_or(0.0));
    os << '\n';
  }
}

}  // namespace lvchaos
