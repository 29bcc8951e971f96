#pragma once

// Switched Poincare map, symbol itineraries, periodic-orbit realization of
// symbol words, crossing counts, the shift metric and the entropy floor.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lvchaos/detail/format.hpp"
#include "lvchaos/detail/parallel.hpp"
#include "lvchaos/errors.hpp"
#include "lvchaos/geometry.hpp"
#include "lvchaos/integrate.hpp"
#include "lvchaos/model.hpp"
#include "lvchaos/sap.hpp"
#include "lvchaos/twist.hpp"

namespace lvchaos {

/// One letter: (p, q) with p < m1 the phase-0 band, q < m2 the phase-mu band.
struct Letter {
  int p = 0;
  int q = 0;
  friend auto operator<=>(const Letter&, const Letter&) = default;
};

struct SymbolWord {
  std::vector<Letter> letters;
  bool periodic = true;

  std::size_t size() const { return letters.size(); }
  friend bool operator==(const SymbolWord&, const SymbolWord&) = default;
};

/// "p0q0|p1q1|..." with one decimal digit per symbol.
inline std::string to_string(const SymbolWord& w) {
  std::string s;
  for (std::size_t i = 0; i < w.letters.size(); ++i) {
    if (i) s += '|';
    s += std::to_string(w.letters[i].p);
    s += std::to_string(w.letters[i].q);
  }
  return s;
}

/// Parses "p0q0|p1q1|..." and checks the letters against the alphabet.
inline SymbolWord parse_word(const std::string& text, int m1, int m2) {
  SymbolWord w;
  std::size_t pos = 0;
  while (true) {
    const std::size_t bar = text.find('|', pos);
    const std::string tok = text.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos);
    if (tok.size() != 2 || !std::isdigit(static_cast<unsigned char>(tok[0])) ||
        !std::isdigit(static_cast<unsigned char>(tok[1]))) {
      throw ConfigError("malformed word letter '" + tok + "' (expected two digits pq)");
    }
    const Letter l{tok[0] - '0', tok[1] - '0'};
    if (l.p >= m1 || l.q >= m2) {
      throw ConfigError("letter '" + tok + "' is outside the alphabet m1=" + std::to_string(m1) +
                        ", m2=" + std::to_string(m2));
    }
    w.letters.push_back(l);
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  return w;
}

/// Every word of length L over {0..m1-1} x {0..m2-1}, lexicographic.
inline std::vector<SymbolWord> all_words(int m1, int m2, int length) {
  std::vector<SymbolWord> out;
  if (length <= 0) return out;
  const int base = m1 * m2;
  long total = 1;
  for (int i = 0; i < length; ++i) total *= base;
  for (long code = 0; code < total; ++code) {
    SymbolWord w;
    long c = code;
    std::vector<Letter> rev;
    for (int i = 0; i < length; ++i) {
      const int s = static_cast<int>(c % base);
      c /= base;
      rev.push_back({s / m2, s % m2});
    }
    w.letters.assign(rev.rbegin(), rev.rend());
    out.push_back(std::move(w));
  }
  return out;
}

inline bool rotation_equivalent(const SymbolWord& a, const SymbolWord& b) {
  if (a.size() != b.size()) return false;
  const std::size_t k = a.size();
  for (std::size_t s = 0; s < k; ++s) {
    bool eq = true;
    for (std::size_t i = 0; i < k && eq; ++i) eq = a.letters[i] == b.letters[(i + s) % k];
    if (eq) return true;
  }
  return k == 0;
}

// ---------------------------------------------------------------------------
// Shift metric and entropy floor

/// d(s', s'') = sum over |i| <= W of |s'_i - s''_i| / m^(|i|+1). Both inputs
/// are two-sided windows of length 2W+1 with index 0 in the middle.
inline double shift_distance(const std::vector<int>& a, const std::vector<int>& b, int m) {
  if (a.size() != b.size() || a.size() % 2 == 0) {
    throw InvalidParams("shift_distance needs two windows of equal odd length");
  }
  if (m < 1) throw InvalidParams("alphabet size must be at least 1");
  const long w = static_cast<long>(a.size() / 2);
  double sum = 0.0;
  for (long i = -w; i <= w; ++i) {
    const std::size_t k = static_cast<std::size_t>(i + w);
    const double diff = std::abs(static_cast<double>(a[k] - b[k]));
    if (diff != 0.0) sum += diff / std::pow(static_cast<double>(m), static_cast<double>(std::abs(i) + 1));
  }
  return sum;
}

/// Periodic extension of a finite word to indices -window..window, encoded on
/// the product alphabet as p * m2 + q.
inline std::vector<int> periodic_window(const SymbolWord& w, int m2, int window) {
  if (w.letters.empty()) throw InvalidParams("cannot extend an empty word");
  const long k = static_cast<long>(w.size());
  std::vector<int> out;
  for (long i = -window; i <= window; ++i) {
    const Letter& l = w.letters[static_cast<std::size_t>(((i % k) + k) % k)];
    out.push_back(l.p * m2 + l.q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Context: a linked configuration with its winding floors and band seeds

/// Everything needed to read symbols off trajectories of one configuration.
struct SymbolicContext {
  LinkedConfig cfg;
  int m1 = 1;
  int m2 = 1;
  long n_star = 0;
  long n_star_star = 0;
  Tolerances tol;

  static SymbolicContext make(const LinkedConfig& cfg, int m1, int m2, const Tolerances& tol = {}) {
    if (m1 < 1 || m2 < 1) throw InvalidParams("symbol counts must be at least 1");
    SymbolicContext ctx{cfg, m1, m2, 0, 0, tol};
    ctx.n_star = winding_floor(cfg.schedule.r0, period(cfg.base(), cfg.ell2(), tol));
    ctx.n_star_star = winding_floor(cfg.schedule.rmu, period(cfg.harvested(), cfg.h2(), tol));
    return ctx;
  }

  SymbolicContext with_tol(const Tolerances& t) const {
    SymbolicContext c = *this;
    c.tol = t;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Poincare map

inline PhasePoint phi0(const LinkedConfig& cfg, const PhasePoint& z, const Tolerances& tol = {}) {
  return flow(cfg.base(), z, cfg.schedule.r0, tol).z;
}

inline PhasePoint phimu(const LinkedConfig& cfg, const PhasePoint& z, const Tolerances& tol = {}) {
  return flow(cfg.harvested(), z, cfg.schedule.rmu, tol).z;
}

/// One period of the switched system: phimu after phi0.
inline PhasePoint poincare(const LinkedConfig& cfg, const PhasePoint& z, const Tolerances& tol = {}) {
  return flow_switched(cfg.schedule, z, cfg.schedule.period(), tol).z;
}

// ---------------------------------------------------------------------------
// Itineraries

struct Itinerary {
  SymbolWord word;
  bool ambiguous = false;    ///< some letter fell within the margin of a band edge
  bool left_rects = false;   ///< some sampling instant was outside the expected rectangle
  std::vector<PhasePoint> points;  ///< z, then the point after each phase

  bool clean() const { return !ambiguous && !left_rects; }
};

namespace detail {

// Letter index from a classification; ambiguous/none give -1.
inline int letter_of(const SymbolClass& c) { return c.is_index() ? c.index : -1; }

}  // namespace detail

/// Reads k letters along the orbit of z: p_i from the final angle of phase 0
/// in the H bands, q_i from the final angle of phase mu in the K bands.
inline Itinerary itinerary(const SymbolicContext& ctx, const PhasePoint& z, int k,
                           double eps = 1e-9) {
  Itinerary it;
  it.word.periodic = false;
  it.points.push_back(z);
  const AngularFrame f0 = AngularFrame::of(ctx.cfg.base());
  const AngularFrame fmu = AngularFrame::of(ctx.cfg.harvested());
  PhasePoint cur = z;
  if (k > 0 && !in_rect(ctx.cfg, Rect::R1, cur, eps)) it.left_rects = true;
  for (int i = 0; i < k; ++i) {
    const AngleResult a = advance_angle(ctx.cfg.base(), f0, cur, ctx.cfg.schedule.r0, ctx.tol);
    const SymbolClass cp = classify_symbol(a.theta, ctx.n_star, ctx.m1, BandVariant::H);
    cur = a.z;
    it.points.push_back(cur);
    if (membership(ctx.cfg, cur, eps) == Region::outside) {
      throw LeftDomain("iterate left both annuli after phase 0 of cycle " + std::to_string(i));
    }
    if (!in_rect(ctx.cfg, Rect::R2, cur, eps)) it.left_rects = true;
    const AngleResult b = advance_angle(ctx.cfg.harvested(), fmu, cur, ctx.cfg.schedule.rmu, ctx.tol);
    const SymbolClass cq = classify_symbol(b.theta, ctx.n_star_star, ctx.m2, BandVariant::K);
    cur = b.z;
    it.points.push_back(cur);
    if (membership(ctx.cfg, cur, eps) == Region::outside) {
      throw LeftDomain("iterate left both annuli after phase mu of cycle " + std::to_string(i));
    }
    if (!in_rect(ctx.cfg, Rect::R1, cur, eps)) it.left_rects = true;
    if (!cp.is_index() || !cq.is_index()) it.ambiguous = true;
    it.word.letters.push_back({detail::letter_of(cp), detail::letter_of(cq)});
  }
  return it;
}

// ---------------------------------------------------------------------------
// Crossing counts

struct CrossingCounts {
  int count2 = 0;  ///< side-to-side crossings of R2 during phase 0
  int count1 = 0;  ///< side-to-side crossings of R1 during phase mu
};

namespace detail {

// Counts maximal time intervals during which the trajectory of `field` from z
// over `duration` stays inside `rect`, entered through one side level and
// left through the other. The side-defining energy is sampled on the dense
// output, with subdivision until consecutive samples differ by at most a
// quarter of the side band, and the level crossings are then located by
// root refinement.
inline int count_crossings(const LinkedConfig& cfg, const VolterraParams& field, Rect rect, const PhasePoint& z,
                           double duration, const Tolerances& tol) {
  const auto [lo, hi] = side_levels(cfg, rect);
  const double quarter = 0.25 * (hi - lo);
  auto state = [&](const PhasePoint& p) {
    const double e = side_energy(cfg, rect, p);
    return e < lo ? -1 : (e > hi ? 1 : 0);
  };
  auto on_side = [&](const PhasePoint& p) {
    const double s = line_r_signed(cfg.base(), p);
    return rect == Rect::R1 ? s <= 0.0 : s >= 0.0;
  };
  int count = 0;
  int prev_state = state(z);
  std::optional<int> entered_from;  // outside state before the current in-band run
  bool run_in_rect = false;
  auto visit = [&](const PhasePoint& p) {
    const int s = state(p);
    if (s == 0 && prev_state != 0) {
      entered_from = prev_state;
      run_in_rect = on_side(p);
    } else if (s != 0 && prev_state == 0) {
      if (entered_from && *entered_from == -s && run_in_rect) ++count;
      entered_from.reset();
    }
    prev_state = s;
  };
  integrate_field(
      field, z, duration, tol,
      [&](auto& st) {
        // Subdivide the step so no level band can be skipped.
        std::vector<std::pair<double, PhasePoint>> pts{{st.t_prev(), to_point(st.y_prev())},
                                                      {st.t(), to_point(st.y())}};
        std::size_t i = 0;
        while (i + 1 < pts.size()) {
          const double ea = side_energy(cfg, rect, pts[i].second);
          const double eb = side_energy(cfg, rect, pts[i + 1].second);
          if (std::abs(eb - ea) > quarter && pts[i + 1].first - pts[i].first > 1e-12) {
            const double tm = 0.5 * (pts[i].first + pts[i + 1].first);
            pts.insert(pts.begin() + static_cast<long>(i) + 1, {tm, to_point(st.dense(tm))});
            continue;
          }
          ++i;
        }
        for (std::size_t j = 1; j < pts.size(); ++j) visit(pts[j].second);
        return true;
      },
      [](const auto&, const auto&) { return true; });
  return count;
}

}  // namespace detail

/// Crossings during cycle i of the orbit of z: R2 crossings while phase 0 is
/// active, R1 crossings while phase mu is active.
inline CrossingCounts crossing_count(const LinkedConfig& cfg, const PhasePoint& z, int cycle,
                                     const Tolerances& tol = {}) {
  if (cycle < 0) throw InvalidParams("cycle index must be non-negative");
  PhasePoint cur = z;
  for (int i = 0; i < cycle; ++i) cur = poincare(cfg, cur, tol);
  CrossingCounts c;
  c.count2 = detail::count_crossings(cfg, cfg.base(), Rect::R2, cur, cfg.schedule.r0, tol);
  const PhasePoint mid = phi0(cfg, cur, tol);
  c.count1 = detail::count_crossings(cfg, cfg.harvested(), Rect::R1, mid, cfg.schedule.rmu, tol);
  return c;
}

// ---------------------------------------------------------------------------
// Periodic orbits

struct PeriodicOrbit {
  PhasePoint anchor;
  SymbolWord word;
  double residual = 0.0;              ///< max_i |S(phi(w_i)) - S(w_{i+1})|, scaled coordinates
  std::vector<PhasePoint> samples;    ///< w_0 .. w_{k-1}, w_0 = anchor
  std::vector<PhasePoint> mid;        ///< phi0(w_i), the points in R2
  int newton_iterations = 0;
  int seeds_tried = 0;
};

struct FindOptions {
  double fd_step = 1e-7;        ///< finite-difference step in scaled coordinates
  double target = 1e-9;         ///< residual goal
  double accept = 1e-8;         ///< residual ceiling for a returned orbit
  int max_iterations = 40;
  int seed_grid = 1;            ///< seed levels per band; 1 = band midpoints only
};

namespace detail {

// Chart coordinates of a point known to be in rectangle r.
inline std::array<double, 2> uv(const LinkedConfig& cfg, const PhasePoint& z) { return rect_coords(cfg, z); }

// Parameter on `path` whose image under the phase map has side energy at
// `level`, inside band `band`; bracketing comes from the witness interval.
inline double band_seed(const LinkedConfig& cfg, const AnnotatedPath& ap, const StretchWitness& w, double frac) {
  const auto [lo, hi] = side_levels(cfg, ap.map.target);
  const double level = lo + frac * (hi - lo);
  auto g = [&](double s) {
    const AnnotatedSample x = evaluate_sample(cfg, ap.map, ap.path, s, ap.tol);
    return side_energy(cfg, ap.map.target, x.image) - level;
  };
  return bisect(g, w.t_star, w.t_star_star);
}

}  // namespace detail

/// Per-band seed values: U[p][j] is the base-energy coordinate u on the R1
/// midline whose phase-0 image lands in band p at harvested coordinate
/// (j+0.5)/g; V[q][j] likewise for phase mu on the R2 midline.
struct BandSeeds {
  std::vector<std::vector<double>> U;
  std::vector<std::vector<double>> V;
};

inline BandSeeds band_seeds(const SymbolicContext& ctx, int grid = 1, const SapOptions& opt = {}) {
  if (grid < 1) throw InvalidParams("seed grid must be at least 1");
  BandSeeds seeds;
  for (Phase ph : {Phase::zero, Phase::mu}) {
    const PhaseMap map = phase_map(ctx.cfg, ph);
    const int m = ph == Phase::zero ? ctx.m1 : ctx.m2;
    const long n = ph == Phase::zero ? ctx.n_star : ctx.n_star_star;
    const AnnotatedPath ap = push_path(ctx.cfg, map, radial_path(ctx.cfg, map.source), ctx.tol, opt);
    const std::vector<StretchWitness> ws = find_witnesses(ctx.cfg, ap, m, n, opt);
    auto& dst = ph == Phase::zero ? seeds.U : seeds.V;
    dst.assign(static_cast<std::size_t>(m), {});
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < grid; ++j) {
        dst[static_cast<std::size_t>(i)].push_back(
            detail::band_seed(ctx.cfg, ap, ws[static_cast<std::size_t>(i)], (j + 0.5) / grid));
      }
    }
  }
  return seeds;
}

namespace detail {

// Multiple shooting on the chart coordinates. Unknowns per cycle i are
// (u_i, v_i) in the R1 chart and (u'_i, v'_i) in the R2 chart; the equations
// are S(phi0(C1(u_i, v_i))) = (u'_i, v'_i) and S(phimu(C2(u'_i, v'_i))) =
// (u_{i+1}, v_{i+1}), indices mod k.
class Shooting {
 public:
  Shooting(const SymbolicContext& ctx, std::size_t k) : ctx_(ctx), k_(k) {}

  std::size_t size() const { return 4 * k_; }

  // Block b in [0, 2k): even = phase 0 leg of cycle b/2, odd = phase mu leg.
  std::array<double, 2> leg(const Eigen::VectorXd& x, std::size_t b) const {
    const std::size_t i = b / 2;
    if (b % 2 == 0) {
      const PhasePoint z = rect_point(ctx_.cfg, Rect::R1, x[4 * i], x[4 * i + 1]);
      return uv(ctx_.cfg, phi0(ctx_.cfg, z, ctx_.tol));
    }
    const PhasePoint z = rect_point(ctx_.cfg, Rect::R2, x[4 * i + 2], x[4 * i + 3]);
    return uv(ctx_.cfg, phimu(ctx_.cfg, z, ctx_.tol));
  }

  // Index of the unknown pair a leg lands on.
  std::size_t target(std::size_t b) const {
    const std::size_t i = b / 2;
    return b % 2 == 0 ? 4 * i + 2 : 4 * ((i + 1) % k_);
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& x, std::vector<std::array<double, 2>>* legs = nullptr) const {
    Eigen::VectorXd f(size());
    std::vector<std::array<double, 2>> out(2 * k_);
    for (std::size_t b = 0; b < 2 * k_; ++b) {
      out[b] = leg(x, b);
      const std::size_t t = target(b);
      f[2 * b] = out[b][0] - x[t];
      f[2 * b + 1] = out[b][1] - x[t + 1];
    }
    if (legs) *legs = std::move(out);
    return f;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const std::vector<std::array<double, 2>>& legs,
                           double h) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<long>(size()), static_cast<long>(size()));
    for (std::size_t b = 0; b < 2 * k_; ++b) {
      const std::size_t t = target(b);
      J(static_cast<long>(2 * b), static_cast<long>(t)) = -1.0;
      J(static_cast<long>(2 * b + 1), static_cast<long>(t + 1)) = -1.0;
      const std::size_t src = b % 2 == 0 ? 4 * (b / 2) : 4 * (b / 2) + 2;
      for (std::size_t c = 0; c < 2; ++c) {
        Eigen::VectorXd xp = x;
        xp[static_cast<long>(src + c)] += h;
        const std::array<double, 2> lp = leg(xp, b);
        J(static_cast<long>(2 * b), static_cast<long>(src + c)) += (lp[0] - legs[b][0]) / h;
        J(static_cast<long>(2 * b + 1), static_cast<long>(src + c)) += (lp[1] - legs[b][1]) / h;
      }
    }
    return J;
  }

 private:
  const SymbolicContext& ctx_;
  std::size_t k_;
};

struct NewtonOutcome {
  Eigen::VectorXd x;
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline NewtonOutcome damped_newton(const Shooting& sh, Eigen::VectorXd x, const FindOptions& opt) {
  NewtonOutcome out;
  std::vector<std::array<double, 2>> legs;
  Eigen::VectorXd f = sh.residual(x, &legs);
  double norm = f.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it;
    if (norm <= 0.01 * opt.target) break;
    const Eigen::MatrixXd J = sh.jacobian(x, legs, opt.fd_step);
    const Eigen::VectorXd dx = J.fullPivLu().solve(-f);
    if (!dx.allFinite()) break;
    bool improved = false;
    for (double lambda = 1.0; lambda >= 1.0 / 1024.0; lambda *= 0.5) {
      const Eigen::VectorXd xn = x + lambda * dx;
      try {
        std::vector<std::array<double, 2>> ln;
        const Eigen::VectorXd fn = sh.residual(xn, &ln);
        const double nn = fn.lpNorm<Eigen::Infinity>();
        if (nn < norm) {
          x = xn;
          f = fn;
          legs = std::move(ln);
          improved = norm - nn > 0.0;
          norm = nn;
          break;
        }
      } catch (const error&) {
        // Chart or flow failure: shorten the step.
      }
    }
    if (!improved) break;
  }
  out.x = std::move(x);
  out.norm = norm;
  out.converged = norm <= opt.target;
  return out;
}

inline double point_distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

}  // namespace detail

/// Residual of a candidate orbit: max_i |S(phi(w_i)) - S(w_{i+1})|.
inline double orbit_residual(const LinkedConfig& cfg, const std::vector<PhasePoint>& w, const Tolerances& tol) {
  double r = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto img = detail::uv(cfg, poincare(cfg, w[i], tol));
    r = std::max(r, detail::point_distance(img, detail::uv(cfg, w[(i + 1) % w.size()])));
  }
  return r;
}

/// Checks the word one cycle at a time from each orbit point: w_i must read
/// letter i cleanly. Amplification over k cycles would otherwise swamp the
/// integration error for k >= 2.
inline bool word_matches(const SymbolicContext& ctx, const std::vector<PhasePoint>& w, const SymbolWord& word) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Itinerary it = itinerary(ctx, w[i], 1);
    if (!it.clean() || it.word.letters.front() != word.letters[i]) return false;
  }
  return true;
}

/// Periodic orbit of the Poincare map realizing the periodic word. Seeds come
/// from the band crossings of the midline paths; each seed is refined by
/// damped multiple-shooting Newton and accepted only if the residual is below
/// opt.accept and the word reads back at tol and tol/10.
inline PeriodicOrbit find_periodic(const SymbolicContext& ctx, const SymbolWord& word, const BandSeeds& seeds,
                                   const FindOptions& opt = {}) {
  const std::size_t k = word.size();
  if (k == 0) throw InvalidParams("cannot realize an empty word");
  for (const Letter& l : word.letters) {
    if (l.p < 0 || l.p >= ctx.m1 || l.q < 0 || l.q >= ctx.m2) throw InvalidParams("letter outside the alphabet");
  }
  const detail::Shooting sh(ctx, k);
  const std::size_t g = seeds.U.empty() ? 0 : seeds.U.front().size();
  bool drifted = false;
  int tried = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      ++tried;
      Eigen::VectorXd x(static_cast<long>(4 * k));
      for (std::size_t i = 0; i < k; ++i) {
        const Letter& cur = word.letters[i];
        const Letter& prev = word.letters[(i + k - 1) % k];
        const double u = seeds.U[static_cast<std::size_t>(cur.p)][a];
        x[static_cast<long>(4 * i)] = u;
        x[static_cast<long>(4 * i + 1)] = seeds.V[static_cast<std::size_t>(prev.q)][b];
        x[static_cast<long>(4 * i + 2)] = u;
        x[static_cast<long>(4 * i + 3)] = seeds.V[static_cast<std::size_t>(cur.q)][b];
      }
      detail::NewtonOutcome nr;
      try {
        nr = detail::damped_newton(sh, x, opt);
      } catch (const error&) {
        continue;
      }
      best = std::min(best, nr.norm);
      if (!nr.converged) continue;
      PeriodicOrbit orb;
      orb.word = word;
      orb.word.periodic = true;
      try {
        for (std::size_t i = 0; i < k; ++i) {
          orb.samples.push_back(rect_point(ctx.cfg, Rect::R1, nr.x[static_cast<long>(4 * i)],
                                           nr.x[static_cast<long>(4 * i + 1)]));
          orb.mid.push_back(rect_point(ctx.cfg, Rect::R2, nr.x[static_cast<long>(4 * i + 2)],
                                       nr.x[static_cast<long>(4 * i + 3)]));
        }
        orb.anchor = orb.samples.front();
        orb.residual = orbit_residual(ctx.cfg, orb.samples, ctx.tol);
        if (!(orb.residual <= opt.accept)) continue;
        if (!word_matches(ctx, orb.samples, word) || !word_matches(ctx.with_tol(ctx.tol.refined(0.1)), orb.samples, word)) {
          drifted = true;
          continue;
        }
      } catch (const error&) {
        drifted = true;
        continue;
      }
      orb.newton_iterations = nr.iterations;
      orb.seeds_tried = tried;
      return orb;
    }
  }
  if (drifted) throw ItineraryDrift("converged orbit for word " + to_string(word) + " reads a different word");
  throw NotFound("no periodic orbit for word " + to_string(word) + " after " + std::to_string(tried) +
                 " seeds (best residual " + detail::fmt17(best) + ")");
}

inline PeriodicOrbit find_periodic(const SymbolicContext& ctx, const SymbolWord& word, const FindOptions& opt = {}) {
  return find_periodic(ctx, word, band_seeds(ctx, opt.seed_grid), opt);
}

/// Smallest max-distance between the scaled orbit points over all cyclic
/// alignments.
inline double orbit_separation(const LinkedConfig& cfg, const PeriodicOrbit& a, const PeriodicOrbit& b) {
  if (a.samples.size() != b.samples.size() || a.samples.empty()) return std::numeric_limits<double>::infinity();
  const std::size_t k = a.samples.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < k; ++s) {
    double d = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      d = std::max(d, detail::point_distance(detail::uv(cfg, a.samples[i]), detail::uv(cfg, b.samples[(i + s) % k])));
    }
    best = std::min(best, d);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Realization report

struct RealizationEntry {
  SymbolWord word;
  std::optional<PeriodicOrbit> orbit;
  std::optional<CrossingCounts> crossings;  ///< cycle 0 from the anchor
  std::string error;
};

struct RealizationReport {
  int length = 0;
  std::vector<RealizationEntry> entries;  ///< lexicographic word order
  std::size_t realized = 0;
  double min_separation = std::numeric_limits<double>::infinity();  ///< over non-equivalent pairs
  std::optional<int> kappa1;  ///< min over realized orbits of count2 - p_0
  std::optional<int> kappa2;  ///< min over realized orbits of count1 - q_0
};

inline RealizationReport realize_words(const SymbolicContext& ctx, int length, const FindOptions& opt = {},
                                       int threads = 1) {
  RealizationReport rep;
  rep.length = length;
  if (length < 1) throw InvalidParams("word length must be at least 1");
  const BandSeeds seeds = band_seeds(ctx, opt.seed_grid);
  const std::vector<SymbolWord> words = all_words(ctx.m1, ctx.m2, length);
  rep.entries.resize(words.size());
  detail::parallel_for(words.size(), threads, [&](std::size_t i) {
    RealizationEntry& e = rep.entries[i];
    e.word = words[i];
    try {
      e.orbit = find_periodic(ctx, words[i], seeds, opt);
      e.crossings = crossing_count(ctx.cfg, e.orbit->anchor, 0, ctx.tol);
    } catch (const error& err) {
      e.error = err.what();
    }
  });
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    const RealizationEntry& e = rep.entries[i];
    if (!e.orbit) continue;
    ++rep.realized;
    const int k1 = e.crossings->count2 - e.word.letters.front().p;
    const int k2 = e.crossings->count1 - e.word.letters.front().q;
    rep.kappa1 = rep.kappa1 ? std::min(*rep.kappa1, k1) : k1;
    rep.kappa2 = rep.kappa2 ? std::min(*rep.kappa2, k2) : k2;
    for (std::size_t j = i + 1; j < rep.entries.size(); ++j) {
      const RealizationEntry& f = rep.entries[j];
      if (!f.orbit || rotation_equivalent(e.word, f.word)) continue;
      rep.min_separation = std::min(rep.min_separation, orbit_separation(ctx.cfg, *e.orbit, *f.orbit));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Orbit export

/// `cycle,phase,t,x,y` rows for each cycle of the orbit, integrated leg by leg
/// from the shooting points; phase is 0 or mu.
inline void write_orbit_csv(std::ostream& os, const LinkedConfig& cfg, const PeriodicOrbit& orb,
                            const Tolerances& tol = {}) {
  os << "cycle,phase,t,x,y\n";
  const double T = cfg.schedule.period();
  for (std::size_t i = 0; i < orb.samples.size(); ++i) {
    const double t0 = static_cast<double>(i) * T;
    const PhasePoint start_mu = orb.mid.size() == orb.samples.size() ? orb.mid[i] : phi0(cfg, orb.samples[i], tol);
    for (int leg = 0; leg < 2; ++leg) {
      const auto rows = leg == 0 ? sample_trajectory(cfg.base(), orb.samples[i], cfg.schedule.r0, tol)
                                 : sample_trajectory(cfg.harvested(), start_mu, cfg.schedule.rmu, tol);
      const double off = leg == 0 ? t0 : t0 + cfg.schedule.r0;
      for (const auto& r : rows) {
        os << i << ',' << (leg == 0 ? "0" : "mu") << ',' << detail::fmt17(off + r.t) << ',' << detail::fmt17(r.x)
           << ',' << detail::fmt17(r.y) << '\n';
      }
    }
  }
}

}  // namespace lvchaos
