#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lvchaos/geometry.hpp"
#include "oracles.hpp"

using namespace lvchaos;

namespace {

// Energy of the harvested REF field along x + y = 2, solved by plain bisection.
std::array<double, 2> harvested_abscissae(double level) {
  const oracle::Field f{0.8, 1.0, 1.2, 1.0};
  auto g = [&](double x) { return f.energy({x, 2.0 - x}) - level; };
  return {oracle::bisect(g, 1e-9, 1.2), oracle::bisect(g, 1.2, 2.0 - 1e-9)};
}

Annulus ap(double inner, double outer) { return {oracle::unit(), inner, outer}; }
Annulus aq(double mu, double inner, double outer) { return {harvested(oracle::unit(), mu), inner, outer}; }

double perimeter(const std::vector<PhasePoint>& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const PhasePoint& a = pts[i];
    const PhasePoint& b = pts[(i + 1) % pts.size()];
    s += std::hypot(b.x - a.x, b.y - a.y);
  }
  return s;
}

}  // namespace

TEST(LineR, Examples) {
  const VolterraParams p = oracle::unit();
  EXPECT_EQ(line_r_signed(p, {1, 1}), 0.0);
  EXPECT_NEAR(line_r_signed(p, {1.2, 0.8}), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(line_r_signed(p, {1, 0.5}), -0.5);
}

TEST(LineR, HarvestedCenterLiesOnR) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int i = 0; i < 200; ++i) {
    const VolterraParams p = VolterraParams::make(u(rng), u(rng), u(rng), u(rng));
    std::uniform_real_distribution<double> m(1e-6, p.a * (1 - 1e-6));
    const PhasePoint q = equilibrium(harvested(p, m(rng)));
    EXPECT_NEAR(line_r_signed(p, q), 0.0, 1e-12 * (p.a + p.c)) << i;
  }
}

TEST(LevelAbscissae, ClosedFormUnitField) {
  for (double level : {2.2, 2.5, 2.0001, 3.5}) {
    const Abscissae x = level_abscissae(oracle::unit(), level);
    const auto ref = oracle::unit_abscissae(level);
    EXPECT_NEAR(x.minus, ref[0], 1e-10) << level;
    EXPECT_NEAR(x.plus, ref[1], 1e-10) << level;
  }
  const Abscissae a = level_abscissae(oracle::unit(), 2.2);
  EXPECT_NEAR(a.minus, 0.574243, 1e-6);
  EXPECT_NEAR(a.plus, 1.425757, 1e-6);
  const Abscissae b = level_abscissae(oracle::unit(), 2.5);
  EXPECT_NEAR(b.minus, 0.372729, 1e-6);
  EXPECT_NEAR(b.plus, 1.627271, 1e-6);
}

TEST(LevelAbscissae, HarvestedMatchesBisection) {
  const Abscissae x = level_abscissae(harvested(oracle::unit(), 0.2), 2.22);
  const auto ref = harvested_abscissae(2.22);
  EXPECT_NEAR(x.minus, ref[0], 1e-10);
  EXPECT_NEAR(x.plus, ref[1], 1e-10);
  EXPECT_NEAR(x.minus, 0.6983, 1e-4);
  EXPECT_NEAR(x.plus, 1.6375, 1e-4);
}

TEST(LevelAbscissae, BelowMinimumThrows) {
  EXPECT_THROW(level_abscissae(oracle::unit(), 2.0), LevelBelowMinimum);
  EXPECT_THROW(level_abscissae(oracle::unit(), 1.5), LevelBelowMinimum);
}

TEST(LevelAbscissae, Bracketing) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.3, 2.5);
  std::uniform_real_distribution<double> dl(0.01, 2.0);
  for (int i = 0; i < 200; ++i) {
    const VolterraParams p = VolterraParams::make(u(rng), u(rng), u(rng), u(rng));
    const double level = min_energy(p) + dl(rng);
    const Abscissae x = level_abscissae(p, level);
    const double end = (p.a + p.c) / p.d;
    const double center = p.c / p.d;
    ASSERT_LT(0.0, x.minus);
    ASSERT_LT(x.minus, center);
    ASSERT_LT(center, x.plus);
    ASSERT_LT(x.plus, end);
    EXPECT_LT(energy(p, point_on_r(p, center)), level);
    if (x.minus - 1e-6 > 0.0) {
      EXPECT_GT(energy(p, point_on_r(p, x.minus - 1e-6)), level) << i;
    }
    if (x.plus + 1e-6 < end) {
      EXPECT_GT(energy(p, point_on_r(p, x.plus + 1e-6)), level) << i;
    }
  }
}

TEST(CheckLinked, ReferenceChain) {
  const LinkReport rep = check_linked(ap(2.2, 2.5), aq(0.2, 2.22, 2.34));
  ASSERT_TRUE(rep.linked) << rep.violated;
  const auto p1 = oracle::unit_abscissae(2.2);
  const auto p2 = oracle::unit_abscissae(2.5);
  const auto q1 = harvested_abscissae(2.22);
  const auto q2 = harvested_abscissae(2.34);
  const LinkChain ref{p2[0], p1[0], q2[0], q1[0], p1[1], p2[1], q1[1], q2[1]};
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(rep.abscissae[i], ref[i], 1e-6) << kChainNames[i];
  const LinkChain approx{0.3727, 0.5742, 0.6027, 0.6983, 1.4258, 1.6273, 1.6375, 1.7068};
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(rep.abscissae[i], approx[i], 1e-4) << kChainNames[i];
}

TEST(CheckLinked, ContainedAnnulusIsNotLinked) {
  const LinkReport rep = check_linked(ap(2.05, 6.0), aq(0.2, 2.0205, 2.03));
  EXPECT_FALSE(rep.linked);
  EXPECT_FALSE(rep.violated.empty());
}

TEST(CheckLinked, DegenerateMuRejected) {
  // mu = 0 is outside the harvesting range; identical centers cannot link.
  EXPECT_THROW(LinkedConfig::make(Schedule::make(oracle::unit(), 0.0, 1, 1), 2.2, 2.5, 2.2, 2.5), MuOutOfRange);
  const LinkReport rep = check_linked(ap(2.2, 2.5), Annulus{oracle::unit(), 2.2, 2.5});
  EXPECT_FALSE(rep.linked);
}

TEST(CheckLinked, MakeThrowsNotLinkedWithComparison) {
  try {
    LinkedConfig::make(Schedule::make(oracle::unit(), 0.2, 1, 1), 2.05, 6.0, 2.0205, 2.03);
    FAIL() << "expected NotLinked";
  } catch (const NotLinked& e) {
    EXPECT_NE(std::string(e.what()).find("<"), std::string::npos);
  }
}

TEST(CheckLinked, EnlargingOuterKeepsOuterOrdering) {
  for (double outer = 2.3; outer < 4.0; outer += 0.1) {
    const LinkReport rep = check_linked(ap(2.2, outer), aq(0.2, 2.22, 2.34));
    EXPECT_EQ(rep.violated.rfind("P2- < P1-", 0), std::string::npos) << outer;
  }
}

TEST(Membership, Examples) {
  const LinkedConfig cfg = oracle::ref_config();
  EXPECT_EQ(membership(cfg, {1, 1}), Region::outside);

  // Direct evaluation of the three inequalities on a grid, with a margin.
  const oracle::Field f0{1, 1, 1, 1}, fm{0.8, 1, 1.2, 1};
  int below = 0, above = 0;
  for (double x = 0.3; x < 1.8; x += 0.01) {
    for (double y = 0.3; y < 1.8; y += 0.01) {
      const double e0 = f0.energy({x, y}), em = fm.energy({x, y});
      if (!(e0 > 2.2 + 1e-3 && e0 < 2.5 - 1e-3 && em > 2.22 + 1e-3 && em < 2.34 - 1e-3)) continue;
      const double side = x + y - 2.0;
      if (std::abs(side) < 1e-6) continue;
      EXPECT_EQ(membership(cfg, {x, y}), side < 0 ? Region::R1 : Region::R2) << x << "," << y;
      (side < 0 ? below : above)++;
    }
  }
  EXPECT_GT(below, 0);
  EXPECT_GT(above, 0);
  EXPECT_EQ(membership(cfg, {1.0, 0.4}), Region::AP_only);
}

TEST(Membership, LeftSideOfR1) {
  const LinkedConfig cfg = oracle::ref_config();
  const PhasePoint z = rect_point(cfg, Rect::R1, 0.0, 0.5);
  EXPECT_NEAR(energy(cfg.base(), z), 2.2, 1e-10);
  EXPECT_LT(line_r_signed(cfg.base(), z), 0.0);
  EXPECT_EQ(membership(cfg, z), Region::R1);
}

TEST(Membership, RectanglesAreDisjoint) {
  const LinkedConfig cfg = oracle::ref_config();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  int hits = 0;
  for (int i = 0; i < 200000; ++i) {
    const PhasePoint z{u(rng), u(rng)};
    const bool r1 = in_rect(cfg, Rect::R1, z, 0.0);
    const bool r2 = in_rect(cfg, Rect::R2, z, 0.0);
    EXPECT_FALSE(r1 && r2) << z.x << "," << z.y;
    hits += r1 || r2;
  }
  EXPECT_GT(hits, 0);
}

TEST(SampleLevelCurve, PointsOnLevel) {
  for (double level : {2.2, 2.5, 3.0}) {
    for (const PhasePoint& z : sample_level_curve(oracle::unit(), level, 64)) {
      EXPECT_NEAR(energy(oracle::unit(), z), level, 1e-10);
    }
  }
  EXPECT_THROW(sample_level_curve(oracle::unit(), 1.9, 64), LevelBelowMinimum);
  EXPECT_THROW(sample_level_curve(oracle::unit(), 2.2, 8), InvalidParams);
}

TEST(SampleLevelCurve, CrossingsOfRMatchAbscissae) {
  const VolterraParams p = oracle::unit();
  const auto pts = sample_level_curve(p, 2.2, 1024);
  const auto ref = oracle::unit_abscissae(2.2);
  std::vector<double> xs;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const PhasePoint& a = pts[i];
    const PhasePoint& b = pts[(i + 1) % pts.size()];
    const double ga = line_r_signed(p, a), gb = line_r_signed(p, b);
    if (ga == 0.0) {
      xs.push_back(a.x);
    } else if ((ga < 0) != (gb < 0) && gb != 0.0) {
      const double s = ga / (ga - gb);
      xs.push_back(a.x + s * (b.x - a.x));
    }
  }
  ASSERT_EQ(xs.size(), 2u);
  std::sort(xs.begin(), xs.end());
  EXPECT_NEAR(xs[0], ref[0], 1e-6);
  EXPECT_NEAR(xs[1], ref[1], 1e-6);
}

TEST(SampleLevelCurve, PerimeterConverges) {
  const double fine = perimeter(sample_level_curve(oracle::unit(), 2.5, 1024));
  // A 16-gon inscribed in a circle already misses its perimeter by
  // 1 - sin(pi/16)/(pi/16) ~ 0.64%, so 32 points is the coarsest check at 0.5%.
  const double coarse = perimeter(sample_level_curve(oracle::unit(), 2.5, 32));
  EXPECT_LT(std::abs(coarse - fine) / fine, 0.005);
  const double n16 = perimeter(sample_level_curve(oracle::unit(), 2.5, 16));
  EXPECT_LT(n16, coarse);
  EXPECT_LT(std::abs(n16 - fine) / fine, 0.02);
}

TEST(RectChart, RoundTrip) {
  const LinkedConfig cfg = oracle::ref_config();
  for (Rect r : {Rect::R1, Rect::R2}) {
    for (double u : {0.0, 0.3, 1.0}) {
      for (double v : {0.0, 0.6, 1.0}) {
        const PhasePoint z = rect_point(cfg, r, u, v);
        const auto uv = rect_coords(cfg, z);
        EXPECT_NEAR(uv[0], u, 1e-9);
        EXPECT_NEAR(uv[1], v, 1e-9);
        EXPECT_TRUE(in_rect(cfg, r, z, 1e-9));
      }
    }
  }
}
