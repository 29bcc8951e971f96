#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "lvchaos/twist.hpp"
#include "oracles.hpp"

using namespace lvchaos;

namespace {

constexpr double kPi = std::numbers::pi;

const VolterraParams kHarv = VolterraParams::make(0.8, 1, 1.2, 1);

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

}  // namespace

TEST(CenterPeriod, Examples) {
  EXPECT_DOUBLE_EQ(center_period(oracle::unit()), 2 * kPi);
  EXPECT_DOUBLE_EQ(center_period(kHarv), 2 * kPi / std::sqrt(0.96));
  EXPECT_DOUBLE_EQ(center_period(VolterraParams::make(4, 1, 1, 1)), kPi);
}

TEST(Period, CenterLimits) {
  EXPECT_NEAR(period(oracle::unit(), 2 + 1e-6), 2 * kPi, 1e-3);
  EXPECT_NEAR(period(kHarv, min_energy(kHarv) + 1e-6), 2 * kPi / std::sqrt(0.96), 1e-3);
  EXPECT_NEAR(2 * kPi / std::sqrt(0.96), 6.41275, 1e-5);
}

TEST(Period, MatchesRk4ReturnTime) {
  const oracle::Field unit{1, 1, 1, 1}, harv{0.8, 1, 1.2, 1};
  for (double level : {2.2, 2.5, 3.0}) {
    const auto x = oracle::unit_abscissae(level);
    EXPECT_NEAR(period(oracle::unit(), level), oracle::return_time(unit, {x[1], 2.0 - x[1]}), 1e-8) << level;
  }
  for (double level : {2.22, 2.34}) {
    const Abscissae x = level_abscissae(kHarv, level);
    EXPECT_NEAR(period(kHarv, level), oracle::return_time(harv, {x.plus, 2.0 - x.plus}), 1e-8) << level;
  }
}

TEST(Period, OrderingAndErrors) {
  const double t22 = period(oracle::unit(), 2.2), t25 = period(oracle::unit(), 2.5);
  EXPECT_GT(t25, t22);
  EXPECT_GT(t22, 2 * kPi);
  EXPECT_THROW(period(oracle::unit(), 2.0), LevelBelowMinimum);
  // The crossing with r at this level is within rounding of the x axis.
  EXPECT_THROW(period(oracle::unit(), 40.0), OutOfCertifiedRange);
  EXPECT_THROW(level_abscissae(oracle::unit(), 40.0), OutOfCertifiedRange);
}

TEST(Period, ConvergesUnderTighterTolerance) {
  Tolerances loose;
  loose.rel_tol = 1e-8;
  loose.abs_tol = 1e-10;
  const Tolerances tight = loose.refined(0.1);
  for (double level : {2.1, 2.5, 3.2}) {
    EXPECT_LT(std::abs(period(oracle::unit(), level, loose) - period(oracle::unit(), level, tight)),
              10 * loose.rel_tol)
        << level;
  }
}

TEST(MonotonicityScan, Examples) {
  const PeriodTable t = monotonicity_scan(oracle::unit(), grid(2.0001, 3.5, 50));
  ASSERT_EQ(t.periods.size(), 50u);
  for (std::size_t i = 1; i < t.periods.size(); ++i) EXPECT_GT(t.periods[i], t.periods[i - 1]);
  for (double tau : t.periods) EXPECT_GT(tau, 2 * kPi);

  EXPECT_EQ(monotonicity_scan(oracle::unit(), {2.3}).periods.size(), 1u);
  EXPECT_THROW(monotonicity_scan(oracle::unit(), {1.9, 2.3}), LevelBelowMinimum);
  EXPECT_THROW(monotonicity_scan(oracle::unit(), {2.0, 2.3}), LevelBelowMinimum);
}

TEST(MonotonicityScan, Harvested) {
  const double chi = min_energy(kHarv);
  const PeriodTable t = monotonicity_scan(kHarv, grid(chi + 1e-4, chi + 1.5, 50));
  for (std::size_t i = 1; i < t.periods.size(); ++i) EXPECT_GT(t.periods[i], t.periods[i - 1]);
  for (double tau : t.periods) EXPECT_GT(tau, center_period(kHarv));
}

TEST(MonotonicityScan, CsvFormat) {
  const PeriodTable t = monotonicity_scan(oracle::unit(), {2.2, 2.5});
  std::ostringstream os;
  write_period_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "level,period");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("2.2000000000000002,", 0), 0u);
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 1);
}

TEST(TwistBound, Examples) {
  EXPECT_NEAR(twist_bound(2, 6.5, 8.0), 5.5 * 52.0 / 1.5, 1e-12);
  EXPECT_NEAR(twist_bound(2, 6.5, 8.0), 190.66666666666666, 1e-12);
  EXPECT_NEAR(twist_bound(1, 6.5, 8.0), 156.0, 1e-12);
  EXPECT_THROW(twist_bound(1, 6.5, 6.5), NonTwist);
  EXPECT_THROW(twist_bound(1, 8.0, 6.5), NonTwist);
  EXPECT_THROW(twist_bound(0, 6.5, 8.0), InvalidParams);
}

TEST(WindingFloor, Examples) {
  EXPECT_EQ(winding_floor(200, 8), 25);
  EXPECT_EQ(winding_floor(200.1, 8), 26);
  EXPECT_EQ(winding_floor(1e-9, 8), 1);
  EXPECT_THROW(winding_floor(0, 8), InvalidParams);
}

TEST(ClassifySymbol, Examples) {
  const SymbolClass a = classify_symbol(2 * kPi * 25 + kPi / 2, 25, 2, BandVariant::H);
  EXPECT_TRUE(a.is_index());
  EXPECT_EQ(a.index, 0);
  const SymbolClass b = classify_symbol(2 * kPi * 26 + kPi / 2, 25, 2, BandVariant::H);
  EXPECT_TRUE(b.is_index());
  EXPECT_EQ(b.index, 1);
  EXPECT_EQ(classify_symbol(2 * kPi * 25 + 3 * kPi / 2, 25, 2, BandVariant::H).kind, SymbolClass::Kind::none);
}

TEST(ClassifySymbol, VariantKAndMargins) {
  EXPECT_EQ(classify_symbol(2 * kPi * 25 + 3 * kPi / 2, 25, 1, BandVariant::K).index, 0);
  EXPECT_EQ(classify_symbol(2 * kPi * 25 + kPi / 2, 25, 1, BandVariant::K).kind, SymbolClass::Kind::none);
  EXPECT_EQ(classify_symbol(2 * kPi * 25 + 1e-8, 25, 2, BandVariant::H).kind, SymbolClass::Kind::ambiguous);
  EXPECT_EQ(classify_symbol(2 * kPi * 25 + kPi, 25, 2, BandVariant::H).kind, SymbolClass::Kind::ambiguous);
  // Past the last band.
  EXPECT_EQ(classify_symbol(2 * kPi * 27 + kPi / 2, 25, 2, BandVariant::H).kind, SymbolClass::Kind::none);
}

TEST(TwistProperties, WindingPeriodDuality) {
  const VolterraParams p = oracle::unit();
  const AngularFrame frame = AngularFrame::of(p);
  Tolerances tol;
  tol.rel_tol = 1e-12;
  tol.abs_tol = 1e-14;
  for (double level : {2.2, 2.5}) {
    const double tau = period(p, level, tol);
    for (const PhasePoint& z : sample_level_curve(p, level, 16)) {
      for (int j : {1, 3}) {
        const AngleResult r = advance_angle(p, frame, z, j * tau, tol);
        EXPECT_NEAR((r.theta - r.theta0) / (2 * kPi), j, 1e-7) << level;
      }
    }
  }
}

TEST(TwistProperties, FloorCeilingSandwich) {
  const VolterraParams p = oracle::unit();
  const AngularFrame frame = AngularFrame::of(p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(0.5, 80.0);
  const double level = 2.4;
  const double tau = period(p, level);
  const auto pts = sample_level_curve(p, level, 16);
  for (int i = 0; i < 40; ++i) {
    const double t = ut(rng);
    const AngleResult r = advance_angle(p, frame, pts[i % pts.size()], t);
    const double rot = (r.theta - r.theta0) / (2 * kPi);
    EXPECT_LE(std::floor(t / tau), rot + 1e-9) << t;
    EXPECT_GE(std::ceil(t / tau), rot - 1e-9) << t;
  }
}

TEST(TwistProperties, SeparationAtAlpha) {
  const LinkedConfig cfg = oracle::ref_config();
  const VolterraParams p = cfg.base();
  const int m1 = 2;
  const double alpha = twist_bound(m1, period(p, cfg.ell1()), period(p, cfg.ell2()));
  const double t = 1.01 * alpha;
  const AngularFrame frame = AngularFrame::of(p);
  for (double v : {0.0, 0.5, 1.0}) {
    const AngleResult inner = advance_angle(p, frame, rect_point(cfg, Rect::R1, 0.0, v), t);
    const AngleResult outer = advance_angle(p, frame, rect_point(cfg, Rect::R1, 1.0, v), t);
    EXPECT_GT(inner.theta - outer.theta, 2 * kPi * (m1 + 1)) << v;
  }
}
