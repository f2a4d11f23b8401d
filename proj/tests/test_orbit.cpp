#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "phasemod/models.hpp"
#include "phasemod/orbit.hpp"

using namespace phasemod;

namespace {

double max_norm(const std::vector<State>& rows) {
  double m = 0.0;
  for (const auto& r : rows)
    for (double v : r) m = std::max(m, std::abs(v));
  return m;
}

OrbitOptions fine() {
  OrbitOptions o;
  o.grid_size = 4096;
  o.dt = 0.001;
  return o;
}

}  // namespace

TEST(LambdaOmegaCycle, UnitCircleWithPeriodTwoPi) {
  const LimitCycle c = find_limit_cycle(lamom_model(), 0.5);
  EXPECT_NEAR(c.period, 2.0 * std::numbers::pi, 1e-5);
  EXPECT_NEAR(c.omega, 1.0, 1e-5);
  EXPECT_EQ(c.size(), 512u);
  for (const auto& u : c.U0) EXPECT_LT(std::abs(std::hypot(u[0], u[1]) - 1.0), 1e-6);
  // Phase origin on the section y = 0 rising.
  EXPECT_NEAR(c.U0[0][1], 0.0, 1e-8);
  EXPECT_GT(c.U0[0][0], 0.0);
  EXPECT_LT(c.residual, 1e-4);
  EXPECT_LT(c.periodicity_defect, 1e-6);
}

TEST(LambdaOmegaCycle, ShapeIndependentOfQ) {
  const LimitCycle a = find_limit_cycle(lamom_model(), 0.0);
  const LimitCycle b = find_limit_cycle(lamom_model(), 1.0);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a.U0[k][i], b.U0[k][i], 1e-6);
}

TEST(LambdaOmegaCycle, DerivativeVanishes) {
  const CycleDerivative d = dq_cycle(lamom_model(), 0.7);
  EXPECT_LT(max_norm(d.dU0_dq), 1e-4);
  EXPECT_FALSE(d.one_sided);
}

TEST(TraubCycle, PeriodsAtModulationEnds) {
  const Model m = traub_model();
  const LimitCycle lo = find_limit_cycle(m, 0.1);
  const LimitCycle hi = find_limit_cycle(m, 0.5);
  EXPECT_NEAR(lo.period, 12.65, 0.05 * 12.65);
  EXPECT_NEAR(hi.period, 24.6, 0.05 * 24.6);
  // 40-100 Hz band
  EXPECT_LT(1000.0 / lo.period, 100.0);
  EXPECT_GT(1000.0 / hi.period, 40.0);
}

TEST(TraubCycle, PeriodGrowsWithAdaptation) {
  const Model m = traub_model();
  double prev = 0.0;
  for (double q : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    const double T = find_limit_cycle(m, q).period;
    EXPECT_GT(T, prev);
    prev = T;
  }
}

TEST(TraubCycle, InvariantsOnFineGrid) {
  const LimitCycle c = find_limit_cycle(traub_model(), 0.3, fine());
  EXPECT_LT(c.residual, 1e-4);
  EXPECT_LT(c.periodicity_defect, 1e-6);
  EXPECT_NEAR(c.U0[0][0], -20.0, 1e-6);
}

TEST(TraubCycle, RefiningGridReducesPeriodicityDefect) {
  const Model m = traub_model();
  OrbitOptions coarse;
  coarse.grid_size = 256;
  OrbitOptions finer;
  finer.grid_size = 512;
  const LimitCycle a = find_limit_cycle(m, 0.3, coarse);
  const LimitCycle b = find_limit_cycle(m, 0.3, finer);
  EXPECT_LE(b.periodicity_defect, a.periodicity_defect);
  EXPECT_LT(b.residual, a.residual);
}

TEST(TraubCycle, Deterministic) {
  const LimitCycle a = find_limit_cycle(traub_model(), 0.25);
  const LimitCycle b = find_limit_cycle(traub_model(), 0.25);
  EXPECT_EQ(a.period, b.period);
  EXPECT_EQ(a.U0, b.U0);
  EXPECT_EQ(a.dU0_ds, b.dU0_ds);
}

TEST(TraubCycle, DerivativeStableUnderStepHalving) {
  const Model m = traub_model();
  const CycleDerivative d1 = dq_cycle(m, 0.3, 2e-3);
  const CycleDerivative d2 = dq_cycle(m, 0.3, 1e-3);
  double vmax = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < d1.dU0_dq.size(); ++k) {
    vmax = std::max(vmax, std::abs(d2.dU0_dq[k][0]));
    diff = std::max(diff, std::abs(d1.dU0_dq[k][0] - d2.dU0_dq[k][0]));
  }
  EXPECT_GT(vmax, 0.0);
  EXPECT_LT(diff / vmax, 0.05);
}

TEST(TraubCycle, OneSidedMatchesCentralInside) {
  Model m = traub_model();
  const double dq = 1e-3;
  // Central estimate at q = 0.3 versus the one-sided stencil forced by a
  // boundary placed at 0.3.
  const CycleDerivative central = dq_cycle(m, 0.3, dq);
  m.q_min = 0.3;
  const CycleDerivative edge = dq_cycle(m, 0.3, dq);
  EXPECT_TRUE(edge.one_sided);
  double vmax = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < central.dU0_dq.size(); ++k)
    for (std::size_t i = 0; i < 6; ++i) {
      vmax = std::max(vmax, std::abs(central.dU0_dq[k][i]));
      diff = std::max(diff, std::abs(central.dU0_dq[k][i] - edge.dU0_dq[k][i]));
    }
  EXPECT_LT(diff / vmax, 0.10);
}

TEST(Cycle, OutsideAdmissibleIntervalIsRejected) {
  try {
    find_limit_cycle(traub_model(), 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_range);
    EXPECT_EQ(e.module(), "orbit");
  }
}

TEST(Cycle, NonOscillatingFieldIsReported) {
  VectorField f;
  f.dim = 2;
  f.rhs = [](std::span<const double> x, double, double, std::span<double> dx) {
    dx[0] = -x[0];
    dx[1] = -x[1];
  };
  OrbitOptions o;
  o.max_return_time = 20.0;
  try {
    find_limit_cycle(f, 0.0, Section{0, 0.5, +1}, State{1.0, 1.0}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_oscillating);
  }
}

TEST(Cycle, CsvHasHeaderAndOneRowPerGridPoint) {
  OrbitOptions o;
  o.grid_size = 16;
  const Model m = lamom_model();
  const LimitCycle c = find_limit_cycle(m, 0.2, o);
  std::ostringstream out;
  write_cycle_csv(out, c, component_names(m));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "s,x,y");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 16);
}
