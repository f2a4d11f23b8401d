#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "phasemod/adjoint.hpp"
#include "phasemod/coupling.hpp"
#include "phasemod/models.hpp"

using namespace phasemod;

namespace {

double z_extreme(const AdjointCurve& z, std::size_t comp, bool want_max) {
  double v = want_max ? -1e300 : 1e300;
  for (const auto& r : z.Z) v = want_max ? std::max(v, r[comp]) : std::min(v, r[comp]);
  return v;
}

// Asymptotic phase advance (rad) after kicking the cycle state at grid index
// k by delta along component comp.
double measured_shift(const Model& m, const LimitCycle& c, std::size_t k, std::size_t comp,
                      double delta) {
  State kicked = c.U0[k];
  kicked[comp] += delta;
  const double q = c.q;
  const auto qf = [q](double) { return q; };
  const auto noop = [](double, const State&, double) {};
  const double settle = 10.0 * c.period;
  const double dt = m.orbit_dt;
  const State a = integrate_observed(m.field, kicked, qf, 0.0, settle, dt, noop);
  const State b = integrate_observed(m.field, c.U0[k], qf, 0.0, settle, dt, noop);
  const double ta = integrate_to_section(m.field, a, q, m.section, 2.0 * c.period, dt).time;
  const double tb = integrate_to_section(m.field, b, q, m.section, 2.0 * c.period, dt).time;
  return std::remainder((tb - ta) * c.omega, 2.0 * std::numbers::pi);
}

}  // namespace

TEST(LambdaOmegaAdjoint, MatchesClosedForm) {
  const Model m = lamom_model();
  for (double q : {0.0, 0.5, 0.9, 1.1, 1.5}) {
    const LimitCycle c = find_limit_cycle(m, q);
    const AdjointCurve z = compute_adjoint(c, m.field);
    double err = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const auto exact = lamom_adjoint_exact_at(q, c.ds() * static_cast<double>(k));
      for (std::size_t i = 0; i < 2; ++i) err = std::max(err, std::abs(z.Z[k][i] - exact[i]));
    }
    EXPECT_LT(err, 1e-3) << "q=" << q;
    EXPECT_LT(z.normalization_defect, 1e-4);
    EXPECT_LT(z.residual, 1e-3);
  }
}

TEST(LambdaOmegaAdjoint, DirectPerturbationAgrees) {
  const Model m = lamom_model();
  const LimitCycle c = find_limit_cycle(m, 0.7);
  const AdjointCurve z = compute_adjoint(c, m.field);
  const double delta = 1e-4;
  for (std::size_t comp = 0; comp < 2; ++comp)
    for (std::size_t j = 0; j < 8; ++j) {
      const std::size_t k = j * c.size() / 8;
      const double predicted = delta * z.Z[k][comp];
      EXPECT_NEAR(measured_shift(m, c, k, comp, delta), predicted, 0.1 * std::abs(predicted));
    }
}

TEST(TraubAdjoint, DirectPerturbationAgrees) {
  const Model m = traub_model();
  const LimitCycle c = find_limit_cycle(m, 0.3);
  const AdjointCurve z = compute_adjoint(c, m.field);
  // 1e-4 of the component scale: ~100 mV for V, 1 for n.
  const std::array<double, 2> delta{1e-2, 1e-4};
  for (std::size_t comp = 0; comp < 2; ++comp)
    for (std::size_t j = 0; j < 8; ++j) {
      const std::size_t k = j * c.size() / 8;
      const double predicted = delta[comp] * z.Z[k][comp];
      EXPECT_NEAR(measured_shift(m, c, k, comp, delta[comp]), predicted,
                  0.1 * std::abs(predicted))
          << "component " << comp << " phase index " << k;
    }
}

TEST(TraubAdjoint, InvariantsOnFineGrid) {
  OrbitOptions o;
  o.grid_size = 4096;
  o.dt = 0.001;
  const Model m = traub_model();
  const LimitCycle c = find_limit_cycle(m, 0.3, o);
  const AdjointCurve z = compute_adjoint(c, m.field);
  EXPECT_LT(z.normalization_defect, 1e-4);
  EXPECT_LT(z.residual, 1e-3);
  // Wrap-around: extrapolating the last two samples lands on the first.
  const std::size_t M = z.size();
  double zmax = 0.0, wrap = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (const auto& r : z.Z) zmax = std::max(zmax, std::abs(r[i]));
    const double next = 2.0 * z.Z[M - 1][i] - z.Z[M - 2][i];
    const double curvature = z.Z[M - 1][i] - 2.0 * z.Z[M - 2][i] + z.Z[M - 3][i];
    wrap = std::max(wrap, std::abs(next - z.Z[0][i]) - std::abs(curvature));
  }
  EXPECT_LT(wrap, 1e-5 * zmax);
}

TEST(TraubAdjoint, NearlyPositiveAtLowAdaptation) {
  const Model m = traub_model();
  const AdjointCurve z = compute_adjoint(find_limit_cycle(m, 0.1), m.field);
  EXPECT_GT(z_extreme(z, 0, false), -0.05 * z_extreme(z, 0, true));
}

TEST(TraubAdjoint, NegativeLobeAtHighAdaptation) {
  const Model m = traub_model();
  const AdjointCurve lo = compute_adjoint(find_limit_cycle(m, 0.1), m.field);
  const AdjointCurve hi = compute_adjoint(find_limit_cycle(m, 0.5), m.field);
  const double ratio_hi = z_extreme(hi, 0, false) / z_extreme(hi, 0, true);
  const double ratio_lo = z_extreme(lo, 0, false) / z_extreme(lo, 0, true);
  // The lobe deepens from nearly nothing to about a fifth of the peak.
  EXPECT_LT(ratio_hi, -0.15);
  EXPECT_LT(ratio_hi, 4.0 * ratio_lo);
  EXPECT_NEAR(ratio_hi, -0.207, 0.02);
}

TEST(TraubAdjoint, GridRefinementConverges) {
  const Model m = traub_model();
  OrbitOptions a, b;
  a.grid_size = 512;
  b.grid_size = 1024;
  const AdjointCurve za = compute_adjoint(find_limit_cycle(m, 0.3, a), m.field);
  const AdjointCurve zb = compute_adjoint(find_limit_cycle(m, 0.3, b), m.field);
  double zmax = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < za.size(); ++k) {
    zmax = std::max(zmax, std::abs(za.Z[k][0]));
    diff = std::max(diff, std::abs(za.Z[k][0] - zb.Z[2 * k][0]));
  }
  EXPECT_LT(diff, 0.01 * zmax);
}

TEST(Fredholm, NormalizationRestated) {
  const Model m = traub_model();
  const LimitCycle c = find_limit_cycle(m, 0.3);
  const AdjointCurve z = compute_adjoint(c, m.field);
  std::vector<State> rhs = c.dU0_ds;
  for (auto& r : rhs)
    for (double& v : r) v *= 2.5;
  EXPECT_NEAR(check_fredholm(c, z, rhs), 2.0 * std::numbers::pi * 2.5, 1e-3);
  std::vector<State> zero(c.size(), State(6, 0.0));
  EXPECT_EQ(check_fredholm(c, z, zero), 0.0);
}

TEST(Fredholm, AssembledFirstOrderRightHandSideIsOrthogonal) {
  // b(s) = G(U0(s + phi), U0(s)) - dU0/dq q' - theta' dU0/ds with
  // theta' = h(phi) - B q' must be orthogonal to Z.
  const Model m = traub_model();
  const double q = 0.3, dq_dtau = 0.7;
  const LimitCycle c = find_limit_cycle(m, q);
  const AdjointCurve z = compute_adjoint(c, m.field);
  const CycleDerivative d = dq_cycle(m, q);
  const InteractionCurve h = interaction_h(c, z, m.coupling);
  const std::size_t M = c.size(), shift = M / 5;
  const double theta_dot = h.h[shift] - beta(z, d, dq_dtau);
  std::vector<State> rhs(M, State(6));
  State g(6);
  double scale = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    m.coupling(c.U0[(k + shift) % M], c.U0[k], g);
    for (std::size_t i = 0; i < 6; ++i) {
      rhs[k][i] = g[i] - d.dU0_dq[k][i] * dq_dtau - theta_dot * c.dU0_ds[k][i];
      scale = std::max(scale, std::abs(z.Z[k][i] * g[i]));
    }
  }
  EXPECT_LT(std::abs(check_fredholm(c, z, rhs)), 1e-3);
  EXPECT_GT(scale, 1.0);
  // A wrong theta' is detected.
  for (std::size_t k = 0; k < M; ++k)
    for (std::size_t i = 0; i < 6; ++i) rhs[k][i] -= 0.1 * c.dU0_ds[k][i];
  EXPECT_GT(std::abs(check_fredholm(c, z, rhs)), 0.5);
}

TEST(Fredholm, RejectsMismatchedGrid) {
  const Model m = lamom_model();
  const LimitCycle c = find_limit_cycle(m, 0.5);
  const AdjointCurve z = compute_adjoint(c, m.field);
  std::vector<State> rhs(10, State(2, 0.0));
  EXPECT_THROW(check_fredholm(c, z, rhs), Error);
}

TEST(AdjointErrors, DimensionMismatch) {
  const LimitCycle c = find_limit_cycle(lamom_model(), 0.5);
  EXPECT_THROW(compute_adjoint(c, traub_field()), Error);
}
