#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "phasemod/fullsim.hpp"
#include "phasemod/models.hpp"

using namespace phasemod;

namespace {

constexpr double pi = std::numbers::pi;

GSpec lamom_spec(double kappa = 1.0) {
  GSpec s;
  s.core = GSpec::LamomClosed{kappa};
  return s;
}

}  // namespace

TEST(Extractor, RecoversGridPhases) {
  for (const Model& m : {lamom_model(), traub_model()}) {
    const PhaseExtractor ex = make_extractor(m, m.q_min + 0.5 * (m.q_max - m.q_min));
    const std::size_t M = ex.reference.size();
    for (std::size_t k = 0; k < M; k += 7) {
      const double s = ex.reference.ds() * static_cast<double>(k);
      EXPECT_NEAR(wrap_pi(extract_phase(ex.reference.U0[k], ex) - s), 0.0, two_pi / M);
    }
  }
}

TEST(Extractor, RadialProjectionForLambdaOmega) {
  const PhaseExtractor ex = make_extractor(lamom_model(), 0.5);
  EXPECT_NEAR(wrap_pi(extract_phase(State{1.1, 0.0}, ex)), 0.0, 1e-3);
  EXPECT_NEAR(extract_phase(State{0.0, 0.7}, ex), pi / 2, 1e-3);
  EXPECT_NEAR(extract_phase(State{-1.3, 0.0}, ex), pi, 1e-3);
}

TEST(Extractor, OffReferenceStatesStableUnderRefinement) {
  const Model m = traub_model();
  const LimitCycle other = find_limit_cycle(m, 0.5);
  OrbitOptions a, b;
  a.grid_size = 512;
  b.grid_size = 1024;
  const PhaseExtractor ea = make_extractor(m, 0.3, a);
  const PhaseExtractor eb = make_extractor(m, 0.3, b);
  for (std::size_t k = 0; k < other.size(); k += 16)
    EXPECT_NEAR(wrap_pi(extract_phase(other.U0[k], ea) - extract_phase(other.U0[k], eb)), 0.0,
                0.02);
}

TEST(Extractor, RejectsBadComponents) {
  const LimitCycle c = find_limit_cycle(lamom_model(), 0.5);
  EXPECT_THROW(make_extractor(c, {5}), Error);
}

TEST(StateAtPhase, LambdaOmegaIsRotation) {
  const LimitCycle c = find_limit_cycle(lamom_model(), 0.5);
  const State x = state_at_phase(c, lamom_field(), 1.2, 1e-3);
  EXPECT_NEAR(x[0], std::cos(1.2), 1e-6);
  EXPECT_NEAR(x[1], std::sin(1.2), 1e-6);
}

TEST(PairFull, UncoupledTraubKeepsPhaseDifference) {
  const Model m = traub_model();
  PairConfig cfg;
  cfg.eps = 0.0;
  cfg.init_offset = 0.8;
  cfg.t_end = 10.0 * find_limit_cycle(m, 0.3).period;
  cfg.stride = 50;
  const PairRun run = simulate_pair_full(m, SlowSignal::constant(0.3), cfg);
  const PhaseExtractor ex = make_extractor(m, 0.3);
  double worst = 0.0;
  for (std::size_t k = 0; k < run.times.size(); ++k)
    worst = std::max(worst, std::abs(wrap_pi(extract_phase(run.xb[k], ex) -
                                             extract_phase(run.xa[k], ex) - 0.8)));
  EXPECT_LT(worst, 0.05);
}

TEST(PairFull, RecordsStridedSamples) {
  PairConfig cfg;
  cfg.t_end = 1.0;
  cfg.dt = 0.01;
  cfg.stride = 10;
  const PairRun run = simulate_pair_full(lamom_model(), SlowSignal::constant(0.5), cfg);
  EXPECT_EQ(run.times.size(), 11u);
  EXPECT_EQ(run.xa.size(), run.xb.size());
  EXPECT_DOUBLE_EQ(run.times.back(), 1.0);
}

TEST(Compare, LambdaOmegaErrorShrinksWithEps) {
  const Model m = lamom_model();
  const SlowSignal sig = SlowSignal::periodic(0.9, 1.0, 1.0);
  const auto run = [&](double eps) {
    CompareConfig cfg;
    cfg.pair.eps = eps;
    cfg.pair.t_end = 4.0 / eps;
    cfg.pair.dt = 0.01;
    cfg.pair.stride = 20;
    cfg.transient_tau = 0.5;
    return compare_pair(m, sig, lamom_spec(), cfg);
  };
  const ComparisonReport coarse = run(0.04);
  const ComparisonReport fine = run(0.01);
  // First order in eps.
  EXPECT_LT(fine.max_abs_error, 0.1);
  EXPECT_NEAR(coarse.max_abs_error / fine.max_abs_error, 4.0, 1.0);
  EXPECT_EQ(fine.phi_full.size(), fine.tau.size());
  for (std::size_t k = 0; k < fine.tau.size(); ++k)
    EXPECT_NEAR(fine.tau[k], 0.01 * fine.times[k], 1e-12);
}

TEST(Compare, NeedsPositiveEps) {
  CompareConfig cfg;
  cfg.pair.eps = 0.0;
  EXPECT_THROW(compare_pair(lamom_model(), SlowSignal::constant(0.5), lamom_spec(), cfg), Error);
}

TEST(Compare, CsvHeader) {
  ComparisonReport r;
  r.times = {0.0};
  r.tau = {0.0};
  r.q = {0.5};
  r.phi_full = {0.1};
  r.phi_reduced = {0.2};
  r.error = {-0.1};
  std::ostringstream out;
  write_comparison_csv(out, r);
  EXPECT_EQ(out.str(), "t,tau,phi_full,phi_reduced,error,q\n0,0,0.1,0.2,-0.1,0.5\n");
}

TEST(SingleCell, LambdaOmegaCrossesEveryTwoPi) {
  const SingleCellRun run =
      simulate_single_full(lamom_model(), SlowSignal::constant(0.5), 0.01, 40.0, 1e-3);
  ASSERT_EQ(run.crossings.size(), 6u);
  for (std::size_t k = 0; k < run.crossings.size(); ++k)
    EXPECT_NEAR(run.crossings[k], two_pi * (k + 1), 1e-6);
}

TEST(Crossings, DirectionAndInterpolation) {
  std::vector<double> t, v;
  for (int k = 0; k <= 2000; ++k) {
    t.push_back(0.01 * k);
    v.push_back(std::sin(t.back() - 0.3));
  }
  const auto up = crossing_times(t, v, 0.0, +1);
  ASSERT_EQ(up.size(), 4u);
  EXPECT_NEAR(up[1], 0.3 + two_pi, 1e-4);
  const auto down = crossing_times(t, v, 0.0, -1);
  ASSERT_EQ(down.size(), 3u);
  EXPECT_NEAR(down[0], 0.3 + pi, 1e-4);
  EXPECT_EQ(crossing_times(t, v, 0.0, 0).size(), 7u);
}

TEST(WindowedVariance, ConstantAndSinusoid) {
  for (double v : windowed_variance(std::vector<double>(100, 3.7), 0.1, 2.0)) EXPECT_EQ(v, 0.0);
  const double A = 2.5, dt = 0.01;
  std::vector<double> s;
  for (int k = 0; k < 5000; ++k) s.push_back(1.0 + A * std::sin(two_pi * k * dt));
  // Window of four periods (401 samples centered).
  const auto var = windowed_variance(s, dt, 4.0);
  for (std::size_t k = 300; k < 4700; k += 97) EXPECT_NEAR(var[k], 0.5 * A * A, 0.01);
  EXPECT_TRUE(windowed_variance({}, 0.1, 1.0).empty());
}

TEST(NetworkFull, IdenticalCellsMoveTogether) {
  NetworkConfig cfg;
  cfg.count = 4;
  cfg.identical = true;
  cfg.eps = 0.01;
  cfg.t_end = 20.0;
  cfg.dt = 1e-3;
  cfg.stride = 100;
  const NetworkRun run = simulate_network_full(lamom_model(), SlowSignal::constant(0.5), cfg);
  for (std::size_t k = 0; k < run.times.size(); ++k)
    EXPECT_NEAR(run.v_tot[k], run.v_first[k], 1e-12);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(run.spikes[i], run.spikes[0]);
  EXPECT_EQ(run.spikes[0].size(), 3u);
}

TEST(NetworkFull, SmallTraubNetworkSpikes) {
  const Model m = traub_model();
  NetworkConfig cfg;
  cfg.count = 3;
  cfg.t_end = 120.0;
  cfg.seed = 4;
  const NetworkRun run = simulate_network_full(m, SlowSignal::constant(0.25), cfg);
  for (const auto& s : run.spikes) {
    EXPECT_GE(s.size(), 6u);
    EXPECT_LE(s.size(), 10u);
  }
  for (double v : run.v_tot) EXPECT_TRUE(std::isfinite(v));
  std::ostringstream spikes;
  write_spikes_csv(spikes, run);
  EXPECT_EQ(spikes.str().substr(0, 13), "cell,t_spike\n");
  cfg.count = 0;
  EXPECT_THROW(simulate_network_full(m, SlowSignal::constant(0.25), cfg), Error);
}

TEST(NetworkFull, SeedSelectsInitialSpread) {
  const Model m = traub_model();
  NetworkConfig cfg;
  cfg.count = 3;
  cfg.t_end = 20.0;
  const auto a = simulate_network_full(m, SlowSignal::constant(0.3), cfg);
  const auto b = simulate_network_full(m, SlowSignal::constant(0.3), cfg);
  EXPECT_EQ(a.v_tot, b.v_tot);
  cfg.seed = 2;
  const auto c = simulate_network_full(m, SlowSignal::constant(0.3), cfg);
  EXPECT_NE(a.v_tot, c.v_tot);
}
