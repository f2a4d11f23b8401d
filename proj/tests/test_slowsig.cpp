#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "phasemod/slowsig.hpp"

using namespace phasemod;

TEST(Signal, PeriodicValueAndRate) {
  const SlowSignal s = SlowSignal::periodic(0.9, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(s.value(0.0), 1.9);
  EXPECT_EQ(s.eval(0.0).dq_dtau, 0.0);
  EXPECT_NEAR(s.value(std::numbers::pi), -0.1, 1e-15);
  EXPECT_NEAR(s.eval(std::numbers::pi / 2).dq_dtau, -1.0, 1e-15);
}

TEST(Signal, QuasiperiodicStartsAtPeak) {
  const SlowSignal s = SlowSignal::quasiperiodic(0.3, 0.2, 5.0);
  EXPECT_DOUBLE_EQ(s.value(0.0), 0.5);
  for (double t = 0.0; t < 40.0; t += 0.173) {
    EXPECT_LE(s.value(t), 0.5 + 1e-15);
    EXPECT_GE(s.value(t), 0.1 - 1e-15);
  }
}

TEST(Signal, ConstantHasNoRate) {
  const SlowSignal s = SlowSignal::constant(0.42);
  for (double t : {0.0, 3.0, 1e6}) {
    EXPECT_EQ(s.value(t), 0.42);
    EXPECT_EQ(s.eval(t).dq_dtau, 0.0);
  }
  EXPECT_TRUE(std::isinf(s.tau_max()));
}

TEST(Signal, AnalyticRatesMatchFiniteDifferences) {
  for (const SlowSignal& s :
       {SlowSignal::periodic(0.3, 0.2, 5.0), SlowSignal::quasiperiodic(1.0, 0.5, 0.7)}) {
    for (double t : {0.1, 1.3, 7.7}) {
      const double d = (s.value(t + 1e-5) - s.value(t - 1e-5)) / 2e-5;
      EXPECT_NEAR(s.eval(t).dq_dtau, d, 1e-8);
    }
  }
}

TEST(Signal, ParsesKinds) {
  EXPECT_EQ(parse_signal_kind("ou"), SignalKind::ou);
  EXPECT_EQ(to_string(parse_signal_kind("quasiperiodic")), "quasiperiodic");
  EXPECT_THROW(parse_signal_kind("square"), Error);
}

TEST(Ou, NormalizedToUnitRange) {
  const OuPath p = gen_ou(3, 1000.0, 1e-2, 50.0, 0.0025);
  EXPECT_EQ(*std::min_element(p.z.begin(), p.z.end()), -1.0);
  EXPECT_EQ(*std::max_element(p.z.begin(), p.z.end()), 1.0);
  EXPECT_NEAR(p.tau_max(), 50.0, 1e-9);
  const SlowSignal s = SlowSignal::ou(0.9, 1.0, p);
  for (double t = 0.0; t <= 50.0; t += 0.37) {
    EXPECT_GE(s.value(t), -0.1 - 1e-15);
    EXPECT_LE(s.value(t), 1.9 + 1e-15);
  }
}

TEST(Ou, SameSeedSamePath) {
  const OuPath a = gen_ou(17, 100.0, 1e-2, 10.0);
  const OuPath b = gen_ou(17, 100.0, 1e-2, 10.0);
  const OuPath c = gen_ou(18, 100.0, 1e-2, 10.0);
  EXPECT_EQ(a.z, b.z);
  EXPECT_NE(a.z, c.z);
}

TEST(Ou, LagOneAutocorrelation) {
  // Correlation time mu in t units: lag-1 correlation exp(-dt / mu).
  const double mu = 10.0, dtau = 1.0;
  const OuPath p = gen_ou(5, mu, dtau, 200000.0);
  double mean = 0.0;
  for (double v : p.z) mean += v;
  mean /= static_cast<double>(p.z.size());
  double c0 = 0.0, c1 = 0.0;
  for (std::size_t k = 0; k + 1 < p.z.size(); ++k) {
    c0 += (p.z[k] - mean) * (p.z[k] - mean);
    c1 += (p.z[k] - mean) * (p.z[k + 1] - mean);
  }
  EXPECT_NEAR(c1 / c0, std::exp(-dtau / mu), 0.01);
}

TEST(Ou, TimeScaleStretchesCorrelation) {
  // With tau = eps t the correlation time in tau is eps * mu.
  const double mu = 1000.0, eps = 0.0025, dtau = 0.1;
  const OuPath p = gen_ou(9, mu, dtau, 20000.0, eps);
  double c0 = 0.0, c1 = 0.0, mean = 0.0;
  for (double v : p.z) mean += v;
  mean /= static_cast<double>(p.z.size());
  for (std::size_t k = 0; k + 1 < p.z.size(); ++k) {
    c0 += (p.z[k] - mean) * (p.z[k] - mean);
    c1 += (p.z[k] - mean) * (p.z[k + 1] - mean);
  }
  EXPECT_NEAR(c1 / c0, std::exp(-dtau / (eps * mu)), 0.02);
}

TEST(Ou, OutsidePathSpanThrows) {
  const SlowSignal s = SlowSignal::ou(0.0, 1.0, gen_ou(1, 10.0, 0.1, 5.0));
  EXPECT_NO_THROW(s.value(5.0));
  try {
    s.value(6.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_range);
  }
  EXPECT_THROW(gen_ou(1, -1.0, 0.1, 5.0), Error);
}

TEST(Ou, RateIsCentralDifferenceOfPath) {
  const OuPath p = gen_ou(2, 50.0, 0.01, 5.0);
  const SlowSignal s = SlowSignal::ou(0.5, 0.25, p);
  const std::size_t k = 200;
  const double tau = 0.01 * k;
  EXPECT_NEAR(s.eval(tau).dq_dtau, 0.25 * (p.z[k + 1] - p.z[k - 1]) / 0.02, 1e-9);
}

TEST(Gaussian, DeterministicWithUnitMoments) {
  GaussianSource a(42), b(42);
  double m = 0.0, v = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double x = a();
    ASSERT_EQ(x, b());
    m += x;
    v += x * x;
  }
  m /= n;
  v = v / n - m * m;
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(Signal, MeanOfPeriodicIsCenter) {
  const SlowSignal s = SlowSignal::periodic(0.3, 0.2, 1.0);
  EXPECT_NEAR(signal_mean(s, 2.0 * std::numbers::pi * 10), 0.3, 1e-9);
}
