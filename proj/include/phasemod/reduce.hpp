#pragma once

// Reduced phase equations: pair phase difference, total phase with the
// adiabatic drift, rotation numbers, and the all-to-all phase network.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include "phasemod/coupling.hpp"
#include "phasemod/slowsig.hpp"
#include "phasemod/spline.hpp"

namespace phasemod {

/// Maps any angle to [0, 2pi).
inline double wrap_2pi(double x) {
  double r = std::fmod(x, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r -= two_pi;
  return r;
}

/// Maps any angle to (-pi, pi].
inline double wrap_pi(double x) {
  double r = wrap_2pi(x);
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

struct PhaseSeries {
  std::vector<double> times;
  std::vector<double> unwrapped;
  std::vector<double> wrapped;  // in [0, 2pi)

  std::size_t size() const { return times.size(); }

  void push(double t, double phi) {
    times.push_back(t);
    unwrapped.push_back(phi);
    wrapped.push_back(wrap_2pi(phi));
  }

  /// Linear interpolation of the unwrapped series.
  double at(double t) const {
    if (t <= times.front()) return unwrapped.front();
    if (t >= times.back()) return unwrapped.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto j = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
    return (1.0 - w) * unwrapped[j - 1] + w * unwrapped[j];
  }
};

/// Builds a series from wrapped samples by accumulating minimal-image increments.
inline PhaseSeries unwrap_series(const std::vector<double>& times,
                                 const std::vector<double>& wrapped) {
  PhaseSeries s;
  double acc = wrapped.empty() ? 0.0 : wrapped.front();
  for (std::size_t k = 0; k < wrapped.size(); ++k) {
    if (k > 0) acc += wrap_pi(wrapped[k] - wrapped[k - 1]);
    s.push(times[k], acc);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Pair phase difference

namespace detail {

template <class Rhs>
double rk4_scalar(const Rhs& f, double x, double t, double h) {
  const double k1 = f(x, t);
  const double k2 = f(x + 0.5 * h * k1, t + 0.5 * h);
  const double k3 = f(x + 0.5 * h * k2, t + 0.5 * h);
  const double k4 = f(x + h * k3, t + h);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// RK4 in tau on dphi/dtau = G(phi, tau). `stride` thins the recorded samples.
inline PhaseSeries integrate_phase_pair(const GSpec& spec, double phi0, const SlowSignal& signal,
                                        double tau_end, double dtau, std::size_t stride = 1,
                                        double tau0 = 0.0) {
  if (!(dtau > 0.0) || !(tau_end > tau0))
    throw Error(Errc::configuration, "reduce", "integrate_phase_pair needs dtau > 0, tau_end > tau0");
  const std::size_t n = detail::step_count(tau0, tau_end, dtau);
  const double h = (tau_end - tau0) / static_cast<double>(n);
  if (stride == 0) stride = 1;
  const auto rhs = [&](double phi, double tau) { return g_spec_eval(spec, phi, tau, signal); };
  PhaseSeries out;
  double phi = phi0;
  out.push(tau0, phi);
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = tau0 + h * static_cast<double>(k);
    phi = detail::rk4_scalar(rhs, phi, tau, h);
    if (!std::isfinite(phi)) {
      std::ostringstream msg;
      msg << "phase difference diverged at tau=" << tau + h;
      throw Error(Errc::integration_diverged, "reduce", msg.str());
    }
    if ((k + 1) % stride == 0 || k + 1 == n)
      out.push(k + 1 == n ? tau_end : tau0 + h * static_cast<double>(k + 1), phi);
  }
  return out;
}

/// Cross-check of a lambda-omega pair solution against the separable form
/// tan(phi/2) = tan(phi0/2) exp(2 int_0^tau (kappa q - 1)). Returns the
/// largest mismatch, measured relative to the right side where it exceeds one.
inline double implicit_solution_residual(const PhaseSeries& series, const SlowSignal& signal,
                                         double kappa) {
  if (series.size() == 0) return 0.0;
  const double c = std::tan(0.5 * series.unwrapped.front());
  const auto rate = [&](double tau) { return kappa * signal.value(tau) - 1.0; };
  double integral = 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (k > 0) {
      const double a = series.times[k - 1], b = series.times[k];
      integral += (b - a) / 6.0 * (rate(a) + 4.0 * rate(0.5 * (a + b)) + rate(b));
    }
    const double rhs = c * std::exp(2.0 * integral);
    const double lhs = std::tan(0.5 * series.unwrapped[k]);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Total phase of a single slowly modulated oscillator

/// Frozen-cycle frequency omega(q) and the drift coefficient
/// B(q) = <Z . dU0/dq>, tabulated on a q grid and splined.
struct PhaseCoefficients {
  std::vector<double> q;
  std::vector<double> omega;
  std::vector<double> beta_coeff;
  double q_min = 0.0;
  double q_max = 0.0;
  CubicSpline omega_spline;
  CubicSpline beta_spline;

  double omega_at(double qq) const { return omega_spline(qq); }
  double beta_coeff_at(double qq) const { return beta_spline(qq); }
};

inline PhaseCoefficients tabulate_phase_coefficients(const Model& model,
                                                     const std::vector<double>& qs,
                                                     const OrbitOptions& opt = {}) {
  PhaseCoefficients pc;
  pc.q = qs;
  for (double q : qs) {
    const LimitCycle c = find_limit_cycle(model, q, opt);
    const AdjointCurve z = compute_adjoint(c, model.field);
    const CycleDerivative d = dq_cycle(model, q, 0.0, opt);
    pc.omega.push_back(c.omega);
    pc.beta_coeff.push_back(beta_coefficient(z, d));
  }
  pc.q_min = qs.front();
  pc.q_max = qs.back();
  pc.omega_spline = CubicSpline(pc.q, pc.omega);
  pc.beta_spline = CubicSpline(pc.q, pc.beta_coeff);
  return pc;
}

/// Integrates dtheta/dt = omega(q(eps t)) - eps beta(eps t) in fast time,
/// beta = B(q) dq/dtau. With include_beta = false this is the naive phase.
inline PhaseSeries total_phase(const SlowSignal& signal, const PhaseCoefficients& pc,
                               double theta0, double t_end, double eps, double dt,
                               bool include_beta = true, std::size_t stride = 1) {
  const auto rate = [&](double, double t) {
    const SignalValue v = signal.eval(eps * t);
    if (v.q < pc.q_min - 1e-12 || v.q > pc.q_max + 1e-12) {
      std::ostringstream msg;
      msg << "q=" << v.q << " left the tabulated interval [" << pc.q_min << ", " << pc.q_max
          << "]";
      throw Error(Errc::out_of_range, "reduce", msg.str());
    }
    double r = pc.omega_at(v.q);
    if (include_beta) r -= eps * pc.beta_coeff_at(v.q) * v.dq_dtau;
    return r;
  };
  const std::size_t n = detail::step_count(0.0, t_end, dt);
  const double h = t_end / static_cast<double>(n);
  if (stride == 0) stride = 1;
  PhaseSeries out;
  double theta = theta0;
  out.push(0.0, theta);
  for (std::size_t k = 0; k < n; ++k) {
    theta = detail::rk4_scalar(rate, theta, h * static_cast<double>(k), h);
    if ((k + 1) % stride == 0 || k + 1 == n) out.push(h * static_cast<double>(k + 1), theta);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotation numbers of the heterogeneous lambda-omega pair

enum class WindingClass { lock_0, lock_1, mixed };

inline std::string_view to_string(WindingClass c) {
  switch (c) {
    case WindingClass::lock_0: return "lock_0";
    case WindingClass::lock_1: return "lock_1";
    case WindingClass::mixed: return "mixed";
  }
  return "unknown";
}

struct WindingOptions {
  double kappa = 1.0;
  int periods = 200;
  int discard = 20;
  int steps_per_period = 400;
  double threshold = 0.02;
};

struct WindingResult {
  double d = 0.0;
  double f = 0.0;
  double rho = 0.0;
  WindingClass cls = WindingClass::mixed;
};

inline WindingClass classify_rotation(double rho, double threshold) {
  if (std::abs(rho) < threshold) return WindingClass::lock_0;
  if (std::abs(rho - 1.0) < threshold) return WindingClass::lock_1;
  return WindingClass::mixed;
}

/// Series of dphi/dtau = d + 2(kappa q(tau) - 1) sin(phi) under periodic q,
/// sampled every step (used for dwell diagnostics).
inline PhaseSeries winding_trajectory(double d, double f, double q0, double q1, double phi0,
                                      int periods, const WindingOptions& opt = {}) {
  GSpec spec;
  spec.core = GSpec::LamomClosed{opt.kappa};
  spec.detuning = d;
  const double period = two_pi / f;
  return integrate_phase_pair(spec, phi0, SlowSignal::periodic(q0, q1, f), period * periods,
                              period / opt.steps_per_period);
}

inline WindingResult rotation_number(double d, double f, double q0, double q1,
                                     const WindingOptions& opt = {}) {
  if (!(f > 0.0)) throw Error(Errc::configuration, "reduce", "rotation_number needs f > 0");
  const SlowSignal sig = SlowSignal::periodic(q0, q1, f);
  const double period = two_pi / f;
  const double h = period / opt.steps_per_period;
  const auto rhs = [&](double phi, double tau) {
    return d + 2.0 * (opt.kappa * sig.value(tau) - 1.0) * std::sin(phi);
  };
  double phi = 0.0;
  double tau = 0.0;
  double phi_start = 0.0;
  for (int p = 0; p < opt.discard + opt.periods; ++p) {
    if (p == opt.discard) phi_start = phi;
    for (int k = 0; k < opt.steps_per_period; ++k) {
      phi = detail::rk4_scalar(rhs, phi, tau, h);
      tau = period * p + h * (k + 1);
    }
  }
  WindingResult r;
  r.d = d;
  r.f = f;
  r.rho = (phi - phi_start) / (two_pi * opt.periods);
  r.cls = classify_rotation(r.rho, opt.threshold);
  return r;
}

/// Rotation numbers over a (d, f) grid on a bounded worker pool. Row-major
/// in d then f; results do not depend on scheduling.
inline std::vector<WindingResult> winding_sweep(const std::vector<double>& ds,
                                                const std::vector<double>& fs, double q0,
                                                double q1, unsigned workers,
                                                const WindingOptions& opt = {}) {
  std::vector<WindingResult> out(ds.size() * fs.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < out.size(); i = next++)
      out[i] = rotation_number(ds[i / fs.size()], fs[i % fs.size()], q0, q1, opt);
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  return out;
}

// ---------------------------------------------------------------------------
// All-to-all phase network

/// Modulus of the mean unit phasor.
inline double order_parameter(std::span<const double> theta) {
  if (theta.empty()) return 0.0;
  double c = 0.0, s = 0.0;
  for (double t : theta) {
    c += std::cos(t);
    s += std::sin(t);
  }
  return std::hypot(c, s) / static_cast<double>(theta.size());
}

struct NetworkOptions {
  double sigma = 0.01;
  std::uint64_t seed = 1;
  std::size_t stride = 1;
};

struct NetworkSeries {
  std::vector<double> times;
  std::vector<double> order;
  std::vector<double> q;
  std::vector<std::vector<double>> phases;  // recorded phases, one row per sample
};

/// Euler-Maruyama on theta_i' = (1/count) sum_j h(theta_j - theta_i; q(tau))
/// + sigma xi_i, with h from the interpolated truncated series (coefficients
/// of h(phi)). The sum runs over all oscillators including i.
inline NetworkSeries integrate_phase_network(std::vector<double> theta,
                                             const CoefficientInterp& h_interp,
                                             const SlowSignal& signal, double tau_end,
                                             double dtau, const NetworkOptions& opt = {}) {
  const std::size_t count = theta.size();
  if (count == 0) throw Error(Errc::configuration, "reduce", "empty network");
  const std::size_t n = detail::step_count(0.0, tau_end, dtau);
  const double h = tau_end / static_cast<double>(n);
  const double kick = opt.sigma * std::sqrt(h);
  GaussianSource gauss(opt.seed);
  NetworkSeries out;
  const std::size_t stride = opt.stride == 0 ? 1 : opt.stride;
  const auto record = [&](double tau) {
    out.times.push_back(tau);
    out.order.push_back(order_parameter(theta));
    out.q.push_back(signal.value(tau));
    out.phases.push_back(theta);
  };
  record(0.0);
  std::vector<std::complex<double>> sums;
  std::vector<double> drift(count);
  for (std::size_t step = 0; step < n; ++step) {
    const double tau = h * static_cast<double>(step);
    const FourierSeries fs = coeff_interp_eval(h_interp, signal.value(tau));
    const std::size_t modes = fs.n_modes();
    sums.assign(modes, {0.0, 0.0});
    for (std::size_t k = 0; k < modes; ++k)
      for (double t : theta) sums[k] += std::polar(1.0, static_cast<double>(k + 1) * t);
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      // sum_j e^{ik(theta_j - theta_i)} = S_k e^{-ik theta_i}
      double v = fs.a0;
      for (std::size_t k = 0; k < modes; ++k) {
        const std::complex<double> rel =
            sums[k] * std::polar(1.0, -static_cast<double>(k + 1) * theta[i]) * inv;
        v += fs.a[k] * rel.real() + fs.b[k] * rel.imag();
      }
      drift[i] = v;
    }
    for (std::size_t i = 0; i < count; ++i) {
      theta[i] += h * drift[i];
      if (opt.sigma != 0.0) theta[i] += kick * gauss();
    }
    if ((step + 1) % stride == 0 || step + 1 == n) record(h * static_cast<double>(step + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Jump-up detection

struct JumpOptions {
  double floor = 0.05;
  double threshold = 0.5;
};

/// Times at which the distance of phi from synchrony rises through
/// `threshold` after having been below `floor`.
inline std::vector<double> jump_time(const PhaseSeries& series, const JumpOptions& opt = {}) {
  std::vector<double> out;
  bool armed = false;
  double prev = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double dist = std::abs(wrap_pi(series.unwrapped[k]));
    if (dist < opt.floor) armed = true;
    if (armed && k > 0 && prev < opt.threshold && dist >= opt.threshold) {
      const double w = (opt.threshold - prev) / (dist - prev);
      out.push_back(series.times[k - 1] + w * (series.times[k] - series.times[k - 1]));
      armed = false;
    }
    prev = dist;
  }
  return out;
}

/// Truncated Fourier coefficients of h(phi) computed from the model at each
/// anchor q, for use as a Truncated reduced model or network coupling.
inline CoefficientInterp computed_coefficients(const Model& model, const std::vector<double>& anchors,
                                               std::size_t n_modes, const OrbitOptions& opt = {}) {
  CoefficientInterp ci;
  ci.anchors = anchors;
  for (double q : anchors) {
    const LimitCycle c = find_limit_cycle(model, q, opt);
    const AdjointCurve z = compute_adjoint(c, model.field);
    ci.series.push_back(fourier_fit(interaction_h(c, z, model.coupling), n_modes));
  }
  return ci;
}

/// Slow-passage experiment: integrate to tau_perturb, overwrite phi with
/// each delta, continue to tau_end and report the first jump-up after the
/// perturbation.
struct PerturbationRun {
  double delta = 0.0;
  PhaseSeries series;  // from tau_perturb on
  double jump = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<PerturbationRun> perturbation_protocol(
    const GSpec& spec, const SlowSignal& signal, double phi0, double tau_perturb,
    const std::vector<double>& deltas, double tau_end, double dtau, const JumpOptions& jumps = {},
    std::size_t stride = 1) {
  const PhaseSeries head = integrate_phase_pair(spec, phi0, signal, tau_perturb, dtau);
  std::vector<PerturbationRun> out;
  for (double delta : deltas) {
    PerturbationRun r;
    r.delta = delta;
    r.series = integrate_phase_pair(spec, delta, signal, tau_end, dtau, stride, head.times.back());
    const auto j = jump_time(r.series, jumps);
    if (!j.empty()) r.jump = j.front();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace phasemod
