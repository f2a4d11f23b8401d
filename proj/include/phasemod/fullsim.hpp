#pragma once

// Full ODE simulations of coupled pairs and all-to-all networks under slow
// modulation, nearest-point phase extraction, and full-vs-reduced comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "phasemod/adjoint.hpp"
#include "phasemod/coupling.hpp"
#include "phasemod/csv.hpp"
#include "phasemod/dynsys.hpp"
#include "phasemod/models.hpp"
#include "phasemod/orbit.hpp"
#include "phasemod/reduce.hpp"
#include "phasemod/slowsig.hpp"

namespace phasemod {

// ---------------------------------------------------------------------------
// Phase extraction

/// Nearest point on a reference cycle under a variance-weighted metric over
/// selected components.
struct PhaseExtractor {
  LimitCycle reference;
  std::vector<std::size_t> components;
  std::vector<double> weights;  // 1 / variance of each component over the cycle
  bool refine = true;
};

inline PhaseExtractor make_extractor(LimitCycle reference, std::vector<std::size_t> components,
                                     bool refine = true) {
  PhaseExtractor ex;
  for (std::size_t c : components) {
    if (c >= reference.dim)
      throw Error(Errc::dimension_mismatch, "fullsim", "extractor component out of range");
    double mean = 0.0;
    for (const auto& u : reference.U0) mean += u[c];
    mean /= static_cast<double>(reference.size());
    double var = 0.0;
    for (const auto& u : reference.U0) var += (u[c] - mean) * (u[c] - mean);
    var /= static_cast<double>(reference.size());
    if (!(var > 0.0))
      throw Error(Errc::configuration, "fullsim", "extractor component has zero variance");
    ex.weights.push_back(1.0 / var);
  }
  ex.reference = std::move(reference);
  ex.components = std::move(components);
  ex.refine = refine;
  return ex;
}

/// Extractor on the frozen cycle at q_ref using the model's phase components.
inline PhaseExtractor make_extractor(const Model& model, double q_ref,
                                     const OrbitOptions& opt = {}, bool refine = true) {
  return make_extractor(find_limit_cycle(model, q_ref, opt), model.phase_components, refine);
}

/// Squared weighted distance from `state` to reference point k.
inline double extractor_distance2(std::span<const double> state, const PhaseExtractor& ex,
                                  std::size_t k) {
  double d = 0.0;
  for (std::size_t i = 0; i < ex.components.size(); ++i) {
    const std::size_t c = ex.components[i];
    const double diff = state[c] - ex.reference.U0[k][c];
    d += ex.weights[i] * diff * diff;
  }
  return d;
}

/// Phase in [0, 2pi) of the reference point closest to `state`, optionally
/// refined by a parabola through the three squared distances around the argmin.
inline double extract_phase(std::span<const double> state, const PhaseExtractor& ex) {
  const std::size_t M = ex.reference.size();
  std::size_t best = 0;
  double dbest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < M; ++k) {
    const double d = extractor_distance2(state, ex, k);
    if (d < dbest) {
      dbest = d;
      best = k;
    }
  }
  double offset = 0.0;
  if (ex.refine) {
    const double dm = extractor_distance2(state, ex, (best + M - 1) % M);
    const double dp = extractor_distance2(state, ex, (best + 1) % M);
    const double curv = dm - 2.0 * dbest + dp;
    if (curv > 0.0) offset = std::clamp(0.5 * (dm - dp) / curv, -0.5, 0.5);
  }
  return wrap_2pi(ex.reference.ds() * (static_cast<double>(best) + offset));
}

// ---------------------------------------------------------------------------
// Pair simulation

struct PairRun {
  std::vector<double> times;  // fast time t
  std::vector<State> xa;
  std::vector<State> xb;
  std::vector<double> q;
};

struct PairConfig {
  double eps = 0.0025;
  double t_end = 1000.0;
  double dt = 0.0;            // 0 = model default
  double init_offset = 0.5;   // initial theta_b - theta_a
  std::size_t stride = 100;   // record every stride-th step
  HeterogeneityFn het_a;      // optional eps f_a(x, tau)
  HeterogeneityFn het_b;
};

/// State on the frozen cycle at phase s, by advancing U0(0) for s / omega.
inline State state_at_phase(const LimitCycle& c, const VectorField& field, double s, double dt) {
  s = wrap_2pi(s);
  State x = c.U0[0];
  if (s == 0.0) return x;
  const double q = c.q;
  return integrate_observed(field, x, [q](double) { return q; }, 0.0, s / c.omega, dt,
                            [](double, const State&, double) {});
}

/// Two cells sharing q(eps t), coupled by eps G(x_other, x_self) plus optional
/// eps f_{a,b}(x, eps t). Both start on the frozen cycle at q(0), cell b
/// advanced by init_offset in phase.
inline PairRun simulate_pair_full(const Model& model, const SlowSignal& signal,
                                  const PairConfig& cfg) {
  const std::size_t n = model.field.dim;
  const double dt = cfg.dt > 0.0 ? cfg.dt : model.dt;
  const double eps = cfg.eps;
  const LimitCycle c0 = find_limit_cycle(model, signal.value(0.0));
  State x(2 * n);
  const State xb = state_at_phase(c0, model.field, cfg.init_offset, model.orbit_dt);
  std::copy(c0.U0[0].begin(), c0.U0[0].end(), x.begin());
  std::copy(xb.begin(), xb.end(), x.begin() + static_cast<std::ptrdiff_t>(n));

  VectorField pair;
  pair.dim = 2 * n;
  pair.rhs = [&, n, eps, buf = State(n), het = State(n)](std::span<const double> s, double q,
                                                          double t, std::span<double> ds) mutable {
    const auto a = s.subspan(0, n), b = s.subspan(n, n);
    auto da = ds.subspan(0, n), db = ds.subspan(n, n);
    model.field.rhs(a, q, t, da);
    model.field.rhs(b, q, t, db);
    if (eps == 0.0) return;
    const double tau = eps * t;
    model.coupling(b, a, buf);
    for (std::size_t i = 0; i < n; ++i) da[i] += eps * buf[i];
    model.coupling(a, b, buf);
    for (std::size_t i = 0; i < n; ++i) db[i] += eps * buf[i];
    if (cfg.het_a) {
      cfg.het_a(a, tau, het);
      for (std::size_t i = 0; i < n; ++i) da[i] += eps * het[i];
    }
    if (cfg.het_b) {
      cfg.het_b(b, tau, het);
      for (std::size_t i = 0; i < n; ++i) db[i] += eps * het[i];
    }
  };

  PairRun run;
  const std::size_t stride = cfg.stride == 0 ? 1 : cfg.stride;
  const std::size_t total = detail::step_count(0.0, cfg.t_end, dt);
  std::size_t k = 0;
  integrate_observed(pair, x, [&](double t) { return signal.value(eps * t); }, 0.0, cfg.t_end,
                     dt, [&](double t, const State& s, double q) {
                       if (k % stride == 0 || k == total) {
                         run.times.push_back(t);
                         run.xa.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
                         run.xb.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(n), s.end());
                         run.q.push_back(q);
                       }
                       ++k;
                     });
  return run;
}

// ---------------------------------------------------------------------------
// Full vs reduced comparison

struct ComparisonReport {
  std::vector<double> times;  // fast time t
  std::vector<double> tau;    // eps t
  std::vector<double> q;
  std::vector<double> phi_full;     // [0, 2pi)
  std::vector<double> phi_reduced;  // [0, 2pi)
  std::vector<double> error;        // minimal-image difference
  double max_abs_error = 0.0;       // over tau >= transient
  std::vector<double> jumps_full;     // tau of jump-ups
  std::vector<double> jumps_reduced;
  std::vector<double> jump_offsets;   // reduced minus full, paired in order
};

struct CompareConfig {
  PairConfig pair;
  double q_ref = std::numeric_limits<double>::quiet_NaN();  // NaN = signal mean
  double transient_tau = 0.0;
  double dtau_reduced = 1e-3;
  bool refine = true;
  JumpOptions jumps;
};

/// Mean of q over the run, used as the extraction reference by default.
inline double reference_q(const SlowSignal& s, double tau_end) {
  if (s.kind() == SignalKind::constant) return s.q0();
  if (s.kind() == SignalKind::periodic || s.kind() == SignalKind::quasiperiodic) return s.q0();
  return signal_mean(s, std::min(tau_end, s.tau_max()));
}

inline ComparisonReport compare_pair(const Model& model, const SlowSignal& signal,
                                     const GSpec& reduced, const CompareConfig& cfg) {
  const double eps = cfg.pair.eps;
  if (!(eps > 0.0)) throw Error(Errc::configuration, "fullsim", "compare_pair needs eps > 0");
  const double tau_end = eps * cfg.pair.t_end;
  double q_ref = std::isnan(cfg.q_ref) ? reference_q(signal, tau_end) : cfg.q_ref;
  q_ref = std::clamp(q_ref, model.q_min, model.q_max);
  const PhaseExtractor ex = make_extractor(model, q_ref, {}, cfg.refine);
  const PairRun run = simulate_pair_full(model, signal, cfg.pair);

  ComparisonReport rep;
  std::vector<double> wrapped;
  for (std::size_t k = 0; k < run.times.size(); ++k) {
    rep.times.push_back(run.times[k]);
    rep.tau.push_back(eps * run.times[k]);
    rep.q.push_back(run.q[k]);
    wrapped.push_back(wrap_2pi(extract_phase(run.xb[k], ex) - extract_phase(run.xa[k], ex)));
  }
  const PhaseSeries full = unwrap_series(rep.tau, wrapped);
  const PhaseSeries red = integrate_phase_pair(reduced, full.unwrapped.front(), signal, tau_end,
                                               cfg.dtau_reduced);
  for (std::size_t k = 0; k < rep.tau.size(); ++k) {
    const double pr = red.at(rep.tau[k]);
    rep.phi_full.push_back(full.wrapped[k]);
    rep.phi_reduced.push_back(wrap_2pi(pr));
    const double e = wrap_pi(full.wrapped[k] - pr);
    rep.error.push_back(e);
    if (rep.tau[k] >= cfg.transient_tau) rep.max_abs_error = std::max(rep.max_abs_error, std::abs(e));
  }
  rep.jumps_full = jump_time(full, cfg.jumps);
  rep.jumps_reduced = jump_time(red, cfg.jumps);
  for (std::size_t i = 0; i < std::min(rep.jumps_full.size(), rep.jumps_reduced.size()); ++i)
    rep.jump_offsets.push_back(rep.jumps_reduced[i] - rep.jumps_full[i]);
  return rep;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonReport& r) {
  CsvWriter w(out, {"t", "tau", "phi_full", "phi_reduced", "error", "q"});
  for (std::size_t k = 0; k < r.times.size(); ++k)
    w.row({r.times[k], r.tau[k], r.phi_full[k], r.phi_reduced[k], r.error[k], r.q[k]});
}

// ---------------------------------------------------------------------------
// Single cell total phase from section crossings

/// Oriented section crossings of a trajectory's fast state, linearly
/// interpolated between recorded samples.
inline std::vector<double> crossing_times(const std::vector<double>& times,
                                          const std::vector<double>& values, double level,
                                          int direction = +1) {
  std::vector<double> out;
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double a = values[k - 1] - level, b = values[k] - level;
    const bool up = a < 0.0 && b >= 0.0;
    const bool down = a > 0.0 && b <= 0.0;
    if ((direction >= 0 && up) || (direction <= 0 && down)) {
      const double w = a / (a - b);
      out.push_back(times[k - 1] + w * (times[k] - times[k - 1]));
    }
  }
  return out;
}

struct SingleCellRun {
  std::vector<double> crossings;  // t of successive section crossings
  LimitCycle initial_cycle;
};

/// One uncoupled cell under q(eps t), started at phase 0 of the frozen cycle
/// at q(0). The k-th recorded crossing (k = 1, 2, ...) is total phase 2 pi k;
/// the starting point itself is not reported.
inline SingleCellRun simulate_single_full(const Model& model, const SlowSignal& signal,
                                          double eps, double t_end, double dt,
                                          const OrbitOptions& orbit = {}) {
  SingleCellRun run;
  run.initial_cycle = find_limit_cycle(model, signal.value(0.0), orbit);
  const std::size_t c = model.section.component;
  const double level = model.section.level;
  double prev_t = 0.0, prev_v = run.initial_cycle.U0[0][c];
  bool first = true;
  integrate_observed(model.field, run.initial_cycle.U0[0],
                     [&](double t) { return signal.value(eps * t); }, 0.0, t_end, dt,
                     [&](double t, const State& x, double) {
                       const double v = x[c];
                       if (!first && t > 0.25 * run.initial_cycle.period) {
                         const double a = prev_v - level, b = v - level;
                         if ((model.section.direction >= 0 && a < 0.0 && b >= 0.0) ||
                             (model.section.direction < 0 && a > 0.0 && b <= 0.0))
                           run.crossings.push_back(prev_t + a / (a - b) * (t - prev_t));
                       }
                       first = false;
                       prev_t = t;
                       prev_v = v;
                     });
  return run;
}

// ---------------------------------------------------------------------------
// Network simulation

struct NetworkConfig {
  std::size_t count = 51;
  double eps = 0.0025;
  double t_end = 1000.0;
  double dt = 0.0;             // 0 = model default
  double spread = 0.2;         // initial phases uniform in [0, spread]
  std::uint64_t seed = 1;
  bool identical = false;      // all cells start at phase 0
  std::size_t stride = 10;     // V_tot sampling stride
};

struct NetworkRun {
  std::vector<double> times;
  std::vector<double> v_tot;
  std::vector<double> q;
  std::vector<std::vector<double>> spikes;  // per cell
  std::vector<double> v_first;              // cell 0, for symmetry checks
};

/// All-to-all network. Each cell receives eps G(x_mean, x_i) where x_mean is
/// the component-wise mean over all cells including itself; for couplings
/// affine in the presynaptic state (synaptic and diffusive ones are) this is
/// the mean of the pairwise terms.
inline NetworkRun simulate_network_full(const Model& model, const SlowSignal& signal,
                                        const NetworkConfig& cfg) {
  const std::size_t n = model.field.dim;
  const std::size_t N = cfg.count;
  if (N == 0) throw Error(Errc::configuration, "fullsim", "network needs at least one cell");
  const double dt = cfg.dt > 0.0 ? cfg.dt : model.dt;
  const double eps = cfg.eps;
  const LimitCycle c0 = find_limit_cycle(model, signal.value(0.0));

  State x(N * n);
  GaussianSource rng(cfg.seed);
  std::vector<double> phases(N, 0.0);
  if (!cfg.identical)
    for (double& p : phases) p = cfg.spread * (1.0 - rng.uniform_open());
  for (std::size_t i = 0; i < N; ++i) {
    const State xi = state_at_phase(c0, model.field, phases[i], model.orbit_dt);
    std::copy(xi.begin(), xi.end(), x.begin() + static_cast<std::ptrdiff_t>(i * n));
  }

  VectorField net;
  net.dim = N * n;
  net.rhs = [&, n, N, eps, mean = State(n), buf = State(n)](
                std::span<const double> s, double q, double t, std::span<double> ds) mutable {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < n; ++c) mean[c] += s[i * n + c];
    for (double& m : mean) m /= static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto xi = s.subspan(i * n, n);
      auto di = ds.subspan(i * n, n);
      model.field.rhs(xi, q, t, di);
      if (eps != 0.0) {
        model.coupling(mean, xi, buf);
        for (std::size_t c = 0; c < n; ++c) di[c] += eps * buf[c];
      }
    }
  };

  NetworkRun run;
  run.spikes.resize(N);
  const std::size_t vc = model.section.component;
  const double level = model.section.level;
  std::vector<double> prev(N);
  for (std::size_t i = 0; i < N; ++i) prev[i] = x[i * n + vc];
  double prev_t = 0.0;
  const std::size_t stride = cfg.stride == 0 ? 1 : cfg.stride;
  const std::size_t total = detail::step_count(0.0, cfg.t_end, dt);
  std::size_t k = 0;
  integrate_observed(net, x, [&](double t) { return signal.value(eps * t); }, 0.0, cfg.t_end, dt,
                     [&](double t, const State& s, double q) {
                       for (std::size_t i = 0; i < N; ++i) {
                         const double v = s[i * n + vc];
                         const double a = prev[i] - level, b = v - level;
                         if (k > 0 && a < 0.0 && b >= 0.0)
                           run.spikes[i].push_back(prev_t + a / (a - b) * (t - prev_t));
                         prev[i] = v;
                       }
                       prev_t = t;
                       if (k % stride == 0 || k == total) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < N; ++i) acc += s[i * n + vc];
                         run.times.push_back(t);
                         run.v_tot.push_back(acc / static_cast<double>(N));
                         run.q.push_back(q);
                         run.v_first.push_back(s[vc]);
                       }
                       ++k;
                     });
  return run;
}

/// Centered sliding-window population variance of a uniformly sampled
/// series; the window shrinks at the ends.
inline std::vector<double> windowed_variance(const std::vector<double>& series, double sample_dt,
                                             double window) {
  const std::size_t n = series.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  const auto half = static_cast<std::size_t>(std::max(0.0, std::round(0.5 * window / sample_dt)));
  // Prefix sums of shifted values keep the running variance well conditioned.
  const double shift = series[0];
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double v = series[k] - shift;
    s1[k + 1] = s1[k] + v;
    s2[k + 1] = s2[k] + v * v;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k > half ? k - half : 0;
    const std::size_t hi = std::min(n, k + half + 1);
    const double m = static_cast<double>(hi - lo);
    const double mean = (s1[hi] - s1[lo]) / m;
    out[k] = std::max(0.0, (s2[hi] - s2[lo]) / m - mean * mean);
  }
  return out;
}

inline void write_network_csv(std::ostream& out, const NetworkRun& r,
                              const std::vector<double>& variance) {
  CsvWriter w(out, {"t", "V_tot", "variance", "q"});
  for (std::size_t k = 0; k < r.times.size(); ++k)
    w.row({r.times[k], r.v_tot[k], variance.empty() ? 0.0 : variance[k], r.q[k]});
}

inline void write_spikes_csv(std::ostream& out, const NetworkRun& r) {
  CsvWriter w(out, {"cell", "t_spike"});
  for (std::size_t i = 0; i < r.spikes.size(); ++i)
    for (double t : r.spikes[i]) w.row({static_cast<double>(i), t});
}

}  // namespace phasemod
