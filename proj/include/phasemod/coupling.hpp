#pragma once

// Interaction functions h(phi), the adiabatic drift beta, heterogeneity
// terms eta, odd parts, truncated Fourier series with q-dependent
// coefficients, and the phase-difference right-hand side G(phi, tau).

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "phasemod/adjoint.hpp"
#include "phasemod/models.hpp"
#include "phasemod/orbit.hpp"
#include "phasemod/slowsig.hpp"

namespace phasemod {

// Every cycle average in this module is (1/2pi) times the integral over one
// period of s, i.e. the grid mean. With Z . dU0/ds = 1 this is the factor
// that makes dtheta/dtau = -beta + h exact.

/// h(phi) on phi_k = 2 pi k / M.
struct InteractionCurve {
  double q = 0.0;
  std::vector<double> h;

  std::size_t size() const { return h.size(); }

  /// Periodic linear interpolation.
  double operator()(double phi) const {
    const auto M = static_cast<double>(h.size());
    double x = std::fmod(phi, two_pi);
    if (x < 0.0) x += two_pi;
    x *= M / two_pi;
    const auto i = static_cast<std::size_t>(x) % h.size();
    const double w = x - std::floor(x);
    return (1.0 - w) * h[i] + w * h[(i + 1) % h.size()];
  }
};

/// a0 + sum_k a_k cos(k phi) + b_k sin(k phi), k = 1..n_modes.
struct FourierSeries {
  double a0 = 0.0;
  std::vector<double> a;
  std::vector<double> b;
  double residual_rms = 0.0;

  std::size_t n_modes() const { return a.size(); }

  double operator()(double phi) const {
    double v = a0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double kp = static_cast<double>(k + 1) * phi;
      v += a[k] * std::cos(kp) + b[k] * std::sin(kp);
    }
    return v;
  }

  /// The same series with phi -> -phi.
  FourierSeries reflected() const {
    FourierSeries r = *this;
    for (double& v : r.b) v = -v;
    return r;
  }
};

/// Piecewise-linear interpolation of Fourier coefficients in q, extrapolated
/// linearly beyond the outermost anchors.
struct CoefficientInterp {
  std::vector<double> anchors;
  std::vector<FourierSeries> series;
};

/// Trapezoid grid mean of Z . G(U0(s + phi), U0(s)) for every grid shift.
inline InteractionCurve interaction_h(const LimitCycle& cycle, const AdjointCurve& adj,
                                      const CouplingMap& coupling) {
  const std::size_t M = cycle.size();
  if (adj.size() != M || adj.Z.empty() || adj.Z[0].size() != cycle.dim)
    throw Error(Errc::dimension_mismatch, "coupling", "cycle and adjoint grids differ");
  InteractionCurve out;
  out.q = cycle.q;
  out.h.assign(M, 0.0);
  State g(cycle.dim);
  for (std::size_t k = 0; k < M; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      coupling(cycle.U0[(j + k) % M], cycle.U0[j], g);
      for (std::size_t i = 0; i < cycle.dim; ++i) acc += adj.Z[j][i] * g[i];
    }
    out.h[k] = acc / static_cast<double>(M);
  }
  return out;
}

/// Grid mean of Z . dU0/dq; beta = beta_coefficient * dq/dtau.
inline double beta_coefficient(const AdjointCurve& adj, const CycleDerivative& d) {
  if (adj.size() != d.dU0_dq.size())
    throw Error(Errc::dimension_mismatch, "coupling", "adjoint and dq grids differ");
  double acc = 0.0;
  for (std::size_t k = 0; k < adj.size(); ++k)
    for (std::size_t i = 0; i < adj.Z[k].size(); ++i) acc += adj.Z[k][i] * d.dU0_dq[k][i];
  return acc / static_cast<double>(adj.size());
}

inline double beta(const AdjointCurve& adj, const CycleDerivative& d, double dq_dtau) {
  return beta_coefficient(adj, d) * dq_dtau;
}

/// Grid mean of Z . f(U0, tau).
inline double eta(const AdjointCurve& adj, const LimitCycle& cycle, const HeterogeneityFn& f,
                  double tau) {
  if (adj.size() != cycle.size())
    throw Error(Errc::dimension_mismatch, "coupling", "adjoint and cycle grids differ");
  State v(cycle.dim);
  double acc = 0.0;
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    f(cycle.U0[k], tau, v);
    for (std::size_t i = 0; i < cycle.dim; ++i) acc += adj.Z[k][i] * v[i];
  }
  return acc / static_cast<double>(cycle.size());
}

/// (h(phi) - h(-phi)) / 2 on the same grid.
inline InteractionCurve h_odd(const InteractionCurve& c) {
  InteractionCurve out;
  out.q = c.q;
  const std::size_t M = c.size();
  out.h.resize(M);
  for (std::size_t k = 0; k < M; ++k) out.h[k] = 0.5 * (c.h[k] - c.h[(M - k) % M]);
  return out;
}

/// Discrete Fourier projection onto modes 0..n_modes of a uniform-grid curve.
inline FourierSeries fourier_fit(const InteractionCurve& c, std::size_t n_modes) {
  const std::size_t M = c.size();
  if (M == 0 || 2 * n_modes >= M)
    throw Error(Errc::configuration, "coupling", "too many modes for the grid");
  FourierSeries fs;
  fs.a.assign(n_modes, 0.0);
  fs.b.assign(n_modes, 0.0);
  const double dphi = two_pi / static_cast<double>(M);
  for (std::size_t j = 0; j < M; ++j) fs.a0 += c.h[j];
  fs.a0 /= static_cast<double>(M);
  for (std::size_t k = 1; k <= n_modes; ++k) {
    double ca = 0.0, sb = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      const double p = dphi * static_cast<double>(j * k % M);
      ca += c.h[j] * std::cos(p);
      sb += c.h[j] * std::sin(p);
    }
    fs.a[k - 1] = 2.0 * ca / static_cast<double>(M);
    fs.b[k - 1] = 2.0 * sb / static_cast<double>(M);
  }
  double ss = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    const double r = c.h[j] - fs(dphi * static_cast<double>(j));
    ss += r * r;
  }
  fs.residual_rms = std::sqrt(ss / static_cast<double>(M));
  return fs;
}

inline FourierSeries coeff_interp_eval(const CoefficientInterp& interp, double q) {
  const std::size_t n = interp.anchors.size();
  if (n < 2 || interp.series.size() != n)
    throw Error(Errc::configuration, "coupling", "coefficient interpolation needs two anchors");
  std::size_t i = 0;
  while (i + 2 < n && q > interp.anchors[i + 1]) ++i;
  const double q0 = interp.anchors[i], q1 = interp.anchors[i + 1];
  const FourierSeries& s0 = interp.series[i];
  const FourierSeries& s1 = interp.series[i + 1];
  if (q == q0) return s0;
  if (q == q1) return s1;
  const double w = (q - q0) / (q1 - q0);
  const auto lerp = [w](double a, double b) { return a + w * (b - a); };
  FourierSeries out;
  out.a0 = lerp(s0.a0, s1.a0);
  const std::size_t m = std::min(s0.n_modes(), s1.n_modes());
  out.a.resize(m);
  out.b.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    out.a[k] = lerp(s0.a[k], s1.a[k]);
    out.b[k] = lerp(s0.b[k], s1.b[k]);
  }
  return out;
}

/// Phase-difference right-hand side G(phi, tau) = core(phi, q(tau)) + offsets.
///
/// core is one of
///  - closed form 2(kappa q - 1) sin(phi) for the lambda-omega pair,
///  - h(-phi) - h(phi) from tabulated curves interpolated linearly in q,
///  - h(-phi) - h(phi) = -2 sum_k b_k(q) sin(k phi) from a truncated series.
struct LamomCore {
  double kappa = 1.0;
};
struct GriddedCore {
  std::vector<InteractionCurve> curves;  // ordered by q
};
struct TruncatedCore {
  CoefficientInterp interp;  // coefficients of h(phi)
};

struct GSpec {
  using LamomClosed = LamomCore;
  using Gridded = GriddedCore;
  using Truncated = TruncatedCore;

  std::variant<LamomClosed, Gridded, Truncated> core;
  double detuning = 0.0;                  // constant d
  std::function<double(double)> offset;   // eta_b(tau) - eta_a(tau); empty = 0
};

namespace detail {

inline double gridded_h(const GSpec::Gridded& g, double q, double phi) {
  const auto& c = g.curves;
  if (c.size() == 1) return c[0](phi);
  std::size_t i = 0;
  while (i + 2 < c.size() && q > c[i + 1].q) ++i;
  const double w = (q - c[i].q) / (c[i + 1].q - c[i].q);
  return (1.0 - w) * c[i](phi) + w * c[i + 1](phi);
}

}  // namespace detail

inline double g_spec_core(const GSpec& spec, double phi, double q) {
  return std::visit(
      [&](const auto& core) -> double {
        using T = std::decay_t<decltype(core)>;
        if constexpr (std::is_same_v<T, GSpec::LamomClosed>) {
          return lamom_G_exact(core.kappa, q, phi);
        } else if constexpr (std::is_same_v<T, GSpec::Gridded>) {
          return detail::gridded_h(core, q, -phi) - detail::gridded_h(core, q, phi);
        } else {
          const FourierSeries fs = coeff_interp_eval(core.interp, q);
          double v = 0.0;
          for (std::size_t k = 0; k < fs.n_modes(); ++k)
            v -= 2.0 * fs.b[k] * std::sin(static_cast<double>(k + 1) * phi);
          return v;
        }
      },
      spec.core);
}

inline double g_spec_eval(const GSpec& spec, double phi, double tau, const SlowSignal& signal) {
  double v = g_spec_core(spec, phi, signal.value(tau)) + spec.detuning;
  if (spec.offset) v += spec.offset(tau);
  return v;
}

/// Traub interaction-function coefficients at q = 0.1 and 0.3 as published,
/// stored in the convention dphi/dtau = 2 (b1 sin phi + b2 sin 2 phi).
inline CoefficientInterp traub_published_coefficients() {
  CoefficientInterp ci;
  ci.anchors = {0.1, 0.3};
  FourierSeries lo, hi;
  lo.a0 = 19.6011939665;
  lo.a = {-3.32476526025, -0.255371105623};
  lo.b = {0.721387113706, 0.738312597998};
  hi.a0 = 17.4255017198;
  hi.a = {-6.97305767558, -0.83690237427};
  hi.b = {-1.5028098729, 1.03494013487};
  ci.series = {lo, hi};
  return ci;
}

/// Converts between the published convention and coefficients of h(phi):
/// -2 H_odd = 2 (b1 sin + b2 sin 2phi) means h carries the negated sines.
inline CoefficientInterp reflect(const CoefficientInterp& in) {
  CoefficientInterp out = in;
  for (auto& s : out.series) s = s.reflected();
  return out;
}

inline void write_curve_csv(std::ostream& out, const InteractionCurve& c,
                            const std::string& name = "h") {
  CsvWriter w(out, {"phi", name});
  const double dphi = two_pi / static_cast<double>(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) w.row({dphi * static_cast<double>(k), c.h[k]});
}

inline void write_series_csv(std::ostream& out, const FourierSeries& s) {
  CsvWriter w(out, {"k", "a_k", "b_k"});
  w.row({0.0, s.a0, 0.0});
  for (std::size_t k = 0; k < s.n_modes(); ++k)
    w.row({static_cast<double>(k + 1), s.a[k], s.b[k]});
}

}  // namespace phasemod
