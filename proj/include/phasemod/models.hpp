#pragma once

// Concrete oscillators: the lambda-omega (Hopf) system and the Traub
// pyramidal-cell model with an M-type adaptation current and a synaptic
// gating variable.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "phasemod/dynsys.hpp"

namespace phasemod {

/// Coupling map G(x_other, x_self) -> out, evaluated without the epsilon factor.
using CouplingMap =
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;

/// Per-cell heterogeneity f(x, tau) -> out, also without the epsilon factor.
using HeterogeneityFn = std::function<void(std::span<const double>, double, std::span<double>)>;

/// Everything the pipeline needs to know about one oscillator family.
struct Model {
  std::string name;
  VectorField field;
  CouplingMap coupling;
  Section section;       // phase origin s = 0
  State seed;            // any state in the basin of the cycle
  double q_min = 0.0;    // admissible interval for the slow parameter
  double q_max = 0.0;
  std::vector<std::size_t> phase_components;  // components used for phase extraction
  double dt = 1e-3;      // default integration step
  double orbit_dt = 1e-3;  // step for frozen cycles and adjoints
};

// ---------------------------------------------------------------------------
// lambda-omega

struct LambdaOmegaParams {
  double kappa = 1.0;
  double eps = 0.0025;
  double d = 0.0;                          // frequency detuning of cell b
  std::function<double(double)> c_ab;      // modulatory heterogeneity c(tau); empty = 0
};

inline VectorField lamom_field() {
  VectorField f;
  f.dim = 2;
  f.rhs = [](std::span<const double> x, double q, double, std::span<double> dx) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const double lam = 1.0 - r2;
    const double om = 1.0 + q * (r2 - 1.0);
    dx[0] = lam * x[0] - om * x[1];
    dx[1] = om * x[0] + lam * x[1];
  };
  f.jacobian = [](std::span<const double> x, double q, std::span<double> j) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const double lam = 1.0 - r2;
    const double om = 1.0 + q * (r2 - 1.0);
    const double xx = x[0] * x[0], yy = x[1] * x[1], xy = x[0] * x[1];
    j[0] = lam - 2.0 * xx - 2.0 * q * xy;
    j[1] = -2.0 * xy - om - 2.0 * q * yy;
    j[2] = om + 2.0 * q * xx - 2.0 * xy;
    j[3] = 2.0 * q * xy + lam - 2.0 * yy;
  };
  return f;
}

/// Diffusive coupling [[1, -kappa], [kappa, 1]] (x_other - x_self).
inline CouplingMap lamom_coupling(double kappa) {
  return [kappa](std::span<const double> other, std::span<const double> self,
                 std::span<double> out) {
    const double dx = other[0] - self[0];
    const double dy = other[1] - self[1];
    out[0] = dx - kappa * dy;
    out[1] = kappa * dx + dy;
  };
}

/// Frequency heterogeneity [d + c(tau)(r^2 - 1)] * (-y, x).
inline HeterogeneityFn lamom_heterogeneity(double d, std::function<double(double)> c = {}) {
  return [d, c = std::move(c)](std::span<const double> x, double tau, std::span<double> out) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const double rate = d + (c ? c(tau) : 0.0) * (r2 - 1.0);
    out[0] = -rate * x[1];
    out[1] = rate * x[0];
  };
}

/// Closed-form phase-difference right-hand side 2(kappa q - 1) sin(phi).
inline double lamom_G_exact(double kappa, double q, double phi) {
  return 2.0 * (kappa * q - 1.0) * std::sin(phi);
}

/// Closed-form adjoint [q cos s - sin s, q sin s + cos s].
inline std::vector<double> lamom_adjoint_exact_at(double q, double s) {
  return {q * std::cos(s) - std::sin(s), q * std::sin(s) + std::cos(s)};
}

inline Model lamom_model(double kappa = 1.0) {
  Model m;
  m.name = "lamom";
  m.field = lamom_field();
  m.coupling = lamom_coupling(kappa);
  m.section = Section{1, 0.0, +1};
  m.seed = {0.5, 0.0};
  m.q_min = -10.0;
  m.q_max = 10.0;
  m.phase_components = {0, 1};
  m.dt = 1e-3;
  m.orbit_dt = 1e-3;
  return m;
}

// ---------------------------------------------------------------------------
// Traub with adaptation
//
// State layout: V (mV), n, m, h, w, s. The synaptic gate s is driven by the
// cell's own voltage and read by its partners through the coupling map.

namespace traub_idx {
inline constexpr std::size_t V = 0, n = 1, m = 2, h = 3, w = 4, s = 5;
}

struct TraubParams {
  double C = 1.0;       // uF/cm^2
  double g = 5.0;       // synaptic conductance, mS/cm^2
  double eps = 0.0025;
  double I = 3.0;       // uA/cm^2
  double V_wt = -35.0;
  double tau_w = 100.0; // ms
  double E_k = -100.0;
  double E_Na = 50.0;
  double E_l = -67.0;
  double g_l = 0.2;
  double g_k = 80.0;
  double g_Na = 100.0;
  double V_hn = -50.0;
  double a0 = 4.0;
  double tau_s = 4.0;   // ms
  double V_t = 0.0;
  double V_s = 5.0;
  double E_syn = 0.0;
  double q0 = 0.3;
  double q1 = 0.2;
};

namespace traub_rates {

/// u / (1 - exp(-u)), continuous through u = 0.
inline double exprel(double u) {
  if (std::abs(u) < 1e-6) return 1.0 + 0.5 * u + u * u / 12.0;
  return u / -std::expm1(-u);
}

inline double a_m(double V) { return 0.32 * 4.0 * exprel((V + 54.0) / 4.0); }
inline double b_m(double V) { return 0.28 * 5.0 * exprel(-(V + 27.0) / 5.0); }
inline double a_h(double V, const TraubParams& p) {
  return 0.128 * std::exp(-(V - p.V_hn) / 18.0);
}
inline double b_h(double V) { return 4.0 / (1.0 + std::exp(-(V + 27.0) / 5.0)); }
inline double a_n(double V) { return 0.032 * 5.0 * exprel((V + 52.0) / 5.0); }
inline double b_n(double V) { return 0.5 * std::exp(-(57.0 + V) / 40.0); }
inline double w_inf(double V, const TraubParams& p) {
  return 1.0 / (1.0 + std::exp(-(V - p.V_wt) / 10.0));
}
inline double t_w(double V, const TraubParams& p) {
  const double u = (V - p.V_wt) / 20.0;
  return p.tau_w / (3.3 * std::exp(u) + std::exp(-u));
}
inline double alpha(double V, const TraubParams& p) {
  return p.a0 / (1.0 + std::exp(-(V - p.V_t) / p.V_s));
}

}  // namespace traub_rates

/// Single Traub cell with its synaptic gate; q is the M-current conductance.
inline VectorField traub_field(const TraubParams& p = {}) {
  VectorField f;
  f.dim = 6;
  f.rhs = [p](std::span<const double> x, double q, double, std::span<double> dx) {
    using namespace traub_rates;
    const double V = x[0], n = x[1], m = x[2], h = x[3], w = x[4], s = x[5];
    const double n2 = n * n;
    const double i_ion = p.g_Na * m * m * m * h * (V - p.E_Na) +
                         (p.g_k * n2 * n2 + q * w) * (V - p.E_k) + p.g_l * (V - p.E_l);
    dx[0] = (p.I - i_ion) / p.C;
    dx[1] = a_n(V) * (1.0 - n) - b_n(V) * n;
    dx[2] = a_m(V) * (1.0 - m) - b_m(V) * m;
    dx[3] = a_h(V, p) * (1.0 - h) - b_h(V) * h;
    dx[4] = (w_inf(V, p) - w) / t_w(V, p);
    dx[5] = alpha(V, p) * (1.0 - s) - s / p.tau_s;
  };
  return f;
}

/// Excitatory synapse: g s_other (E_syn - V_self) / C on the voltage only.
inline CouplingMap traub_coupling(const TraubParams& p = {}) {
  return [p](std::span<const double> other, std::span<const double> self,
             std::span<double> out) {
    for (double& v : out) v = 0.0;
    out[0] = p.g * other[5] * (p.E_syn - self[0]) / p.C;
  };
}

inline Model traub_model(const TraubParams& p = {}) {
  Model m;
  m.name = "traub";
  m.field = traub_field(p);
  m.coupling = traub_coupling(p);
  m.section = Section{0, -20.0, +1};
  m.seed = {-65.0, 0.1, 0.05, 0.6, 0.1, 0.0};
  m.q_min = 0.0;
  m.q_max = 0.6;
  m.phase_components = {0, 1};
  m.dt = 0.01;
  m.orbit_dt = 0.002;
  return m;
}

}  // namespace phasemod
