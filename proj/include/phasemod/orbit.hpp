#pragma once

// Limit-cycle location at frozen q and the parametric derivative dU0/dq.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "phasemod/csv.hpp"
#include "phasemod/dynsys.hpp"
#include "phasemod/models.hpp"

namespace phasemod {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// The 2pi-periodic orbit U0(s, q) on the grid s_k = 2 pi k / M, with s = 0
/// at the model's section crossing.
struct LimitCycle {
  double q = 0.0;
  double period = 0.0;
  double omega = 0.0;
  std::size_t dim = 0;
  std::vector<State> U0;
  std::vector<State> dU0_ds;
  double dt = 0.0;                 // integration step used to resample
  double periodicity_defect = 0.0; // relative to orbit amplitude
  double residual = 0.0;           // max |omega dU/ds - F| / max |F|

  std::size_t size() const { return U0.size(); }
  double ds() const { return two_pi / static_cast<double>(U0.size()); }
};

struct CycleDerivative {
  double q = 0.0;
  double dq_used = 0.0;
  bool one_sided = false;
  std::vector<State> dU0_dq;
};

struct OrbitOptions {
  std::size_t grid_size = 512;
  int settle_periods = 20;
  double tol = 1e-7;
  double dt = 0.0;             // 0 = model default
  double max_return_time = 500.0;
  int max_returns = 3000;
};

namespace detail {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / (1.0 + std::abs(a[i])));
  return m;
}

// Spectral derivative of uniformly sampled 2pi-periodic data (direct DFT;
// the Nyquist mode is dropped).
inline std::vector<State> periodic_derivative(const std::vector<State>& f, double h) {
  const std::size_t M = f.size();
  const std::size_t n = f.empty() ? 0 : f[0].size();
  std::vector<State> d(M, State(n, 0.0));
  std::vector<double> cs(M), sn(M);
  for (std::size_t j = 0; j < M; ++j) {
    const double a = two_pi * static_cast<double>(j) / static_cast<double>(M);
    cs[j] = std::cos(a);
    sn[j] = std::sin(a);
  }
  // Wavenumber scale: grid spacing h corresponds to a period of M h.
  const double kscale = two_pi / (h * static_cast<double>(M));
  std::vector<double> re(M), im(M);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < M; ++k) {
      double r = 0.0, s = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        const std::size_t idx = (j * k) % M;
        r += f[j][i] * cs[idx];
        s -= f[j][i] * sn[idx];
      }
      re[k] = r;
      im[k] = s;
    }
    for (std::size_t k = 0; k < M; ++k) {
      double wave = 0.0;
      if (2 * k < M) wave = static_cast<double>(k);
      else if (2 * k > M) wave = static_cast<double>(k) - static_cast<double>(M);
      const double r = -wave * im[k] * kscale;
      const double s = wave * re[k] * kscale;
      re[k] = r;
      im[k] = s;
    }
    for (std::size_t j = 0; j < M; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < M; ++k) {
        const std::size_t idx = (j * k) % M;
        acc += re[k] * cs[idx] - im[k] * sn[idx];
      }
      d[j][i] = acc / static_cast<double>(M);
    }
  }
  return d;
}

}  // namespace detail

/// Settles onto the attractor through repeated section returns, then
/// resamples one period on a uniform phase grid.
inline LimitCycle find_limit_cycle(const VectorField& field, double q, const Section& section,
                                   std::span<const double> seed, const OrbitOptions& opt) {
  if (opt.grid_size < 8)
    throw Error(Errc::configuration, "orbit", "grid size must be at least 8");
  const double dt = opt.dt > 0.0 ? opt.dt : 1e-3;

  State x(seed.begin(), seed.end());
  SectionHit hit;
  try {
    for (int k = 0; k < opt.settle_periods; ++k) {
      hit = integrate_to_section(field, x, q, section, opt.max_return_time, dt);
      x = hit.state;
    }
    bool converged = false;
    for (int k = 0; k < opt.max_returns; ++k) {
      hit = integrate_to_section(field, x, q, section, opt.max_return_time, dt);
      const double change = detail::max_abs_diff(x, hit.state);
      x = hit.state;
      if (change < opt.tol && k > 0) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "return map did not contract at q=" << q;
      throw Error(Errc::no_convergence, "orbit", msg.str());
    }
  } catch (const Error& e) {
    if (e.code() == Errc::no_crossing) {
      std::ostringstream msg;
      msg << "no section crossing at q=" << q;
      throw Error(Errc::not_oscillating, "orbit", msg.str());
    }
    throw;
  }

  LimitCycle c;
  c.q = q;
  c.period = hit.time;
  c.omega = two_pi / c.period;
  c.dim = field.dim;
  const std::size_t M = opt.grid_size;
  const double grid_dt = c.period / static_cast<double>(M);
  const std::size_t sub = static_cast<std::size_t>(std::ceil(grid_dt / dt - 1e-9));
  const double h = grid_dt / static_cast<double>(sub);
  c.dt = h;

  c.U0.reserve(M);
  Rk4 rk(field.dim);
  const auto const_q = [q](double) { return q; };
  State u = x;
  for (std::size_t k = 0; k < M; ++k) {
    c.U0.push_back(u);
    for (std::size_t j = 0; j < sub; ++j) rk.step(field.rhs, u, 0.0, h, const_q);
  }

  double amp = 0.0;
  for (std::size_t i = 0; i < c.dim; ++i) {
    double lo = c.U0[0][i], hi = lo;
    for (const auto& row : c.U0) {
      lo = std::min(lo, row[i]);
      hi = std::max(hi, row[i]);
    }
    amp = std::max(amp, hi - lo);
  }
  double wrap = 0.0;
  for (std::size_t i = 0; i < c.dim; ++i) wrap = std::max(wrap, std::abs(u[i] - c.U0[0][i]));
  c.periodicity_defect = amp > 0.0 ? wrap / amp : wrap;

  c.dU0_ds.reserve(M);
  const double scale = 1.0 / c.omega;
  double fmax = 0.0;
  std::vector<State> F(M);
  for (std::size_t k = 0; k < M; ++k) {
    F[k] = field(c.U0[k], q);
    State d = F[k];
    for (double& v : d) {
      fmax = std::max(fmax, std::abs(v));
      v *= scale;
    }
    c.dU0_ds.push_back(std::move(d));
  }
  const auto dds = detail::periodic_derivative(c.U0, c.ds());
  double res = 0.0;
  for (std::size_t k = 0; k < M; ++k)
    for (std::size_t i = 0; i < c.dim; ++i)
      res = std::max(res, std::abs(c.omega * dds[k][i] - F[k][i]));
  c.residual = fmax > 0.0 ? res / fmax : res;
  return c;
}

inline LimitCycle find_limit_cycle(const Model& model, double q, const OrbitOptions& opt = {}) {
  if (q < model.q_min || q > model.q_max) {
    std::ostringstream msg;
    msg << "q=" << q << " outside admissible interval [" << model.q_min << ", " << model.q_max
        << "]";
    throw Error(Errc::out_of_range, "orbit", msg.str());
  }
  OrbitOptions o = opt;
  if (o.dt <= 0.0) o.dt = model.orbit_dt;
  return find_limit_cycle(model.field, q, model.section, model.seed, o);
}

/// dU0/dq by differencing section-anchored cycles at neighbouring q. Falls
/// back to a second-order one-sided stencil at the edges of [q_min, q_max].
inline CycleDerivative dq_cycle(const Model& model, double q, double dq = 0.0,
                                const OrbitOptions& opt = {}) {
  if (dq <= 0.0) dq = 1e-3 * (std::min(model.q_max, 1.0) - std::max(model.q_min, 0.0));
  if (q < model.q_min || q > model.q_max)
    throw Error(Errc::out_of_range, "orbit", "dq_cycle: q outside admissible interval");

  Model local = model;
  const auto cycle_at = [&](double qq) { return find_limit_cycle(local, qq, opt); };
  const LimitCycle centre = cycle_at(q);
  local.seed = centre.U0[0];

  CycleDerivative d;
  d.q = q;
  d.dq_used = dq;
  const std::size_t M = centre.size();
  d.dU0_dq.assign(M, State(centre.dim, 0.0));

  if (q - dq >= model.q_min && q + dq <= model.q_max) {
    const LimitCycle hi = cycle_at(q + dq);
    const LimitCycle lo = cycle_at(q - dq);
    for (std::size_t k = 0; k < M; ++k)
      for (std::size_t i = 0; i < centre.dim; ++i)
        d.dU0_dq[k][i] = (hi.U0[k][i] - lo.U0[k][i]) / (2.0 * dq);
    return d;
  }

  d.one_sided = true;
  const double sgn = (q - dq < model.q_min) ? 1.0 : -1.0;
  const LimitCycle c1 = cycle_at(q + sgn * dq);
  const LimitCycle c2 = cycle_at(q + sgn * 2.0 * dq);
  for (std::size_t k = 0; k < M; ++k)
    for (std::size_t i = 0; i < centre.dim; ++i)
      d.dU0_dq[k][i] =
          sgn * (-3.0 * centre.U0[k][i] + 4.0 * c1.U0[k][i] - c2.U0[k][i]) / (2.0 * dq);
  return d;
}

inline void write_cycle_csv(std::ostream& out, const LimitCycle& c,
                            std::span<const std::string> component_names) {
  std::vector<std::string> header{"s"};
  header.insert(header.end(), component_names.begin(), component_names.end());
  CsvWriter w(out, header);
  State row(c.dim + 1);
  for (std::size_t k = 0; k < c.size(); ++k) {
    row[0] = c.ds() * static_cast<double>(k);
    std::copy(c.U0[k].begin(), c.U0[k].end(), row.begin() + 1);
    w.row(row);
  }
}

inline std::vector<std::string> component_names(const Model& m) {
  if (m.name == "traub") return {"V", "n", "m", "h", "w", "syn"};
  if (m.name == "lamom") return {"x", "y"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < m.field.dim; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

}  // namespace phasemod
