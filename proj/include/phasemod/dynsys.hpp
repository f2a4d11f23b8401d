#pragma once

// Vector fields, fixed-step RK4 integration and section-crossing detection.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "phasemod/error.hpp"

namespace phasemod {

using State = std::vector<double>;

/// rhs(x, q, t, dxdt): writes the time derivative of x into dxdt.
using RhsFn = std::function<void(std::span<const double>, double, double, std::span<double>)>;
/// jac(x, q, J): writes the row-major Jacobian dF_i/dx_j into J.
using JacobianFn = std::function<void(std::span<const double>, double, std::span<double>)>;
/// Slow parameter as a function of fast time t.
using ParamFn = std::function<double(double)>;

struct VectorField {
  std::size_t dim = 0;
  RhsFn rhs;
  JacobianFn jacobian;  // optional; finite differences are used when empty

  State operator()(std::span<const double> x, double q, double t = 0.0) const {
    State dx(dim);
    rhs(x, q, t, dx);
    return dx;
  }
};

/// Small dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Central-difference Jacobian with step 1e-6 * (1 + |x_j|).
inline Matrix finite_difference_jacobian(const VectorField& field, std::span<const double> x,
                                         double q) {
  const std::size_t n = field.dim;
  Matrix jac(n, n);
  State xp(x.begin(), x.end());
  State fp(n), fm(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    field.rhs(xp, q, 0.0, fp);
    xp[j] = x[j] - h;
    field.rhs(xp, q, 0.0, fm);
    xp[j] = x[j];
    for (std::size_t i = 0; i < n; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return jac;
}

inline Matrix jacobian(const VectorField& field, std::span<const double> x, double q) {
  if (!field.jacobian) return finite_difference_jacobian(field, x, q);
  Matrix jac(field.dim, field.dim);
  field.jacobian(x, q, jac.data);
  return jac;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<double> q_values;
};

/// Oriented crossing of x[component] through level; direction +1 is rising.
struct Section {
  std::size_t component = 0;
  double level = 0.0;
  int direction = +1;
};

inline bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Classical RK4 stepper with a reusable workspace. The slow parameter is
/// sampled at each substage time.
class Rk4 {
 public:
  explicit Rk4(std::size_t dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

  template <class Rhs, class Param>
  void step(const Rhs& rhs, std::span<double> x, double t, double h, const Param& q_of_t) {
    const std::size_t n = x.size();
    const double qa = q_of_t(t);
    const double qm = q_of_t(t + 0.5 * h);
    const double qb = q_of_t(t + h);
    rhs(std::span<const double>(x.data(), n), qa, t, std::span<double>(k1_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
    rhs(std::span<const double>(tmp_), qm, t + 0.5 * h, std::span<double>(k2_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
    rhs(std::span<const double>(tmp_), qm, t + 0.5 * h, std::span<double>(k3_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
    rhs(std::span<const double>(tmp_), qb, t + h, std::span<double>(k4_));
    for (std::size_t i = 0; i < n; ++i)
      x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

 private:
  State k1_, k2_, k3_, k4_, tmp_;
};

namespace detail {

[[noreturn]] inline void throw_diverged(double t) {
  std::ostringstream msg;
  msg << "non-finite state at t=" << t;
  throw Error(Errc::integration_diverged, "dynsys", msg.str());
}

inline std::size_t step_count(double t0, double t1, double dt) {
  const double n = std::ceil((t1 - t0) / dt - 1e-9);
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

}  // namespace detail

/// Integrates from t0 to t1 with uniform steps no larger than dt, landing
/// exactly on t1. observer(t, x, q) is called at t0 and after every step.
/// Returns the final state.
template <class Observer>
State integrate_observed(const VectorField& field, std::span<const double> x0,
                         const ParamFn& q_of_t, double t0, double t1, double dt,
                         Observer&& observer) {
  if (!(dt > 0.0) || !(t1 > t0))
    throw Error(Errc::configuration, "dynsys", "integrate requires dt > 0 and t1 > t0");
  if (x0.size() != field.dim)
    throw Error(Errc::dimension_mismatch, "dynsys", "initial state has wrong dimension");
  if (!all_finite(x0)) throw Error(Errc::configuration, "dynsys", "initial state not finite");

  const std::size_t n = detail::step_count(t0, t1, dt);
  const double h = (t1 - t0) / static_cast<double>(n);
  State x(x0.begin(), x0.end());
  Rk4 rk(field.dim);
  observer(t0, std::as_const(x), q_of_t(t0));
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + h * static_cast<double>(k);
    rk.step(field.rhs, x, t, h, q_of_t);
    const double tn = (k + 1 == n) ? t1 : t0 + h * static_cast<double>(k + 1);
    if (!all_finite(x)) detail::throw_diverged(tn);
    observer(tn, std::as_const(x), q_of_t(tn));
  }
  return x;
}

/// Fixed-step RK4 trajectory, recording every `stride`-th step (the final
/// step is always recorded).
inline Trajectory integrate(const VectorField& field, std::span<const double> x0,
                            const ParamFn& q_of_t, double t0, double t1, double dt,
                            std::size_t stride = 1) {
  Trajectory traj;
  std::size_t k = 0;
  const std::size_t total = detail::step_count(t0, t1, dt);
  if (stride == 0) stride = 1;
  integrate_observed(field, x0, q_of_t, t0, t1, dt,
                     [&](double t, const State& x, double q) {
                       if (k % stride == 0 || k == total) {
                         traj.times.push_back(t);
                         traj.states.push_back(x);
                         traj.q_values.push_back(q);
                       }
                       ++k;
                     });
  return traj;
}

struct SectionHit {
  State state;
  double time = 0.0;
};

/// Integrates at constant q until the first oriented crossing of `section`
/// (the first step is never tested). The crossing is refined by solving for
/// the RK4 substep that lands on the level.
inline SectionHit integrate_to_section(const VectorField& field, std::span<const double> x0,
                                       double q, const Section& section, double t_max,
                                       double dt) {
  if (!(t_max > 0.0) || !(dt > 0.0))
    throw Error(Errc::configuration, "dynsys", "integrate_to_section requires t_max, dt > 0");
  if (section.component >= field.dim)
    throw Error(Errc::dimension_mismatch, "dynsys", "section component out of range");

  const auto const_q = [q](double) { return q; };
  const auto signed_gap = [&](const State& x) {
    return static_cast<double>(section.direction) * (x[section.component] - section.level);
  };

  Rk4 rk(field.dim);
  State x(x0.begin(), x0.end());
  double t = 0.0;
  rk.step(field.rhs, x, t, dt, const_q);
  t += dt;
  if (!all_finite(x)) detail::throw_diverged(t);

  State prev(field.dim), trial(field.dim);
  while (t < t_max) {
    prev = x;
    const double g0 = signed_gap(prev);
    rk.step(field.rhs, x, t, dt, const_q);
    if (!all_finite(x)) detail::throw_diverged(t + dt);
    const double g1 = signed_gap(x);
    if (g0 < 0.0 && g1 >= 0.0) {
      // Illinois regula falsi on the substep length.
      const double scale = std::max(1.0, std::abs(section.level));
      double ha = 0.0, ga = g0, hb = dt, gb = g1;
      double hc = dt, gc = g1;
      int side = 0;
      for (int it = 0; it < 100 && std::abs(gc) >= 1e-10 * scale; ++it) {
        hc = (ha * gb - hb * ga) / (gb - ga);
        trial = prev;
        rk.step(field.rhs, trial, t, hc, const_q);
        gc = signed_gap(trial);
        if ((gc < 0.0) == (ga < 0.0)) {
          ha = hc;
          ga = gc;
          if (side == -1) gb *= 0.5;
          side = -1;
        } else {
          hb = hc;
          gb = gc;
          if (side == +1) ga *= 0.5;
          side = +1;
        }
      }
      if (hc == dt) trial = x;
      return {trial, t + hc};
    }
    t += dt;
  }
  throw Error(Errc::no_crossing, "dynsys", "no section crossing before t_max");
}

}  // namespace phasemod
