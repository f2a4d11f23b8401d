#pragma once

// Adjoint (infinitesimal phase response curve) of a frozen-q limit cycle.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "phasemod/dynsys.hpp"
#include "phasemod/orbit.hpp"

namespace phasemod {

/// Z(s, q) on the cycle grid, normalized so Z . dU0/ds = 1.
struct AdjointCurve {
  double q = 0.0;
  std::vector<State> Z;
  double normalization_defect = 0.0;  // max |Z . dU0/ds - 1|
  double residual = 0.0;              // max |omega dZ/ds + A^T Z| / max |A^T Z|
  int periods_used = 0;

  std::size_t size() const { return Z.size(); }
};

struct AdjointOptions {
  int max_periods = 400;
  double tol = 1e-7;
  double normalization_tol = 1e-4;
};

/// Relaxes the adjoint equation backward in time over repeated periods (the
/// periodic solution is the only non-decaying mode in that direction), then
/// rescales it once so that the grid mean of Z . dU0/ds is one.
inline AdjointCurve compute_adjoint(const LimitCycle& cycle, const VectorField& field,
                                    const AdjointOptions& opt = {}) {
  const std::size_t M = cycle.size();
  const std::size_t n = cycle.dim;
  if (M == 0 || field.dim != n)
    throw Error(Errc::dimension_mismatch, "adjoint", "cycle and field dimensions differ");

  // Dense orbit at half-step resolution so each RK4 stage has its A(t).
  const double grid_dt = cycle.period / static_cast<double>(M);
  const std::size_t sub = static_cast<std::size_t>(std::llround(grid_dt / cycle.dt));
  const double h = grid_dt / static_cast<double>(sub);
  const std::size_t steps = M * sub;
  const std::size_t dense = 2 * steps + 1;

  std::vector<Matrix> At(dense);
  {
    Rk4 rk(n);
    const double q = cycle.q;
    const auto const_q = [q](double) { return q; };
    State u = cycle.U0[0];
    for (std::size_t k = 0; k < dense; ++k) {
      Matrix A = jacobian(field, u, q);
      Matrix T(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) T(i, j) = A(j, i);
      At[k] = std::move(T);
      if (k + 1 < dense) rk.step(field.rhs, u, 0.0, 0.5 * h, const_q);
    }
  }

  const auto apply = [n](const Matrix& T, const State& z, State& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += T(i, j) * z[j];
      out[i] = acc;
    }
  };

  // dZ/dsigma = A^T(T - sigma) Z with sigma = T - t.
  State z(n, 1.0);
  State k1(n), k2(n), k3(n), k4(n), tmp(n);
  std::vector<State> grid(M, State(n));
  const auto norm = [](const State& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  AdjointCurve out;
  out.q = cycle.q;
  bool converged = false;
  State previous = z;
  for (int period = 1; period <= opt.max_periods; ++period) {
    for (std::size_t step = steps; step-- > 0;) {
      // Integrate from dense index 2(step+1) back to 2 step.
      const std::size_t i0 = 2 * (step + 1);
      if ((step + 1) % sub == 0) grid[((step + 1) / sub) % M] = z;
      apply(At[i0], z, k1);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
      apply(At[i0 - 1], tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
      apply(At[i0 - 1], tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h * k3[i];
      apply(At[i0 - 2], tmp, k4);
      for (std::size_t i = 0; i < n; ++i)
        z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    grid[0] = z;
    if (!all_finite(z))
      throw Error(Errc::adjoint_not_converged, "adjoint", "adjoint iteration overflowed");
    const double scale = norm(z);
    for (double& v : z) v /= scale;
    for (auto& row : grid)
      for (double& v : row) v /= scale;
    State diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = z[i] - previous[i];
    const double change = norm(diff);
    previous = z;
    out.periods_used = period;
    if (period > 1 && change < opt.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw Error(Errc::adjoint_not_converged, "adjoint", "no periodic adjoint within budget");

  double mean = 0.0;
  for (std::size_t k = 0; k < M; ++k)
    for (std::size_t i = 0; i < n; ++i) mean += grid[k][i] * cycle.dU0_ds[k][i];
  mean /= static_cast<double>(M);
  for (auto& row : grid)
    for (double& v : row) v /= mean;

  double defect = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += grid[k][i] * cycle.dU0_ds[k][i];
    defect = std::max(defect, std::abs(dot - 1.0));
  }
  out.normalization_defect = defect;
  if (defect > opt.normalization_tol) {
    std::ostringstream msg;
    msg << "pointwise normalization defect " << defect << " at q=" << cycle.q;
    throw Error(Errc::normalization_failed, "adjoint", msg.str());
  }

  const auto dZ = detail::periodic_derivative(grid, cycle.ds());
  double res = 0.0, scale = 0.0;
  State atz(n);
  for (std::size_t k = 0; k < M; ++k) {
    const Matrix A = jacobian(field, cycle.U0[k], cycle.q);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += A(j, i) * grid[k][j];
      atz[i] = acc;
      scale = std::max(scale, std::abs(acc));
      res = std::max(res, std::abs(cycle.omega * dZ[k][i] + acc));
    }
  }
  out.residual = scale > 0.0 ? res / scale : res;
  out.Z = std::move(grid);
  return out;
}

/// Trapezoid value of the solvability integral over one period of s.
inline double check_fredholm(const LimitCycle& cycle, const AdjointCurve& adj,
                             const std::vector<State>& rhs) {
  if (rhs.size() != adj.size() || cycle.size() != adj.size())
    throw Error(Errc::dimension_mismatch, "adjoint", "rhs not sampled on the cycle grid");
  double acc = 0.0;
  for (std::size_t k = 0; k < rhs.size(); ++k)
    for (std::size_t i = 0; i < rhs[k].size(); ++i) acc += adj.Z[k][i] * rhs[k][i];
  return acc * cycle.ds();
}

inline void write_adjoint_csv(std::ostream& out, const LimitCycle& c, const AdjointCurve& z,
                              std::span<const std::string> component_names) {
  std::vector<std::string> header{"s"};
  for (const auto& name : component_names) header.push_back("Z_" + name);
  CsvWriter w(out, header);
  State row(c.dim + 1);
  for (std::size_t k = 0; k < z.size(); ++k) {
    row[0] = c.ds() * static_cast<double>(k);
    std::copy(z.Z[k].begin(), z.Z[k].end(), row.begin() + 1);
    w.row(row);
  }
}

}  // namespace phasemod
