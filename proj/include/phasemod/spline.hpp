#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "phasemod/error.hpp"

namespace phasemod {

/// Cubic spline through (x_i, y_i), x strictly increasing, with not-a-knot
/// ends (natural ends for fewer than four knots). Linear extrapolation
/// outside the knots.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
      throw Error(Errc::configuration, "spline", "need at least two knots");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1]))
        throw Error(Errc::configuration, "spline", "knots must be strictly increasing");
    m_.assign(n, 0.0);
    if (n == 2) return;
    // Second derivatives m_1..m_{n-2} from a tridiagonal system.
    const std::size_t k = n - 2;
    std::vector<double> lo(k, 0.0), di(k, 0.0), up(k, 0.0), r(k, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      lo[i - 1] = h0;
      di[i - 1] = 2.0 * (h0 + h1);
      up[i - 1] = h1;
      r[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    const bool not_a_knot = n >= 4;
    if (not_a_knot) {
      // m_0 = ((h0 + h1) m_1 - h0 m_2) / h1, and symmetrically at the far end.
      const double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
      di[0] += h0 * (h0 + h1) / h1;
      up[0] -= h0 * h0 / h1;
      const double g1 = x_[n - 1] - x_[n - 2], g0 = x_[n - 2] - x_[n - 3];
      di[k - 1] += g1 * (g1 + g0) / g0;
      lo[k - 1] -= g1 * g1 / g0;
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = lo[i] / di[i - 1];
      di[i] -= w * up[i - 1];
      r[i] -= w * r[i - 1];
    }
    m_[k] = r[k - 1] / di[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m_[i + 1] = (r[i] - up[i] * m_[i + 2]) / di[i];
    if (not_a_knot) {
      const double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
      m_[0] = ((h0 + h1) * m_[1] - h0 * m_[2]) / h1;
      const double g1 = x_[n - 1] - x_[n - 2], g0 = x_[n - 2] - x_[n - 3];
      m_[n - 1] = ((g1 + g0) * m_[n - 2] - g1 * m_[n - 3]) / g0;
    }
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    if (t <= x_.front()) return y_.front() + slope(0) * (t - x_.front());
    if (t >= x_.back()) return y_.back() + slope(n - 1) * (t - x_.back());
    std::size_t i = 0, j = n - 1;
    while (j - i > 1) {
      const std::size_t mid = (i + j) / 2;
      (x_[mid] <= t ? i : j) = mid;
    }
    const double h = x_[j] - x_[i];
    const double a = (x_[j] - t) / h, b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[j] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[j]) * h * h / 6.0;
  }

 private:
  double slope(std::size_t i) const {
    if (i == 0) {
      const double h = x_[1] - x_[0];
      return (y_[1] - y_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
    }
    const double h = x_[i] - x_[i - 1];
    return (y_[i] - y_[i - 1]) / h + h * (m_[i - 1] + 2.0 * m_[i]) / 6.0;
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace phasemod
