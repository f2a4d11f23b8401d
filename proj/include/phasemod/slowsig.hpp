#pragma once

// Slow parameter generators q(tau): constant, periodic, quasi-periodic and a
// normalized Ornstein-Uhlenbeck path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phasemod/error.hpp"

namespace phasemod {

/// Standard normal deviates from std::mt19937_64 via the Box-Muller
/// transform. mt19937_64 is fully specified by the standard and the
/// transform is written out here, so paths are bit-identical across
/// standard library implementations.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform_open() {  // (0, 1]
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct OuPath {
  std::uint64_t seed = 0;
  double mu = 1000.0;
  double time_scale = 1.0;  // tau = time_scale * t, the OU equation runs in t
  double dtau = 0.0;
  std::vector<double> z;    // normalized to [-1, 1]

  double tau_max() const { return dtau * static_cast<double>(z.size() - 1); }
};

/// Euler-Maruyama on mu dz = -z dt + sqrt(mu) dW with t = tau / time_scale,
/// sampled on a uniform tau grid from z(0) = 0, then affinely rescaled so the
/// realized path has min -1 and max +1.
inline OuPath gen_ou(std::uint64_t seed, double mu, double dtau, double tau_max,
                     double time_scale = 1.0) {
  if (!(dtau > 0.0) || !(tau_max > 0.0) || !(mu > 0.0) || !(time_scale > 0.0))
    throw Error(Errc::configuration, "slowsig", "gen_ou requires positive mu, dtau, tau_max");
  OuPath p;
  p.seed = seed;
  p.mu = mu;
  p.time_scale = time_scale;
  p.dtau = dtau;
  const auto n = static_cast<std::size_t>(std::ceil(tau_max / dtau - 1e-9)) + 1;
  p.z.resize(n);
  GaussianSource gauss(seed);
  const double dt = dtau / time_scale;
  const double decay = dt / mu;
  const double kick = std::sqrt(dt / mu);
  double z = 0.0;
  p.z[0] = z;
  for (std::size_t k = 1; k < n; ++k) {
    z += -z * decay + kick * gauss();
    p.z[k] = z;
  }
  const auto [lo, hi] = std::minmax_element(p.z.begin(), p.z.end());
  const double zmin = *lo, zmax = *hi;
  const double span = zmax - zmin;
  for (double& v : p.z) v = span > 0.0 ? 2.0 * (v - zmin) / span - 1.0 : 0.0;
  // Pin the extremes exactly against rounding.
  p.z[static_cast<std::size_t>(lo - p.z.begin())] = -1.0;
  p.z[static_cast<std::size_t>(hi - p.z.begin())] = 1.0;
  return p;
}

enum class SignalKind { constant, periodic, quasiperiodic, ou };

inline std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::constant: return "constant";
    case SignalKind::periodic: return "periodic";
    case SignalKind::quasiperiodic: return "quasiperiodic";
    case SignalKind::ou: return "ou";
  }
  return "unknown";
}

inline SignalKind parse_signal_kind(std::string_view s) {
  if (s == "constant") return SignalKind::constant;
  if (s == "periodic") return SignalKind::periodic;
  if (s == "quasiperiodic") return SignalKind::quasiperiodic;
  if (s == "ou") return SignalKind::ou;
  throw Error(Errc::configuration, "slowsig", "unknown signal kind '" + std::string(s) + "'");
}

struct SignalValue {
  double q = 0.0;
  double dq_dtau = 0.0;
};

class SlowSignal {
 public:
  static SlowSignal constant(double q0) { return SlowSignal(SignalKind::constant, q0, 0.0, 0.0); }
  static SlowSignal periodic(double q0, double q1, double f) {
    return SlowSignal(SignalKind::periodic, q0, q1, f);
  }
  static SlowSignal quasiperiodic(double q0, double q1, double f) {
    return SlowSignal(SignalKind::quasiperiodic, q0, q1, f);
  }
  static SlowSignal ou(double q0, double q1, OuPath path) {
    SlowSignal s(SignalKind::ou, q0, q1, 0.0);
    s.path_ = std::make_shared<const OuPath>(std::move(path));
    return s;
  }

  SignalKind kind() const { return kind_; }
  double q0() const { return q0_; }
  double q1() const { return q1_; }
  double f() const { return f_; }
  const OuPath* path() const { return path_.get(); }

  double value(double tau) const { return eval(tau).q; }

  SignalValue eval(double tau) const {
    switch (kind_) {
      case SignalKind::constant: return {q0_, 0.0};
      case SignalKind::periodic:
        return {q0_ + q1_ * std::cos(f_ * tau), -q1_ * f_ * std::sin(f_ * tau)};
      case SignalKind::quasiperiodic: {
        const double r = std::numbers::sqrt2;
        return {q0_ + 0.5 * q1_ * (std::cos(f_ * tau) + std::cos(f_ * r * tau)),
                -0.5 * q1_ * f_ * (std::sin(f_ * tau) + r * std::sin(f_ * r * tau))};
      }
      case SignalKind::ou: {
        const double z = path_z(tau);
        const double d = path_->dtau;
        const double lo = std::max(0.0, tau - d);
        const double hi = std::min(path_->tau_max(), tau + d);
        const double dz = (path_z(hi) - path_z(lo)) / (hi - lo);
        return {q0_ + q1_ * z, q1_ * dz};
      }
    }
    return {q0_, 0.0};
  }

  /// Largest tau at which the signal is defined.
  double tau_max() const {
    return kind_ == SignalKind::ou ? path_->tau_max() : std::numeric_limits<double>::infinity();
  }

 private:
  SlowSignal(SignalKind k, double q0, double q1, double f) : kind_(k), q0_(q0), q1_(q1), f_(f) {}

  double path_z(double tau) const {
    const double tmax = path_->tau_max();
    if (tau < -1e-9 || tau > tmax + 1e-9) {
      std::ostringstream msg;
      msg << "tau=" << tau << " outside OU path span [0, " << tmax << "]";
      throw Error(Errc::out_of_range, "slowsig", msg.str());
    }
    tau = std::clamp(tau, 0.0, tmax);
    const double x = tau / path_->dtau;
    auto i = static_cast<std::size_t>(x);
    if (i + 1 >= path_->z.size()) return path_->z.back();
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * path_->z[i] + w * path_->z[i + 1];
  }

  SignalKind kind_;
  double q0_, q1_, f_;
  std::shared_ptr<const OuPath> path_;
};

/// Time average of q over [0, tau_end] by the trapezoid rule on n intervals.
inline double signal_mean(const SlowSignal& s, double tau_end, std::size_t n = 100000) {
  const double h = tau_end / static_cast<double>(n);
  double acc = 0.5 * (s.value(0.0) + s.value(tau_end));
  for (std::size_t k = 1; k < n; ++k) acc += s.value(h * static_cast<double>(k));
  return acc / static_cast<double>(n);
}

}  // namespace phasemod
