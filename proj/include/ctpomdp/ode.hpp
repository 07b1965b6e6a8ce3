#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ctpomdp/error.hpp"

namespace ctpomdp {

struct OdeOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  double initial_step = 0.0;  // 0 selects automatically
  std::size_t max_steps = 10'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Adaptive Dormand-Prince 5(4) integrator advancing y from t0 to t1.
///
/// `rhs(t, y, dydt)` evaluates the vector field. `project(y)` is applied to
/// every accepted step; it lets callers keep the state inside its domain
/// (clamping, renormalization). The step size is controlled with the RMS
/// norm of the embedded error scaled by abs_tol + rel_tol * |y|.
template <class Rhs, class Project>
OdeStats integrate_adaptive(Rhs&& rhs, std::vector<double>& y, double t0, double t1,
                            const OdeOptions& opt, Project&& project) {
  OdeStats stats;
  const double span = t1 - t0;
  require(span >= 0.0, ErrorKind::invalid_argument, "ode: negative integration horizon");
  if (span == 0.0 || y.empty()) return stats;

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const std::size_t n = y.size();
  std::array<std::vector<double>, 7> k;
  for (auto& v : k) v.resize(n);
  std::vector<double> tmp(n), ynew(n);

  auto scale = [&](double a, double b) {
    return opt.abs_tol + opt.rel_tol * std::max(std::fabs(a), std::fabs(b));
  };

  double t = t0;
  rhs(t, y, k[0]);

  double h = opt.initial_step;
  if (h <= 0.0) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = scale(y[i], y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k[0][i] / sc) * (k[0][i] / sc);
    }
    d0 = std::sqrt(d0 / static_cast<double>(n));
    d1 = std::sqrt(d1 / static_cast<double>(n));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  }
  h = std::min(h, span);

  while (t < t1) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      throw Error(ErrorKind::integrator, "ode: step budget exhausted at t=" + std::to_string(t), t);
    bool last = false;
    if (t + h >= t1 || t1 - (t + h) < 1e-12 * std::max(1.0, std::fabs(t1))) {
      h = t1 - t;
      last = true;
    }

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k[0][i];
    rhs(t + c2 * h, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
    rhs(t + c3 * h, tmp, k[2]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    rhs(t + c4 * h, tmp, k[3]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    rhs(t + c5 * h, tmp, k[4]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] +
                           a65 * k[4][i]);
    rhs(t + h, tmp, k[5]);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] +
                            b6 * k[5][i]);
    rhs(t + h, ynew, k[6]);

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] +
                            e6 * k[5][i] + e7 * k[6][i]);
      const double r = e / scale(y[i], ynew[i]);
      err += r * r;
    }
    err = std::sqrt(err / static_cast<double>(n));

    if (!std::isfinite(err)) err = 1e10;
    if (err <= 1.0) {
      t = last ? t1 : t + h;
      y.swap(ynew);
      project(y);
      ++stats.accepted;
      if (last) break;
      rhs(t, y, k[0]);
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
    if (h < 1e-14 * std::max(1.0, std::fabs(t)))
      throw Error(ErrorKind::integrator, "ode: step size underflow at t=" + std::to_string(t), t);
  }
  return stats;
}

template <class Rhs>
OdeStats integrate_adaptive(Rhs&& rhs, std::vector<double>& y, double t0, double t1,
                            const OdeOptions& opt = {}) {
  return integrate_adaptive(std::forward<Rhs>(rhs), y, t0, t1, opt, [](std::vector<double>&) {});
}

}  // namespace ctpomdp
