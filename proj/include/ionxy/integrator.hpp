#pragma once

#include "ionxy/error.hpp"
#include "ionxy/hilbert.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ionxy {

struct IntegratorOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double norm_tolerance = 1e-7;   // accepted steps must keep | |psi| - 1 | below this
  long max_steps = 200'000'000;
};

struct IntegratorStats {
  long accepted = 0;
  long rejected = 0;
  double max_norm_error = 0.0;   // before renormalisation
  double last_step = 0.0;
};

/// Dormand-Prince 5(4) with FSAL, specialised to normalised state vectors.
/// Advances y from t0 to t1 exactly. `rhs(t, y, dy)` fills dy; `on_step(t, y)` is called
/// after each accepted step with the renormalised state. `h` carries the step suggestion
/// between calls.
template <class Rhs, class OnStep>
void dopri5_advance(Rhs&& rhs, double t0, double t1, StateVector& y, double& h, const IntegratorOptions& opt,
                    IntegratorStats& stats, OnStep&& on_step) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // b - b*, the embedded 4th-order difference
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  if (!(span > 0)) return;
  const double h_min = 1e-13 * std::max(std::abs(t1), span);
  if (!(h > 0) || !std::isfinite(h)) h = std::min(span, opt.max_step) * 1e-2;

  const auto n = y.size();
  StateVector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y5(n);
  double t = t0;
  rhs(t, y, k1);

  while (t < t1) {
    if (stats.accepted + stats.rejected > opt.max_steps)
      throw Error(ErrorKind::StepFailure, "dynamics-engine", "evolve_full",
                  fmt::format("step budget of {} exhausted at t = {:.6g}", opt.max_steps, t), "options.max_steps");
    h = std::min({h, opt.max_step, t1 - t});
    bool last = (t + h >= t1) || (t1 - (t + h) < h_min);
    if (last) h = t1 - t;

    tmp = y + h * (a21 * k1);
    rhs(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, tmp, k6);
    y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double t_new = last ? t1 : t + h;
    rhs(t_new, y5, k7);

    tmp = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      const double r = std::abs(tmp[i]) / sc;
      err += r * r;
    }
    err = std::sqrt(err / static_cast<double>(n));
    const double norm_error = std::abs(y5.norm() - 1.0);

    if (!std::isfinite(err)) err = 1e10;
    if (err <= 1.0 && norm_error <= opt.norm_tolerance) {
      stats.max_norm_error = std::max(stats.max_norm_error, norm_error);
      y5 /= y5.norm();
      y.swap(y5);
      // FSAL: k7 was evaluated on the unnormalised state; the difference is below tolerance.
      k1.swap(k7);
      t = t_new;
      ++stats.accepted;
      stats.last_step = h;
      on_step(t, y);
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (!last) h *= fac;
    } else {
      ++stats.rejected;
      const double fac = norm_error > opt.norm_tolerance ? 0.5 : std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      h *= fac;
      if (h < h_min)
        throw Error(ErrorKind::StepFailure, "dynamics-engine", "evolve_full",
                    fmt::format("step size underflow at t = {:.6g} (error ratio {:.3g}, norm error {:.3g})", t, err,
                                norm_error),
                    "options.rtol");
    }
  }
}

}  // namespace ionxy
