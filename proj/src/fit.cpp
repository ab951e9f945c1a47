#include "ionxy/fit.hpp"

#include "ionxy/error.hpp"
#include "ionxy/units.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace ionxy {

namespace {

constexpr const char* kModule = "dynamics-engine";

// Parameters p = (omega, gamma, alpha, beta, phi, C) on the rescaled time u = tau / span.
struct OscFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>& u;
  const std::vector<double>& y;
  OscFunctor(const std::vector<double>& u_, const std::vector<double>& y_)
      : Eigen::DenseFunctor<double>(6, static_cast<int>(u_.size())), u(u_), y(y_) {}

  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t k = 0; k < u.size(); ++k)
      r[static_cast<Eigen::Index>(k)] = oscillation_model(u[k], p[0], p[1], p[2], p[3], p[4], p[5]) - y[k];
    return 0;
  }

  int df(const InputType& p, JacobianType& jac) const {
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double t = u[k];
      const double arg = p[0] * t + p[4];
      const double s = std::sin(arg);
      const double c = std::cos(arg);
      const double e = std::exp(-p[1] * t);
      const auto r = static_cast<Eigen::Index>(k);
      jac(r, 0) = 2 * s * c * t * p[2] * e;
      jac(r, 1) = -t * e * (s * s * p[2] - p[3]);
      jac(r, 2) = s * s * e;
      jac(r, 3) = 1 - e;
      jac(r, 4) = 2 * s * c * p[2] * e;
      jac(r, 5) = 1;
    }
    return 0;
  }
};

}  // namespace

double oscillation_model(double tau, double omega, double gamma, double alpha, double beta, double phi, double c) {
  const double s = std::sin(omega * tau + phi);
  const double e = std::exp(-gamma * tau);
  return s * s * alpha * e + beta * (1 - e) + c;
}

double dominant_angular_frequency(const std::vector<double>& times, const std::vector<double>& values) {
  const std::size_t n = times.size();
  const double span = times.back() - times.front();
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  // Power on the grid f0 + g df, g < count. Phasors by recurrence:
  // e^{-i(w0 + g dw) t} = e^{-i w0 t} (e^{-i dw t})^g.
  auto periodogram = [&](double f0, double df, std::size_t count) {
    std::vector<std::complex<double>> acc(count, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> z = (values[k] - mean) * std::polar(1.0, -kTwoPi * f0 * times[k]);
      const std::complex<double> step = std::polar(1.0, -kTwoPi * df * times[k]);
      for (std::size_t g = 0; g < count; ++g) {
        acc[g] += z;
        z *= step;
      }
    }
    std::vector<double> power(count);
    for (std::size_t g = 0; g < count; ++g) power[g] = std::norm(acc[g]);
    return power;
  };
  auto argmax = [](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };

  // Coarse pass at half the Fourier resolution up to Nyquist, then a 16x finer pass around the peak.
  const double f_lo = 0.5 / span;
  const double f_hi = static_cast<double>(n) / (2.0 * span);
  const double dc = 0.5 / span;
  const auto coarse_n = static_cast<std::size_t>(std::ceil((f_hi - f_lo) / dc)) + 1;
  const std::size_t c = argmax(periodogram(f_lo, dc, coarse_n));
  const double f_start = std::max(f_lo, f_lo + dc * (static_cast<double>(c) - 1.0));
  const double df = dc / 16.0;
  const auto power = periodogram(f_start, df, 33);
  const std::size_t best = argmax(power);
  double shift = 0.0;
  if (best > 0 && best + 1 < power.size()) {
    const double a = power[best - 1], b = power[best], cc = power[best + 1];
    const double den = a - 2 * b + cc;
    if (den != 0) shift = 0.5 * (a - cc) / den;
  }
  return kTwoPi * (f_start + df * (static_cast<double>(best) + shift));
}

OscillationFit fit_oscillation(const std::vector<double>& times, const std::vector<double>& values) {
  if (times.size() != values.size())
    throw Error(ErrorKind::DimensionMismatch, kModule, "fit_oscillation", "times and values differ in length",
                "values");
  if (times.size() < 8)
    throw Error(ErrorKind::ValidationError, kModule, "fit_oscillation", "need at least 8 samples", "times");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw Error(ErrorKind::ValidationError, kModule, "fit_oscillation", "times must increase", "times");

  const double t0 = times.front();
  const double span = times.back() - t0;
  std::vector<double> u(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) u[k] = (times[k] - t0) / span;

  // sin^2 oscillates at twice omega
  const double w_peak = dominant_angular_frequency(u, values);
  const double omega0 = 0.5 * w_peak;
  if (omega0 * 2 < kTwoPi * 0.99)
    throw Error(ErrorKind::ValidationError, kModule, "fit_oscillation", "samples span less than one period",
                "times");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());

  OscFunctor functor(u, values);
  Eigen::VectorXd best;
  double best_sse = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  for (double phi0 : {0.0, kPi / 4, kPi / 2, 3 * kPi / 4}) {
    Eigen::VectorXd p(6);
    p << omega0, 0.1, *hi - *lo, 0.0, phi0, *lo;
    Eigen::LevenbergMarquardt<OscFunctor> lm(functor);
    lm.setMaxfev(4000);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    lm.minimize(p);
    Eigen::VectorXd r(static_cast<Eigen::Index>(u.size()));
    functor(p, r);
    const double sse = r.squaredNorm();
    if (std::isfinite(sse) && p.allFinite() && sse < best_sse) {
      best_sse = sse;
      best = p;
      best_iter = static_cast<int>(lm.iterations());
    }
  }
  if (!std::isfinite(best_sse))
    throw Error(ErrorKind::FitDiverged, kModule, "fit_oscillation", "least squares did not reach a finite residual",
                "values");

  // Covariance s^2 (J^T J)^+ in the rescaled parameters.
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(u.size()), 6);
  functor.df(best, jac);
  const auto dof = static_cast<double>(std::max<std::size_t>(1, u.size() - 6));
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const Eigen::MatrixXd cov = (best_sse / dof) * jtj.completeOrthogonalDecomposition().pseudoInverse();

  OscillationFit fit;
  double omega = best[0];
  double phi = best[4];
  if (omega < 0) {  // sin^2 is even under (omega, phi) -> (-omega, -phi)
    omega = -omega;
    phi = -phi;
  }
  phi = std::fmod(phi, kPi);
  if (phi < 0) phi += kPi;
  fit.omega = omega / span;
  fit.gamma = best[1] / span;
  fit.T = fit.gamma != 0 ? 1.0 / fit.gamma : std::numeric_limits<double>::infinity();
  fit.alpha = best[2];
  fit.beta = best[3];
  fit.phi = phi;
  // C absorbs the offset of the rescaled model exactly; t0 shifts only phi and the decay reference.
  fit.C = best[5];
  const std::array<double, 6> scale{1 / span, 1 / span, 1, 1, 1, 1};
  for (int k = 0; k < 6; ++k) fit.stderr_[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, cov(k, k))) * scale[static_cast<std::size_t>(k)];
  fit.omega_err = fit.stderr_[0];
  fit.T_err = fit.gamma != 0 ? fit.stderr_[1] / (fit.gamma * fit.gamma) : std::numeric_limits<double>::infinity();
  fit.rms_residual = std::sqrt(best_sse / static_cast<double>(u.size()));
  fit.iterations = best_iter;
  if (!std::isfinite(fit.omega) || fit.omega == 0.0)
    throw Error(ErrorKind::FitDiverged, kModule, "fit_oscillation", "fitted frequency is not finite", "values");
  return fit;
}

}  // namespace ionxy
