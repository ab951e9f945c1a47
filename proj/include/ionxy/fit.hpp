#pragma once

#include <array>
#include <vector>

namespace ionxy {

/// f(tau) = sin^2(omega tau + phi) alpha e^{-tau/T} + beta (1 - e^{-tau/T}) + C
struct OscillationFit {
  double omega{};   // rad per time unit of the input
  double T{};       // decay time; infinite when gamma = 0
  double gamma{};   // 1/T, the fitted parameter
  double alpha{};
  double beta{};
  double phi{};     // reduced to [0, pi)
  double C{};
  // standard errors in the same order as the fitted vector (omega, gamma, alpha, beta, phi, C)
  std::array<double, 6> stderr_{};
  double omega_err{};
  double T_err{};
  double rms_residual{};
  int iterations{};
};

double oscillation_model(double tau, double omega, double gamma, double alpha, double beta, double phi, double c);

/// Nonlinear least squares (Levenberg-Marquardt) seeded from a periodogram.
OscillationFit fit_oscillation(const std::vector<double>& times, const std::vector<double>& values);

/// Angular frequency of the strongest Fourier component of (values - mean) over a grid
/// from one cycle per span to the Nyquist rate.
double dominant_angular_frequency(const std::vector<double>& times, const std::vector<double>& values);

}  // namespace ionxy
