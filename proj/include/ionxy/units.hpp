#pragma once

#include <numbers>

namespace ionxy {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

namespace constants {
inline constexpr double hbar = 1.054571817e-34;           // J s
inline constexpr double atomic_mass = 1.66053906660e-27;  // kg
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;
inline constexpr double coulomb_k = 1.0 / (4.0 * std::numbers::pi * vacuum_permittivity);
}  // namespace constants

// All frequencies are angular (rad/s). These helpers convert from the "2pi x f" convention.
constexpr double hz(double f) { return kTwoPi * f; }
constexpr double khz(double f) { return kTwoPi * f * 1e3; }
constexpr double mhz(double f) { return kTwoPi * f * 1e6; }

/// Cyclic frequency (Hz) of an angular frequency.
constexpr double to_hz(double omega) { return omega / kTwoPi; }

/// Magnitude of a wave vector with wavelength `lambda` (m).
constexpr double wave_number(double lambda) { return kTwoPi / lambda; }

inline constexpr double kYb171Mass = 171.0 * constants::atomic_mass;

}  // namespace ionxy
