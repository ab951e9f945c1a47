#pragma once

#include "ionxy/coupling.hpp"

#include <cstddef>
#include <vector>

namespace ionxy {

/// Piecewise drive: within a segment every tone plays at once and the Hamiltonians add.
/// Phases use the absolute time, so a tone that spans several segments stays phase-continuous.
struct DriveProgram {
  struct Segment {
    double duration{};
    std::vector<SDFTone> tones;
  };

  std::vector<Segment> segments;
  /// true: rotating frame with slow exponentials exp(-i((w_m - mu) t - psi)) and amplitude
  /// eta Omega / 2. false: the full lab form eta Omega cos(mu t + psi)(a e^{-i w t} + h.c.).
  bool use_rwa = true;
  /// Optional static sigma_z^i coefficients (rad/s), e.g. to emulate a calibrated light shift.
  std::vector<double> sigma_z_offsets;

  double duration() const;
  /// Start time of each segment plus the final end time.
  std::vector<double> boundaries() const;
  std::size_t segment_at(double t) const;

  void validate(std::size_t n_ions) const;

  static DriveProgram continuous(std::vector<SDFTone> tones, double duration, bool use_rwa = true);
};

}  // namespace ionxy
