#pragma once

#include "ionxy/coupling.hpp"
#include "ionxy/drive.hpp"
#include "ionxy/evolution.hpp"

#include <string>
#include <vector>

namespace ionxy {

/// Alternating sigma_x sigma_x / sigma_y sigma_y drive. The coupling target is stored in
/// cycles per time unit (J / 2 pi), and the period obeys n_f = 1 / (t_f j_cycles), so
/// N_f counts Floquet periods per coupling cycle.
struct FloquetSchedule {
  double n_f{};
  double t_f{};
  double j_cycles{};
  SDFTone tone_xx;      // spin_phase forced to 0
  SDFTone tone_yy;      // spin_phase forced to pi/2
  double edge_fraction = 0.4;

  static FloquetSchedule make(double n_f, double j_cycles, const SDFTone& xx, const SDFTone& yy,
                              double edge_fraction = 0.4);
  /// Throws ValidationError / InvalidEdgeFraction when the invariants fail.
  void validate() const;
};

/// XX for t_f / 2 then YY for t_f / 2, repeated to cover total_time. Each half-pulse is shaped
/// with Blackman edges over edge_fraction / 2 of its length at each end.
DriveProgram build_floquet_program(const FloquetSchedule& schedule, double total_time, bool use_rwa = true);

/// Duty-cycle and edge-shaping factor (1/2)(1 - f + f <B^2>) relating the Floquet coupling
/// to the continuous-wave one.
double floquet_coupling_factor(double edge_fraction);

struct DeviationReport {
  double stroboscopic{};   // max over t = k t_f of sum_b |P_b - P_ideal,b|
  double all_samples{};    // same maximum over every sample
  double final_time{};
};

/// Deviation of a populations time series from a reference one (rows = times, cols = basis).
/// `strobe_rows` selects the rows used for the stroboscopic maximum.
DeviationReport population_deviation(const Eigen::MatrixXd& populations, const Eigen::MatrixXd& ideal,
                                     const std::vector<std::size_t>& strobe_rows);

/// Amplitude of the Fourier component of `values` at angular frequency w over the sampled
/// span (trapezoid rule), 2 |<(v - mean) e^{-i w t}>|.
double spectral_amplitude(const std::vector<double>& times, const Eigen::VectorXd& values, double w);

struct FloquetPoint {
  double n_f{};
  double t_f{};
  std::vector<std::string> inits;
  std::vector<double> mean_phonons;        // time-averaged total <n>, per init
  double mean_phonons_avg{};               // mean over inits
  std::vector<DeviationReport> deviations; // per init, against XY evolution at J^x = J^y = 2 pi j_cycles
  DeviationReport deviation;               // the all-down init (stationary ideal)
  double slow_amplitude{};                 // spectral amplitude of P(all down) at 2 pi / t_f
  double max_leakage{};
  std::vector<Trajectory> trajectories;    // per init, observables only
};

struct FloquetScanOptions {
  std::vector<std::string> inits{"dd", "du"};  // must contain the all-down state
  double total_time{};       // default 1 / j_cycles
  double max_sample_dt{1.0}; // finest sample spacing cap in the time unit
  int min_samples_per_period = 16;
  int n_max = 4;
  bool use_rwa = true;
  bool keep_trajectories = false;
  EvolveOptions evolve;
};

struct FloquetScanResult {
  std::vector<FloquetPoint> points;  // in the order of nf_values
};

/// For each N_f, runs evolve_full under the alternating program on a single-mode space.
/// Points are independent jobs; the result does not depend on `jobs` or the order.
FloquetScanResult scan_nf(const std::vector<double>& nf_values, const FloquetSchedule& templ, const ModeSet& modes,
                          const FloquetScanOptions& options = {}, int jobs = 1);

struct BaselineResult {
  double mu1{};
  double mu2{};
  double rabi_x{};
  double rabi_y{};
  CouplingMatrix jx;
  CouplingMatrix jy;
  std::vector<double> mean_phonons;   // per init
  double mean_phonons_avg{};
  double max_leakage{};
};

/// Continuous two-tone drive at detunings delta1, delta2 above the mode with Rabi rates set
/// so that J^x = J^y = 2 pi j_cycles (single-mode inversion), evolved for total_time.
BaselineResult dual_sdf_baseline(double j_cycles, double delta1, double delta2, const ModeSet& modes,
                                 const FloquetScanOptions& options = {}, int jobs = 1);

}  // namespace ionxy
