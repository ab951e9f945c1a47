#pragma once

#include "ionxy/drive.hpp"
#include "ionxy/hamiltonian.hpp"
#include "ionxy/hilbert.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace ionxy {

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double norm_tolerance = 1e-7;
  /// Hard limit on the top-Fock-level population at any accepted step.
  double leakage_limit = 1e-3;
  /// Limit on the initial state's top-level population.
  double init_leakage_limit = 1e-6;
  /// Steps per period of the fastest coefficient frequency (the max-step cap).
  double steps_per_period = 50.0;
  /// Keep the full state at every sample; false stores observables only.
  bool store_states = true;
  long max_steps = 200'000'000;
};

/// Sampled evolution. Rows of `populations` / `mean_n` follow `times`.
/// A spin-only trajectory has spec.modes empty and no mean_n columns.
struct Trajectory {
  HilbertSpec spec;
  std::vector<double> times;
  std::vector<StateVector> states;
  Eigen::MatrixXd populations;   // times x 2^N
  Eigen::MatrixXd mean_n;        // times x included modes
  std::vector<double> leakage;   // top-level population at each sample
  double max_leakage = 0.0;      // over every accepted step, not just samples
  double max_norm_error = 0.0;
  long accepted_steps = 0;
  long rejected_steps = 0;

  bool has_states() const { return !states.empty(); }
  std::size_t size() const { return times.size(); }
};

/// Sample times 0, dt, 2 dt, ... plus t_final when it is not on the grid.
std::vector<double> sample_grid(double t_final, double sample_dt);

/// Integrates i dpsi/dt = H(t) psi from t = 0.
Trajectory evolve_full(const QuantumState& init, const DriveProgram& drive, const ModeSet& modes, double t_final,
                       double sample_dt, const EvolveOptions& options = {});

struct Observables {
  std::vector<double> times;
  Eigen::MatrixXd populations;
  Eigen::MatrixXd mean_n;
  std::vector<double> fidelity;  // empty when no reference was given
};

/// Recomputes observables from stored states. `reference` is a spin-only trajectory on the
/// same time grid; fidelity is <phi(t)| rho_spin(t) |phi(t)>.
Observables observables(const Trajectory& trajectory, const Trajectory* reference = nullptr);

/// Trapezoidal time average of one column of a sampled quantity.
double time_average(const std::vector<double>& times, const Eigen::VectorXd& values);
/// Time average of the total phonon number sum_k <n_k>.
double time_averaged_phonons(const Trajectory& trajectory);

/// Draws Fock numbers from geometric (thermal) distributions with means nbar, rejecting
/// draws at or above n_max so the initial state stays inside the leakage limit.
std::vector<int> sample_thermal_fock(const HilbertSpec& spec, const std::vector<double>& nbar, std::mt19937_64& rng);

/// Average of `samples` pure-state runs over thermal initial phonons. States are not kept.
/// Runs in parallel over `jobs` workers; the result does not depend on `jobs`.
Trajectory evolve_thermal(const HilbertSpec& spec, const StateVector& spin, const std::vector<double>& nbar,
                          int samples, std::uint64_t seed, const DriveProgram& drive, const ModeSet& modes,
                          double t_final, double sample_dt, const EvolveOptions& options = {}, int jobs = 1);

}  // namespace ionxy
