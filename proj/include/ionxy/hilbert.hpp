#pragma once

#include "ionxy/chain.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ionxy {

using cplx = std::complex<double>;
using StateVector = Eigen::VectorXcd;

// Basis ordering: spin-major, ion 1 is the most significant spin bit, |down> = 0 and |up> = 1.
// Within a spin block the Fock digits follow the mode order, first mode most significant.
// Full index = spin_index * phonon_dim + phonon_index.

/// Truncated spin-phonon space.
struct HilbertSpec {
  std::size_t n_ions{};
  std::vector<std::size_t> modes;  // indices into the ModeSet
  int n_max = 4;                   // highest Fock number kept per mode
  std::size_t dimension_cap = std::size_t{1} << 16;

  std::size_t levels() const { return static_cast<std::size_t>(n_max) + 1; }
  std::size_t spin_dim() const { return std::size_t{1} << n_ions; }
  std::size_t phonon_dim() const;
  std::size_t dim() const { return spin_dim() * phonon_dim(); }

  /// Throws DimensionCap / ValidationError / DimensionMismatch.
  void validate(const ModeSet& mode_set) const;

  /// All modes of a set.
  static HilbertSpec all_modes(const ModeSet& mode_set, int n_max = 4);
};

/// Fock digits of a phonon index, one per included mode.
std::vector<int> fock_digits(const HilbertSpec& spec, std::size_t phonon_index);
std::size_t phonon_index(const HilbertSpec& spec, const std::vector<int>& fock);

/// Parses "dd", "du", "ud", "uu" style labels (also accepts the arrows) into a spin index.
std::size_t spin_index(std::string_view label, std::size_t n_ions);
std::string spin_label(std::size_t index, std::size_t n_ions);

struct QuantumState {
  HilbertSpec spec;
  StateVector amplitudes;

  /// |spin> (x) |n_1, n_2, ...>
  static QuantumState product(const HilbertSpec& spec, std::size_t spin, const std::vector<int>& fock = {});
  /// Arbitrary spin vector (length 2^N) times a Fock product state.
  static QuantumState from_spin(const HilbertSpec& spec, const StateVector& spin, const std::vector<int>& fock = {});

  double norm() const { return amplitudes.norm(); }
};

/// Spin populations after tracing out the phonons.
Eigen::VectorXd spin_populations(const HilbertSpec& spec, const StateVector& psi);
/// Mean phonon number per included mode.
Eigen::VectorXd mean_phonons(const HilbertSpec& spec, const StateVector& psi);
/// Largest population found in the top Fock level of any mode.
double top_level_population(const HilbertSpec& spec, const StateVector& psi);
/// <phi| Tr_ph |psi><psi| |phi> for a pure spin state phi.
double spin_fidelity(const HilbertSpec& spec, const StateVector& psi, const StateVector& spin_reference);

}  // namespace ionxy
