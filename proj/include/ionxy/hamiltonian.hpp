#pragma once

#include "ionxy/drive.hpp"
#include "ionxy/hilbert.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace ionxy {

using SparseOp = Eigen::SparseMatrix<cplx>;

/// Coefficient of sigma_theta_i a_m contributed by one tone at absolute time t, where `s` is
/// the normalised position inside the tone's segment. The a_m^dagger partner is the conjugate.
///   lab: eta Omega_i env(s) cos(mu t + psi_i) exp(-i omega t)
///   rwa: eta Omega_i env(s) / 2 exp(-i((omega - mu) t - psi_i))
cplx drive_coefficient(const SDFTone& tone, std::size_t ion, double eta, double omega, double t, double s, bool rwa);

/// Spin-phonon Hamiltonian of a DriveProgram on a truncated Fock space.
///
/// H(t) = sum_{i,m} [ (c^x_im(t) sx_i + c^y_im(t) sy_i) a_m + h.c. ] + sum_i h_i sz_i
///
/// The static operators sx_i a_m and sy_i a_m are built once; only the complex
/// coefficients depend on time.
class SpinPhononHamiltonian {
 public:
  SpinPhononHamiltonian(HilbertSpec spec, ModeSet modes, DriveProgram drive);

  const HilbertSpec& spec() const { return spec_; }
  const DriveProgram& drive() const { return drive_; }
  const ModeSet& modes() const { return modes_; }
  std::size_t dim() const { return spec_.dim(); }

  /// out = H(t) psi, using the tones of `segment`.
  void apply(double t, std::size_t segment, const StateVector& psi, StateVector& out) const;
  void apply(double t, const StateVector& psi, StateVector& out) const {
    apply(t, drive_.segment_at(t), psi, out);
  }

  /// Materialised operator at time t.
  SparseOp matrix(double t) const;
  SparseOp matrix(double t, std::size_t segment) const;

  /// Complex coefficient of (sigma_theta_i a_m) contributed by one tone; the a_m^dagger
  /// partner carries the conjugate.
  cplx tone_coefficient(const SDFTone& tone, std::size_t ion, std::size_t mode_index, double t,
                        double segment_start, double segment_duration) const;

  /// Fastest oscillation present in the coefficients of `segment` (rad/s).
  double fastest_frequency(std::size_t segment) const;

  struct Coefficients {
    std::vector<cplx> cx;  // [ion * n_modes + k], multiplies sx_i a_k
    std::vector<cplx> cy;
  };
  /// All operator coefficients at time t (tones of `segment` summed).
  void coefficients(double t, std::size_t segment, Coefficients& c) const;

 private:

  HilbertSpec spec_;
  ModeSet modes_;
  DriveProgram drive_;
  std::vector<double> starts_;
  std::vector<SparseOp> xa_;   // sx_i a_k
  std::vector<SparseOp> ya_;   // sy_i a_k
  std::vector<SparseOp> xad_;  // sx_i a_k^dagger
  std::vector<SparseOp> yad_;
  SparseOp z_;                 // sum_i h_i sz_i, empty when no offsets
  bool has_z_ = false;
};

/// H(t) as a sparse matrix.
SparseOp build_hamiltonian(double t, const DriveProgram& drive, const HilbertSpec& spec, const ModeSet& modes);

}  // namespace ionxy
