#pragma once

#include "ionxy/coupling.hpp"
#include "ionxy/evolution.hpp"

#include <Eigen/Sparse>

#include <array>
#include <string_view>
#include <vector>

namespace ionxy {

/// Dense-diagonalisation limit; larger chains use Lanczos propagation up to kEffectiveMaxIons.
inline constexpr std::size_t kEffectiveDenseIons = 10;
inline constexpr std::size_t kEffectiveMaxIons = 14;

/// H_eff = sum_{i<j} J^x_ij sx_i sx_j + J^y_ij sy_i sy_j (rad/s). Real symmetric in the
/// spin basis (|down> = 0, ion 1 most significant bit).
Eigen::SparseMatrix<double> effective_hamiltonian(const CouplingMatrix& jx, const CouplingMatrix& jy);

/// Spin-only evolution under H_eff, sampled at `times` (ascending, starting anywhere >= 0).
Trajectory evolve_effective(const CouplingMatrix& jx, const CouplingMatrix& jy, const StateVector& init,
                            const std::vector<double>& times);

/// <psi| H_eff |psi> along a spin trajectory.
std::vector<double> effective_energy(const CouplingMatrix& jx, const CouplingMatrix& jy, const Trajectory& traj);

/// Two-ion propagator in closed form, amplitudes in the order dd, du, ud, uu.
std::array<cplx, 4> closed_form_2ion(double jx12, double jy12, std::size_t init, double tau);
std::array<cplx, 4> closed_form_2ion(double jx12, double jy12, std::string_view init, double tau);

}  // namespace ionxy
