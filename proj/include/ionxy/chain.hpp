#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ionxy {

enum class Axis { X, Y };

std::string axis_label(Axis axis);

/// Physical trap scene. Frequencies in rad/s, mass in kg, delta_k in 1/m.
struct TrapConfig {
  double omega_x{};
  double omega_y{};
  double omega_z{};
  double mass{};
  double delta_k{};

  double transverse(Axis axis) const { return axis == Axis::X ? omega_x : omega_y; }

  /// Throws ValidationError when a field is out of range.
  void validate() const;
};

/// Equilibrium of the axial chain in units of the length scale
/// l = (e^2 / 4 pi eps0 M omega_z^2)^(1/3).
struct ChainGeometry {
  std::size_t n_ions{};
  std::vector<double> positions;
  double length_scale{};
  double gradient_norm{};  // max-norm of the dimensionless force at the solution
};

/// Transverse normal modes along one axis. Columns of `b` (and `eta`) are modes, rows ions.
/// Modes are sorted by descending frequency, so column 0 is the centre-of-mass mode for a
/// trap-derived set.
struct ModeSet {
  std::string axis{"X'"};
  std::vector<double> omega;  // rad/s, or dimensionless angular units
  Eigen::MatrixXd b;
  Eigen::MatrixXd eta;

  std::size_t n_ions() const { return static_cast<std::size_t>(b.rows()); }
  std::size_t n_modes() const { return omega.size(); }

  /// Builds a set from literal frequencies and Lamb-Dicke parameters without a trap.
  /// `b` is recovered from eta by normalising each column; pass it explicitly to override.
  static ModeSet literal(std::vector<double> omega, Eigen::MatrixXd eta,
                         std::optional<Eigen::MatrixXd> b = std::nullopt,
                         std::string axis = "literal");

  /// Keeps only the listed modes (in the given order).
  ModeSet subset(const std::vector<std::size_t>& modes) const;
};

struct EquilibriumOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-12;
};

ChainGeometry equilibrium_positions(std::size_t n_ions, const TrapConfig& trap,
                                    const EquilibriumOptions& options = {});

/// Dimensionless transverse Hessian (units of omega_z^2) for a chain at rest.
Eigen::MatrixXd transverse_hessian(const ChainGeometry& geometry, const TrapConfig& trap, Axis axis);

/// Normal modes of the transverse Hessian; eta is left zero until lamb_dicke().
ModeSet transverse_modes(const ChainGeometry& geometry, const TrapConfig& trap, Axis axis);

/// eta_im = b_im |dk| sqrt(hbar / 2 M omega_m)
ModeSet lamb_dicke(ModeSet modes, const TrapConfig& trap);

/// Convenience pipeline: positions, modes, Lamb-Dicke parameters.
ModeSet chain_modes(std::size_t n_ions, const TrapConfig& trap, Axis axis);

}  // namespace ionxy
