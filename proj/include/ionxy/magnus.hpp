#pragma once

#include "ionxy/drive.hpp"
#include "ionxy/hamiltonian.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ionxy {

/// Second-order Magnus terms of a two-tone (sigma_x, sigma_y) drive, on all modes of the set.
///
/// For H = sum_q f_q(t) A_q + h.c. with A_q = sigma_q a_m, the accumulated generator is
/// -i [ sum_{i<j} chi^x_ij sx sx + chi^y_ij sy sy + sum_{i!=j} lambda_ij sx_i sy_j + sum_i zeta_i sz_i (...) ]
/// and the first-order term is the displacement sum_q F_q A_q + h.c.
struct MagnusDiagnostics {
  std::vector<double> tau;
  std::vector<Eigen::MatrixXd> chi_x;    // symmetric, zero diagonal
  std::vector<Eigen::MatrixXd> chi_y;
  std::vector<Eigen::MatrixXd> lambda;   // (i, j): coefficient of sx_i sy_j, diagonal unused
  std::vector<Eigen::VectorXd> zeta;     // norm of the sz_i operator coefficient
  std::vector<Eigen::VectorXd> phi;      // sqrt(sum_m |F|^2) per ion

  // Least-squares slopes over the tau grid (rad/s).
  Eigen::MatrixXd chi_x_slope;
  Eigen::MatrixXd chi_y_slope;
  Eigen::MatrixXd lambda_slope;
  Eigen::VectorXd zeta_slope;

  double max_chi_slope{};
  double max_lambda{};        // max over tau and i != j of |lambda_ij|
  double max_zeta{};
  double max_phi{};
  /// max(|lambda_slope|, |zeta_slope|) / max_chi_slope
  double secular_ratio{};
  /// 4 max(|J^x|, |J^y|) / |mu1 - mu2| from the Ising-coupling formula; infinite for equal tones.
  double lambda_bound{};
  bool bound_satisfied{};
  double jx_max{};
  double jy_max{};
};

struct MagnusOptions {
  /// RK4 steps per period of the fastest coefficient frequency.
  int steps_per_period = 200;
};

MagnusDiagnostics magnus_diagnostics(const DriveProgram& drive, const ModeSet& modes, const std::vector<double>& tau,
                                     const MagnusOptions& options = {});

/// Slope of the least-squares line through (x, y).
double linear_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ionxy
