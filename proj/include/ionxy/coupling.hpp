#pragma once

#include "ionxy/chain.hpp"
#include "ionxy/envelope.hpp"
#include "ionxy/units.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ionxy {

/// One spin-dependent force tone.
struct SDFTone {
  double mu{};                          // rad/s
  std::vector<double> rabi;             // Omega_i, rad/s
  double spin_phase{};                  // theta: 0 -> sigma_x, pi/2 -> sigma_y
  std::vector<double> motional_phase;   // psi_i, empty means all zero
  std::vector<double> stark_factor;     // per-ion multiplicative correction on Omega, empty means 1
  Envelope envelope;                    // amplitude over the segment the tone plays in

  std::size_t n_ions() const { return rabi.size(); }
  double effective_rabi(std::size_t i) const {
    return rabi[i] * (stark_factor.empty() ? 1.0 : stark_factor[i]);
  }
  double psi(std::size_t i) const { return motional_phase.empty() ? 0.0 : motional_phase[i]; }

  void validate() const;

  /// Uniform tone on `n` ions.
  static SDFTone uniform(std::size_t n, double mu, double rabi, double spin_phase = 0.0);
};

/// Symmetric zero-diagonal coupling matrix (rad/s) multiplying one Pauli pair.
struct CouplingMatrix {
  Eigen::MatrixXd J;
  std::string axis_label{"xx"};
  double mu{};
  std::vector<std::size_t> modes_used;

  std::size_t size() const { return static_cast<std::size_t>(J.rows()); }
  double max_abs() const { return J.cwiseAbs().maxCoeff(); }
  double operator()(std::size_t i, std::size_t j) const {
    return J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

struct CouplingOptions {
  /// Minimum |mu - omega_m| before a tone is rejected as resonant.
  double resonance_guard = hz(100.0);
  /// Modes to sum over; empty means all modes of the set.
  std::vector<std::size_t> mode_mask;
};

/// J_ij = Omega_i Omega_j hbar dk^2 / 2M sum_m b_im b_jm / (mu^2 - omega_m^2)
CouplingMatrix ising_couplings(const ModeSet& modes, const SDFTone& tone, const TrapConfig& trap,
                               const CouplingOptions& options = {});

/// Same couplings written through the Lamb-Dicke parameters,
/// J_ij = Omega_i Omega_j sum_m eta_im eta_jm omega_m / (mu^2 - omega_m^2).
/// Works for literal (trap-free) mode sets.
CouplingMatrix ising_couplings(const ModeSet& modes, const SDFTone& tone,
                               const CouplingOptions& options = {});

std::pair<CouplingMatrix, CouplingMatrix> xy_couplings(const ModeSet& modes, const SDFTone& tone_x,
                                                       const SDFTone& tone_y,
                                                       const std::optional<TrapConfig>& trap = std::nullopt,
                                                       const CouplingOptions& options = {});

enum class Verdict { Pass, Warn, Fail };
std::string to_string(Verdict v);

struct ValidityReport {
  double separation_ratio{};                // |mu1 - mu2| / max_ij max(|Jx|, |Jy|)
  std::vector<double> slow_regime_ratios;   // min_{i,m} |mu_k - omega_m| / (eta_im Omega_i^k), per tone
  double lambda_bound{};                    // max_ij 4 max(|Jx|, |Jy|) / |mu1 - mu2|
  Verdict separation_verdict{Verdict::Fail};
  Verdict slow_regime_verdict{Verdict::Fail};
  Verdict verdict{Verdict::Fail};
  std::string note;
};

inline constexpr double kPassRatio = 10.0;
inline constexpr double kWarnRatio = 3.0;

ValidityReport validity_report(const CouplingMatrix& jx, const CouplingMatrix& jy, const SDFTone& tone_x,
                               const SDFTone& tone_y, const ModeSet& modes);

struct PowerLawFit {
  double alpha{};
  double residual{};   // RMS of log|J| residuals
  double intercept{};
};

/// Least-squares fit of log|J_ij| = c - alpha log|i - j| over all pairs i < j.
PowerLawFit power_law_fit(const CouplingMatrix& j);

struct PowerLawDesign {
  double mu1{};          // rad/s
  double detuning{};     // mu1 - omega_COM, rad/s
  double rabi{};         // uniform Omega (rad/s) giving max|J| = j_max
  double alpha{};        // achieved exponent
  double target_alpha{};
  CouplingMatrix jx;
};

struct PowerLawScan {
  std::vector<double> detunings;  // rad/s above the COM mode
  std::vector<double> alphas;
  bool monotone{};
};

struct EngineerOptions {
  Axis axis = Axis::X;
  int grid_points = 400;
  double min_detuning = khz(1.0);
  double max_detuning = mhz(1.0);
  double alpha_tolerance = 0.05;
};

/// alpha(mu1) on a log-spaced detuning grid above the highest mode of `modes`.
PowerLawScan power_law_scan(const ModeSet& modes, const TrapConfig& trap, const EngineerOptions& options = {});

PowerLawDesign engineer_power_law(double target_alpha, const TrapConfig& trap, std::size_t n_ions,
                                  double j_max_target, const EngineerOptions& options = {});

/// Overload reusing precomputed modes (and their scan) for several targets.
PowerLawDesign engineer_power_law(double target_alpha, const ModeSet& modes, const TrapConfig& trap,
                                  const PowerLawScan& scan, double j_max_target,
                                  const EngineerOptions& options = {});

/// The y tone at mu2 whose single-mode coupling through the mode nearest mu1 matches tone_x:
/// Omega^y = Omega^x sqrt(|mu2^2 - w_c^2| / |mu1^2 - w_c^2|).
SDFTone scale_omega_y(const SDFTone& tone_x, double mu2, const ModeSet& modes,
                      const CouplingOptions& options = {});

/// Tr(A^T B) / (|A|_F |B|_F)
double frobenius_proximity(const CouplingMatrix& a, const CouplingMatrix& b);

struct ModeSpectrumReport {
  std::size_t n_ions{};
  std::vector<double> x_modes;  // rad/s, descending
  std::vector<double> y_modes;
  double min_gap{};             // min over pairs |w_x - w_y|
  double band_gap{};            // lowest X' minus highest Y' (negative when bands overlap)
  bool overlap{};
};

ModeSpectrumReport mode_spectrum_report(const TrapConfig& trap, std::size_t n_ions);

}  // namespace ionxy
