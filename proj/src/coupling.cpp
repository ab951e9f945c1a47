#include "ionxy/coupling.hpp"

#include "ionxy/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ionxy {

namespace {

constexpr const char* kModule = "coupling-engine";

std::vector<std::size_t> used_modes(const ModeSet& modes, const CouplingOptions& options) {
  if (options.mode_mask.empty()) {
    std::vector<std::size_t> all(modes.n_modes());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  for (auto m : options.mode_mask)
    if (m >= modes.n_modes())
      throw Error(ErrorKind::DimensionMismatch, kModule, "ising_couplings",
                  fmt::format("mode mask index {} out of range", m), "mode_mask");
  return options.mode_mask;
}

void check_tone(const ModeSet& modes, const SDFTone& tone, const std::vector<std::size_t>& used,
                const CouplingOptions& options, const char* op) {
  tone.validate();
  if (tone.n_ions() != modes.n_ions())
    throw Error(ErrorKind::DimensionMismatch, kModule, op,
                fmt::format("tone addresses {} ions but mode set has {}", tone.n_ions(), modes.n_ions()),
                "rabi");
  for (auto m : used) {
    if (std::abs(tone.mu - modes.omega[m]) < options.resonance_guard)
      throw Error(ErrorKind::ResonantTone, kModule, op,
                  fmt::format("tone at {:.6g} rad/s is within {:.3g} rad/s of mode {} ({:.6g} rad/s)", tone.mu,
                              options.resonance_guard, m, modes.omega[m]),
                  "mu");
  }
}

template <class ModeWeight>
CouplingMatrix assemble(const ModeSet& modes, const SDFTone& tone, const std::vector<std::size_t>& used,
                        ModeWeight&& weight) {
  const auto n = static_cast<Eigen::Index>(modes.n_ions());
  CouplingMatrix out;
  out.J = Eigen::MatrixXd::Zero(n, n);
  out.mu = tone.mu;
  out.modes_used = used;
  out.axis_label = std::abs(std::sin(tone.spin_phase)) > std::abs(std::cos(tone.spin_phase)) ? "yy" : "xx";
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (auto m : used) s += weight(i, j, static_cast<Eigen::Index>(m));
      const double v = tone.effective_rabi(static_cast<std::size_t>(i)) *
                       tone.effective_rabi(static_cast<std::size_t>(j)) * s;
      out.J(i, j) = v;
      out.J(j, i) = v;
    }
  return out;
}

}  // namespace

void SDFTone::validate() const {
  if (!(mu > 0))
    throw Error(ErrorKind::ValidationError, kModule, "SDFTone", "tone frequency mu must be > 0", "mu");
  for (double r : rabi)
    if (!(r >= 0))
      throw Error(ErrorKind::ValidationError, kModule, "SDFTone", "Rabi frequencies must be >= 0", "rabi");
  if (!motional_phase.empty() && motional_phase.size() != rabi.size())
    throw Error(ErrorKind::DimensionMismatch, kModule, "SDFTone",
                "motional_phase must have one entry per ion", "motional_phase");
  if (!stark_factor.empty() && stark_factor.size() != rabi.size())
    throw Error(ErrorKind::DimensionMismatch, kModule, "SDFTone", "stark_factor must have one entry per ion",
                "stark_factor");
}

SDFTone SDFTone::uniform(std::size_t n, double mu, double rabi, double spin_phase) {
  SDFTone t;
  t.mu = mu;
  t.rabi.assign(n, rabi);
  t.spin_phase = spin_phase;
  return t;
}

CouplingMatrix ising_couplings(const ModeSet& modes, const SDFTone& tone, const TrapConfig& trap,
                               const CouplingOptions& options) {
  trap.validate();
  const auto used = used_modes(modes, options);
  check_tone(modes, tone, used, options, "ising_couplings");
  const double prefactor = constants::hbar * trap.delta_k * trap.delta_k / (2.0 * trap.mass);
  const double mu2 = tone.mu * tone.mu;
  return assemble(modes, tone, used, [&](Eigen::Index i, Eigen::Index j, Eigen::Index m) {
    const double w = modes.omega[static_cast<std::size_t>(m)];
    return prefactor * modes.b(i, m) * modes.b(j, m) / (mu2 - w * w);
  });
}

CouplingMatrix ising_couplings(const ModeSet& modes, const SDFTone& tone, const CouplingOptions& options) {
  const auto used = used_modes(modes, options);
  check_tone(modes, tone, used, options, "ising_couplings");
  const double mu2 = tone.mu * tone.mu;
  return assemble(modes, tone, used, [&](Eigen::Index i, Eigen::Index j, Eigen::Index m) {
    const double w = modes.omega[static_cast<std::size_t>(m)];
    return modes.eta(i, m) * modes.eta(j, m) * w / (mu2 - w * w);
  });
}

std::pair<CouplingMatrix, CouplingMatrix> xy_couplings(const ModeSet& modes, const SDFTone& tone_x,
                                                       const SDFTone& tone_y,
                                                       const std::optional<TrapConfig>& trap,
                                                       const CouplingOptions& options) {
  if (std::abs(std::sin(tone_x.spin_phase)) > 1e-9 || std::abs(std::cos(tone_y.spin_phase)) > 1e-9)
    throw Error(ErrorKind::ValidationError, kModule, "xy_couplings",
                "x tone needs spin phase 0 and y tone spin phase pi/2", "spin_phase");
  auto jx = trap ? ising_couplings(modes, tone_x, *trap, options) : ising_couplings(modes, tone_x, options);
  auto jy = trap ? ising_couplings(modes, tone_y, *trap, options) : ising_couplings(modes, tone_y, options);
  jx.axis_label = "xx";
  jy.axis_label = "yy";
  return {std::move(jx), std::move(jy)};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Warn: return "warn";
    case Verdict::Fail: return "fail";
  }
  return "fail";
}

namespace {
Verdict grade(double ratio) {
  if (ratio >= kPassRatio) return Verdict::Pass;
  if (ratio >= kWarnRatio) return Verdict::Warn;
  return Verdict::Fail;
}
}  // namespace

ValidityReport validity_report(const CouplingMatrix& jx, const CouplingMatrix& jy, const SDFTone& tone_x,
                               const SDFTone& tone_y, const ModeSet& modes) {
  if (jx.size() != jy.size() || jx.size() != modes.n_ions() || tone_x.n_ions() != modes.n_ions() ||
      tone_y.n_ions() != modes.n_ions())
    throw Error(ErrorKind::DimensionMismatch, kModule, "validity_report",
                "couplings, tones and modes disagree on the number of ions", "tones");

  const double sep = std::abs(tone_x.mu - tone_y.mu);
  if (sep <= 1e-12 * std::max(tone_x.mu, tone_y.mu))
    throw Error(ErrorKind::DegenerateTones, kModule, "validity_report",
                "mu1 = mu2: the two forces merge into one and the resulting effective spin-spin "
                "Hamiltonian is Ising type",
                "mu");

  ValidityReport r;
  const double jmax = std::max(jx.max_abs(), jy.max_abs());
  r.separation_ratio = jmax > 0 ? sep / jmax : std::numeric_limits<double>::infinity();
  r.lambda_bound = 4.0 * jmax / sep;

  for (const SDFTone* tone : {&tone_x, &tone_y}) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < modes.n_modes(); ++m)
      for (std::size_t i = 0; i < modes.n_ions(); ++i) {
        const double drive = std::abs(modes.eta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m))) *
                             tone->effective_rabi(i);
        if (drive > 0) best = std::min(best, std::abs(tone->mu - modes.omega[m]) / drive);
      }
    r.slow_regime_ratios.push_back(best);
  }

  r.separation_verdict = grade(r.separation_ratio);
  const double slow_min = *std::min_element(r.slow_regime_ratios.begin(), r.slow_regime_ratios.end());
  r.slow_regime_verdict = grade(slow_min);
  r.verdict = std::max(r.separation_verdict, r.slow_regime_verdict);
  if (r.separation_verdict != Verdict::Pass)
    r.note = fmt::format("|mu1 - mu2| is only {:.3g} x max|J|; cross terms are not negligible", r.separation_ratio);
  else if (r.slow_regime_verdict != Verdict::Pass)
    r.note = fmt::format("slowest tone has |mu - omega_m| / (eta Omega) = {:.3g}; residual spin-motion "
                         "entanglement may be visible",
                         slow_min);
  return r;
}

PowerLawFit power_law_fit(const CouplingMatrix& j) {
  const std::size_t n = j.size();
  if (n < 3)
    throw Error(ErrorKind::ValidationError, kModule, "power_law_fit", "need at least 3 ions", "J");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = std::abs(j(a, b));
      if (!(v > 0))
        throw Error(ErrorKind::ZeroCoupling, kModule, "power_law_fit",
                    fmt::format("J({}, {}) is zero", a, b), "J");
      xs.push_back(std::log(static_cast<double>(b - a)));
      ys.push_back(std::log(v));
    }
  const double k = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  PowerLawFit fit;
  fit.alpha = -slope;
  fit.intercept = my - slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + slope * xs[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / k);
  return fit;
}

namespace {

double alpha_at(const ModeSet& modes, const TrapConfig& trap, double mu) {
  const auto tone = SDFTone::uniform(modes.n_ions(), mu, 1.0);
  return power_law_fit(ising_couplings(modes, tone, trap, {.resonance_guard = 0.0, .mode_mask = {}})).alpha;
}

double com_frequency(const ModeSet& modes) { return *std::max_element(modes.omega.begin(), modes.omega.end()); }

}  // namespace

PowerLawScan power_law_scan(const ModeSet& modes, const TrapConfig& trap, const EngineerOptions& options) {
  PowerLawScan scan;
  const double com = com_frequency(modes);
  const double l0 = std::log(options.min_detuning);
  const double l1 = std::log(options.max_detuning);
  const int n = options.grid_points;
  for (int k = 0; k < n; ++k) {
    const double d = std::exp(l0 + (l1 - l0) * k / (n - 1));
    scan.detunings.push_back(d);
    scan.alphas.push_back(alpha_at(modes, trap, com + d));
  }
  scan.monotone = std::is_sorted(scan.alphas.begin(), scan.alphas.end());
  return scan;
}

PowerLawDesign engineer_power_law(double target_alpha, const ModeSet& modes, const TrapConfig& trap,
                                  const PowerLawScan& scan, double j_max_target, const EngineerOptions& options) {
  if (!(target_alpha > 0.05 && target_alpha < 2.0))
    throw Error(ErrorKind::ValidationError, kModule, "engineer_power_law", "target alpha must lie in (0.05, 2.0)",
                "target_alpha");
  if (!(j_max_target > 0))
    throw Error(ErrorKind::ValidationError, kModule, "engineer_power_law", "J_max target must be > 0", "j_max");

  const double com = com_frequency(modes);
  std::size_t best = 0;
  for (std::size_t k = 1; k < scan.alphas.size(); ++k)
    if (std::abs(scan.alphas[k] - target_alpha) < std::abs(scan.alphas[best] - target_alpha)) best = k;

  double detuning = scan.detunings[best];
  double alpha = scan.alphas[best];

  // Bisection in log-detuning between the grid points that bracket the target.
  if (scan.monotone && target_alpha > scan.alphas.front() && target_alpha < scan.alphas.back()) {
    const auto it = std::upper_bound(scan.alphas.begin(), scan.alphas.end(), target_alpha);
    const auto hi_idx = static_cast<std::size_t>(it - scan.alphas.begin());
    double lo = std::log(scan.detunings[hi_idx - 1]);
    double hi = std::log(scan.detunings[hi_idx]);
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double a = alpha_at(modes, trap, com + std::exp(mid));
      if (a < target_alpha) lo = mid; else hi = mid;
    }
    detuning = std::exp(0.5 * (lo + hi));
    alpha = alpha_at(modes, trap, com + detuning);
  }

  if (std::abs(alpha - target_alpha) > options.alpha_tolerance)
    throw Error(ErrorKind::TargetUnreachable, kModule, "engineer_power_law",
                fmt::format("closest exponent on the grid is {:.3f} for target {:.3f}", alpha, target_alpha),
                "target_alpha");

  PowerLawDesign design;
  design.target_alpha = target_alpha;
  design.detuning = detuning;
  design.mu1 = com + detuning;
  design.alpha = alpha;
  const auto unit = ising_couplings(modes, SDFTone::uniform(modes.n_ions(), design.mu1, 1.0), trap,
                                    {.resonance_guard = 0.0, .mode_mask = {}});
  design.rabi = std::sqrt(j_max_target / unit.max_abs());
  design.jx = ising_couplings(modes, SDFTone::uniform(modes.n_ions(), design.mu1, design.rabi), trap,
                              {.resonance_guard = 0.0, .mode_mask = {}});
  return design;
}

PowerLawDesign engineer_power_law(double target_alpha, const TrapConfig& trap, std::size_t n_ions,
                                  double j_max_target, const EngineerOptions& options) {
  const ModeSet modes = chain_modes(n_ions, trap, options.axis);
  const PowerLawScan scan = power_law_scan(modes, trap, options);
  return engineer_power_law(target_alpha, modes, trap, scan, j_max_target, options);
}

SDFTone scale_omega_y(const SDFTone& tone_x, double mu2, const ModeSet& modes, const CouplingOptions& options) {
  tone_x.validate();
  if (modes.n_modes() == 0)
    throw Error(ErrorKind::ValidationError, kModule, "scale_omega_y", "mode set is empty", "modes");
  std::size_t nearest = 0;
  for (std::size_t m = 1; m < modes.n_modes(); ++m)
    if (std::abs(modes.omega[m] - tone_x.mu) < std::abs(modes.omega[nearest] - tone_x.mu)) nearest = m;
  for (double mu : {tone_x.mu, mu2})
    for (std::size_t m = 0; m < modes.n_modes(); ++m)
      if (std::abs(mu - modes.omega[m]) < options.resonance_guard)
        throw Error(ErrorKind::ResonantTone, kModule, "scale_omega_y",
                    fmt::format("tone {:.6g} rad/s is resonant with mode {}", mu, m), "mu");

  const double wc2 = modes.omega[nearest] * modes.omega[nearest];
  const double scale = std::sqrt(std::abs(mu2 * mu2 - wc2) / std::abs(tone_x.mu * tone_x.mu - wc2));
  SDFTone y = tone_x;
  y.mu = mu2;
  y.spin_phase = kPi / 2.0;
  for (double& r : y.rabi) r *= scale;
  return y;
}

double frobenius_proximity(const CouplingMatrix& a, const CouplingMatrix& b) {
  if (a.J.rows() != b.J.rows() || a.J.cols() != b.J.cols())
    throw Error(ErrorKind::DimensionMismatch, kModule, "frobenius_proximity", "matrices differ in shape", "J");
  const double na = a.J.norm();
  const double nb = b.J.norm();
  if (!(na > 0) || !(nb > 0))
    throw Error(ErrorKind::ZeroMatrix, kModule, "frobenius_proximity", "proximity undefined for a zero matrix", "J");
  return (a.J.transpose() * b.J).trace() / (na * nb);
}

ModeSpectrumReport mode_spectrum_report(const TrapConfig& trap, std::size_t n_ions) {
  const ChainGeometry geo = equilibrium_positions(n_ions, trap);
  ModeSpectrumReport r;
  r.n_ions = n_ions;
  r.x_modes = transverse_modes(geo, trap, Axis::X).omega;
  r.y_modes = transverse_modes(geo, trap, Axis::Y).omega;
  r.min_gap = std::numeric_limits<double>::infinity();
  for (double wx : r.x_modes)
    for (double wy : r.y_modes) r.min_gap = std::min(r.min_gap, std::abs(wx - wy));
  const auto [xlo, xhi] = std::minmax_element(r.x_modes.begin(), r.x_modes.end());
  const auto [ylo, yhi] = std::minmax_element(r.y_modes.begin(), r.y_modes.end());
  r.band_gap = std::max(*xlo - *yhi, *ylo - *xhi);
  r.overlap = r.band_gap <= 0;
  return r;
}

}  // namespace ionxy
