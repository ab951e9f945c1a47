#include "ionxy/floquet.hpp"

#include "ionxy/effective.hpp"
#include "ionxy/envelope.hpp"
#include "ionxy/error.hpp"
#include "ionxy/parallel.hpp"
#include "ionxy/units.hpp"

#include <fmt/format.h>

#include <cmath>

namespace ionxy {

namespace {

constexpr const char* kModule = "floquet-bench";

Envelope edge_envelope(double edge_fraction) {
  if (edge_fraction == 0.0) return Envelope(FlatEnvelope{});
  return Envelope(BlackmanEdges{edge_fraction});
}

CouplingMatrix uniform_coupling(std::size_t n, double j, const char* label) {
  CouplingMatrix c;
  c.J = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), j);
  c.J.diagonal().setZero();
  c.axis_label = label;
  return c;
}

/// Sampling: an integer number of samples per Floquet period so that t = k t_f lands on the grid.
std::size_t samples_per_period(double t_f, const FloquetScanOptions& o) {
  const auto k = static_cast<std::size_t>(std::ceil(t_f / o.max_sample_dt - 1e-9));
  return std::max<std::size_t>(static_cast<std::size_t>(std::max(1, o.min_samples_per_period)), k);
}

std::size_t all_down_index(const std::vector<std::string>& inits, std::size_t n) {
  for (std::size_t k = 0; k < inits.size(); ++k)
    if (spin_index(inits[k], n) == 0) return k;
  throw Error(ErrorKind::ValidationError, kModule, "scan_nf", "inits must include the all-down state", "inits");
}

}  // namespace

FloquetSchedule FloquetSchedule::make(double n_f, double j_cycles, const SDFTone& xx, const SDFTone& yy,
                                      double edge_fraction) {
  FloquetSchedule s;
  s.n_f = n_f;
  s.j_cycles = j_cycles;
  s.t_f = 1.0 / (n_f * j_cycles);
  s.tone_xx = xx;
  s.tone_yy = yy;
  s.tone_xx.spin_phase = 0.0;
  s.tone_yy.spin_phase = kPi / 2;
  s.edge_fraction = edge_fraction;
  s.validate();
  return s;
}

void FloquetSchedule::validate() const {
  if (!(n_f > 0) || !(j_cycles > 0) || !(t_f > 0))
    throw Error(ErrorKind::ValidationError, kModule, "FloquetSchedule", "n_f, t_f and j_target must be > 0",
                "floquet");
  if (std::abs(n_f * t_f * j_cycles - 1.0) > 1e-9)
    throw Error(ErrorKind::ValidationError, kModule, "FloquetSchedule",
                fmt::format("n_f = {} is inconsistent with t_f = {} and j = {}", n_f, t_f, j_cycles), "floquet.n_f");
  if (!(edge_fraction >= 0.0 && edge_fraction <= 0.9))
    throw Error(ErrorKind::InvalidEdgeFraction, kModule, "FloquetSchedule",
                fmt::format("edge_fraction {} outside [0, 0.9]", edge_fraction), "floquet.edge_fraction");
  if (tone_xx.n_ions() != tone_yy.n_ions())
    throw Error(ErrorKind::DimensionMismatch, kModule, "FloquetSchedule", "XX and YY tones address different chains",
                "floquet.tones");
  tone_xx.validate();
  tone_yy.validate();
}

DriveProgram build_floquet_program(const FloquetSchedule& schedule, double total_time, bool use_rwa) {
  schedule.validate();
  if (!(total_time > 0))
    throw Error(ErrorKind::ValidationError, kModule, "build_floquet_program", "total_time must be > 0",
                "total_time");
  const auto periods =
      static_cast<std::size_t>(std::max(1.0, std::ceil(total_time / schedule.t_f - 1e-9)));
  const Envelope env = edge_envelope(schedule.edge_fraction);
  SDFTone xx = schedule.tone_xx;
  SDFTone yy = schedule.tone_yy;
  xx.envelope = env;
  yy.envelope = env;
  DriveProgram p;
  p.use_rwa = use_rwa;
  p.segments.reserve(2 * periods);
  for (std::size_t k = 0; k < periods; ++k) {
    p.segments.push_back({schedule.t_f / 2, {xx}});
    p.segments.push_back({schedule.t_f / 2, {yy}});
  }
  return p;
}

double floquet_coupling_factor(double edge_fraction) {
  if (!(edge_fraction >= 0.0 && edge_fraction <= 0.9))
    throw Error(ErrorKind::InvalidEdgeFraction, kModule, "floquet_coupling_factor", "edge_fraction outside [0, 0.9]",
                "edge_fraction");
  return 0.5 * (1.0 - edge_fraction + edge_fraction * blackman_rise_mean_square());
}

DeviationReport population_deviation(const Eigen::MatrixXd& populations, const Eigen::MatrixXd& ideal,
                                     const std::vector<std::size_t>& strobe_rows) {
  if (populations.rows() != ideal.rows() || populations.cols() != ideal.cols() || populations.rows() == 0)
    throw Error(ErrorKind::DimensionMismatch, kModule, "population_deviation",
                "populations and ideal populations differ in shape", "ideal");
  const Eigen::VectorXd per_row = (populations - ideal).cwiseAbs().rowwise().sum();
  DeviationReport d;
  d.all_samples = per_row.maxCoeff();
  d.final_time = per_row[per_row.size() - 1];
  for (auto r : strobe_rows) {
    if (r >= static_cast<std::size_t>(per_row.size()))
      throw Error(ErrorKind::DimensionMismatch, kModule, "population_deviation", "strobe row out of range");
    d.stroboscopic = std::max(d.stroboscopic, per_row[static_cast<Eigen::Index>(r)]);
  }
  return d;
}

double spectral_amplitude(const std::vector<double>& times, const Eigen::VectorXd& values, double w) {
  if (times.size() != static_cast<std::size_t>(values.size()) || times.size() < 2)
    throw Error(ErrorKind::DimensionMismatch, kModule, "spectral_amplitude", "need matched samples");
  const double span = times.back() - times.front();
  double mean = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k)
    mean += 0.5 * (values[static_cast<Eigen::Index>(k)] + values[static_cast<Eigen::Index>(k - 1)]) *
            (times[k] - times[k - 1]);
  mean /= span;
  std::complex<double> acc = 0.0;
  auto g = [&](std::size_t k) {
    return (values[static_cast<Eigen::Index>(k)] - mean) * std::polar(1.0, -w * times[k]);
  };
  for (std::size_t k = 1; k < times.size(); ++k) acc += 0.5 * (g(k) + g(k - 1)) * (times[k] - times[k - 1]);
  return 2.0 * std::abs(acc) / span;
}

FloquetScanResult scan_nf(const std::vector<double>& nf_values, const FloquetSchedule& templ, const ModeSet& modes,
                          const FloquetScanOptions& options, int jobs) {
  templ.validate();
  const std::size_t n = modes.n_ions();
  const std::size_t dd = all_down_index(options.inits, n);
  const double j = templ.j_cycles;
  const double total = options.total_time > 0 ? options.total_time : 1.0 / j;
  const HilbertSpec spec = HilbertSpec::all_modes(modes, options.n_max);
  spec.validate(modes);
  const CouplingMatrix jx = uniform_coupling(n, kTwoPi * j, "xx");
  const CouplingMatrix jy = uniform_coupling(n, kTwoPi * j, "yy");

  FloquetScanResult result;
  result.points.resize(nf_values.size());
  const std::size_t n_init = options.inits.size();
  std::vector<Trajectory> runs(nf_values.size() * n_init);
  std::vector<std::vector<double>> grids(nf_values.size());
  std::vector<std::size_t> per_period(nf_values.size());

  for (std::size_t p = 0; p < nf_values.size(); ++p) {
    const FloquetSchedule s = FloquetSchedule::make(nf_values[p], j, templ.tone_xx, templ.tone_yy, templ.edge_fraction);
    per_period[p] = samples_per_period(s.t_f, options);
    result.points[p].n_f = s.n_f;
    result.points[p].t_f = s.t_f;
    result.points[p].inits = options.inits;
  }

  EvolveOptions eo = options.evolve;
  eo.store_states = false;
  parallel_for(runs.size(), jobs, [&](std::size_t job) {
    const std::size_t p = job / n_init;
    const std::size_t k = job % n_init;
    const FloquetSchedule s = FloquetSchedule::make(nf_values[p], j, templ.tone_xx, templ.tone_yy, templ.edge_fraction);
    const DriveProgram prog = build_floquet_program(s, total, options.use_rwa);
    const double dt = s.t_f / static_cast<double>(per_period[p]);
    const auto init = QuantumState::product(spec, spin_index(options.inits[k], n));
    try {
      runs[job] = evolve_full(init, prog, modes, total, dt, eo);
    } catch (const Error& e) {
      throw Error(e.kind(), e.module(), e.operation(),
                  fmt::format("N_f = {}, init {}: {}", nf_values[p], options.inits[k], e.what()), e.parameter());
    }
  });

  for (std::size_t p = 0; p < nf_values.size(); ++p) {
    FloquetPoint& pt = result.points[p];
    const Trajectory& ref_run = runs[p * n_init];
    std::vector<std::size_t> strobe;
    for (std::size_t r = 0; r < ref_run.size(); r += per_period[p]) strobe.push_back(r);
    double sum_n = 0.0;
    for (std::size_t k = 0; k < n_init; ++k) {
      const Trajectory& tr = runs[p * n_init + k];
      StateVector spin = StateVector::Zero(static_cast<Eigen::Index>(spec.spin_dim()));
      spin[static_cast<Eigen::Index>(spin_index(options.inits[k], n))] = 1.0;
      const Trajectory ideal = evolve_effective(jx, jy, spin, tr.times);
      pt.deviations.push_back(population_deviation(tr.populations, ideal.populations, strobe));
      pt.mean_phonons.push_back(time_averaged_phonons(tr));
      sum_n += pt.mean_phonons.back();
      pt.max_leakage = std::max(pt.max_leakage, tr.max_leakage);
    }
    pt.mean_phonons_avg = sum_n / static_cast<double>(n_init);
    pt.deviation = pt.deviations[dd];
    const Trajectory& tdd = runs[p * n_init + dd];
    pt.slow_amplitude = spectral_amplitude(tdd.times, tdd.populations.col(0), kTwoPi / pt.t_f);
    if (options.keep_trajectories)
      for (std::size_t k = 0; k < n_init; ++k) pt.trajectories.push_back(std::move(runs[p * n_init + k]));
  }
  return result;
}

BaselineResult dual_sdf_baseline(double j_cycles, double delta1, double delta2, const ModeSet& modes,
                                 const FloquetScanOptions& options, int jobs) {
  if (!(j_cycles > 0))
    throw Error(ErrorKind::ValidationError, kModule, "dual_sdf_baseline", "target coupling must be > 0", "j");
  if (delta1 == delta2)
    throw Error(ErrorKind::DegenerateTones, kModule, "dual_sdf_baseline",
                "equal detunings give a single SDF; the effective spin-spin Hamiltonian is Ising type", "detunings");
  const std::size_t n = modes.n_ions();
  const double w_top = modes.omega.front();
  const double target = kTwoPi * j_cycles;

  // Literal unit systems make the absolute default guard meaningless; only exact resonance is refused.
  const CouplingOptions copt{.resonance_guard = 0.0, .mode_mask = {}};
  if (delta1 == 0.0 || delta2 == 0.0)
    throw Error(ErrorKind::ResonantTone, kModule, "dual_sdf_baseline", "zero detuning is resonant", "detunings");

  BaselineResult b;
  b.mu1 = w_top + delta1;
  b.mu2 = w_top + delta2;
  // J is quadratic in a uniform Omega, so one probe evaluation fixes the scale.
  auto solve = [&](double mu, double phase) {
    SDFTone probe = SDFTone::uniform(n, mu, 1.0, phase);
    const double jmax = ising_couplings(modes, probe, copt).max_abs();
    if (jmax == 0.0)
      throw Error(ErrorKind::ZeroCoupling, kModule, "dual_sdf_baseline", "mode set gives no coupling", "modes");
    probe.rabi.assign(n, std::sqrt(target / jmax));
    return probe;
  };
  const SDFTone tx = solve(b.mu1, 0.0);
  const SDFTone ty = solve(b.mu2, kPi / 2);
  b.rabi_x = tx.rabi.front();
  b.rabi_y = ty.rabi.front();
  std::tie(b.jx, b.jy) = xy_couplings(modes, tx, ty, std::nullopt, copt);

  const double total = options.total_time > 0 ? options.total_time : 1.0 / j_cycles;
  const HilbertSpec spec = HilbertSpec::all_modes(modes, options.n_max);
  const DriveProgram prog = DriveProgram::continuous({tx, ty}, total, options.use_rwa);
  EvolveOptions eo = options.evolve;
  eo.store_states = false;
  std::vector<Trajectory> runs(options.inits.size());
  parallel_for(runs.size(), jobs, [&](std::size_t k) {
    const auto init = QuantumState::product(spec, spin_index(options.inits[k], n));
    runs[k] = evolve_full(init, prog, modes, total, options.max_sample_dt, eo);
  });
  double sum = 0.0;
  for (const auto& tr : runs) {
    b.mean_phonons.push_back(time_averaged_phonons(tr));
    sum += b.mean_phonons.back();
    b.max_leakage = std::max(b.max_leakage, tr.max_leakage);
  }
  b.mean_phonons_avg = runs.empty() ? 0.0 : sum / static_cast<double>(runs.size());
  return b;
}

}  // namespace ionxy
