#include "ionxy/evolution.hpp"

#include "ionxy/error.hpp"
#include "ionxy/integrator.hpp"
#include "ionxy/parallel.hpp"
#include "ionxy/units.hpp"

#include <fmt/format.h>

#include <cmath>

namespace ionxy {

namespace {

constexpr const char* kModule = "dynamics-engine";

/// For each included mode, the basis indices whose Fock digit sits in the top level.
std::vector<std::vector<Eigen::Index>> top_level_indices(const HilbertSpec& spec) {
  std::vector<std::vector<Eigen::Index>> idx(spec.modes.size());
  const std::size_t dph = spec.phonon_dim();
  for (std::size_t p = 0; p < dph; ++p) {
    const auto d = fock_digits(spec, p);
    for (std::size_t k = 0; k < d.size(); ++k)
      if (d[k] == spec.n_max)
        for (std::size_t s = 0; s < spec.spin_dim(); ++s) idx[k].push_back(static_cast<Eigen::Index>(s * dph + p));
  }
  return idx;
}

double top_population(const std::vector<std::vector<Eigen::Index>>& idx, const StateVector& psi) {
  double worst = 0.0;
  for (const auto& mode : idx) {
    double p = 0.0;
    for (auto i : mode) p += std::norm(psi[i]);
    worst = std::max(worst, p);
  }
  return worst;
}

void record(Trajectory& tr, std::size_t row, double t, const StateVector& psi, double leak, bool keep_state) {
  tr.times[row] = t;
  tr.populations.row(static_cast<Eigen::Index>(row)) = spin_populations(tr.spec, psi).transpose();
  if (tr.mean_n.cols() > 0) tr.mean_n.row(static_cast<Eigen::Index>(row)) = mean_phonons(tr.spec, psi).transpose();
  tr.leakage[row] = leak;
  if (keep_state) tr.states[row] = psi;
}

}  // namespace

std::vector<double> sample_grid(double t_final, double sample_dt) {
  if (!(t_final > 0) || !(sample_dt > 0))
    throw Error(ErrorKind::ValidationError, kModule, "sample_grid", "t_final and sample_dt must be > 0",
                "sample_dt");
  const auto n = static_cast<std::size_t>(std::floor(t_final / sample_dt * (1 + 1e-12)));
  std::vector<double> g;
  g.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) g.push_back(static_cast<double>(k) * sample_dt);
  if (t_final - g.back() > 1e-9 * sample_dt) g.push_back(t_final);
  else g.back() = std::min(g.back(), t_final);
  return g;
}

Trajectory evolve_full(const QuantumState& init, const DriveProgram& drive, const ModeSet& modes, double t_final,
                       double sample_dt, const EvolveOptions& options) {
  const HilbertSpec& spec = init.spec;
  spec.validate(modes);
  if (static_cast<std::size_t>(init.amplitudes.size()) != spec.dim())
    throw Error(ErrorKind::DimensionMismatch, kModule, "evolve_full",
                fmt::format("state has {} amplitudes, space has {}", init.amplitudes.size(), spec.dim()), "init");
  if (std::abs(init.norm() - 1.0) > 1e-9)
    throw Error(ErrorKind::ValidationError, kModule, "evolve_full",
                fmt::format("initial state norm {:.12f} is not 1", init.norm()), "init");
  if (t_final > drive.duration() * (1 + 1e-12))
    throw Error(ErrorKind::ValidationError, kModule, "evolve_full",
                fmt::format("t_final {:.6g} exceeds the program duration {:.6g}", t_final, drive.duration()),
                "t_final");

  const SpinPhononHamiltonian h(spec, modes, drive);
  const auto top = top_level_indices(spec);
  const double leak0 = top_population(top, init.amplitudes);
  if (leak0 > options.init_leakage_limit)
    throw Error(ErrorKind::ValidationError, kModule, "evolve_full",
                fmt::format("initial top-level population {:.3g} exceeds {:.3g}; raise n_max", leak0,
                            options.init_leakage_limit),
                "hilbert.n_max");

  const auto grid = sample_grid(t_final, sample_dt);
  Trajectory tr;
  tr.spec = spec;
  tr.times.resize(grid.size());
  tr.populations.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(spec.spin_dim()));
  tr.mean_n.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(spec.modes.size()));
  tr.leakage.resize(grid.size());
  if (options.store_states) tr.states.resize(grid.size());

  StateVector psi = init.amplitudes;
  tr.max_leakage = leak0;
  record(tr, 0, 0.0, psi, leak0, options.store_states);

  // step caps per segment
  const auto bounds = drive.boundaries();
  std::vector<double> cap(drive.segments.size());
  for (std::size_t s = 0; s < cap.size(); ++s) {
    const double f = h.fastest_frequency(s);
    cap[s] = drive.segments[s].duration / 4.0;
    if (f > 0) cap[s] = std::min(cap[s], kTwoPi / (options.steps_per_period * f));
  }

  IntegratorOptions iopt;
  iopt.rtol = options.rtol;
  iopt.atol = options.atol;
  iopt.norm_tolerance = options.norm_tolerance;
  iopt.max_steps = options.max_steps;
  IntegratorStats stats;

  double step = 0.0;
  double t = 0.0;
  std::size_t seg = 0;
  const cplx minus_i(0.0, -1.0);
  for (std::size_t row = 1; row < grid.size(); ++row) {
    const double target = grid[row];
    while (t < target) {
      while (seg + 1 < drive.segments.size() && t >= bounds[seg + 1] * (1 - 1e-15)) ++seg;
      // the last segment absorbs rounding in the accumulated boundaries
      const double stop = seg + 1 == drive.segments.size() ? target : std::min(target, bounds[seg + 1]);
      iopt.max_step = cap[seg];
      if (step <= 0 || step > cap[seg]) step = cap[seg] * 0.25;
      auto rhs = [&, seg](double tt, const StateVector& y, StateVector& dy) {
        h.apply(tt, seg, y, dy);
        dy *= minus_i;
      };
      auto on_step = [&](double tt, const StateVector& y) {
        const double leak = top_population(top, y);
        tr.max_leakage = std::max(tr.max_leakage, leak);
        if (leak > options.leakage_limit)
          throw Error(ErrorKind::LeakageExceeded, kModule, "evolve_full",
                      fmt::format("top Fock level population {:.3g} exceeds {:.3g} at t = {:.6g}; raise n_max", leak,
                                  options.leakage_limit, tt),
                      "hilbert.n_max");
      };
      if (stop > t) dopri5_advance(rhs, t, stop, psi, step, iopt, stats, on_step);
      t = stop;
      if (seg + 1 < drive.segments.size() && t >= bounds[seg + 1]) ++seg;
    }
    record(tr, row, target, psi, top_population(top, psi), options.store_states);
  }
  tr.max_norm_error = stats.max_norm_error;
  tr.accepted_steps = stats.accepted;
  tr.rejected_steps = stats.rejected;
  return tr;
}

Observables observables(const Trajectory& trajectory, const Trajectory* reference) {
  if (!trajectory.has_states())
    throw Error(ErrorKind::MissingStates, kModule, "observables",
                "trajectory stores observables only; rerun with store_states", "options.store_states");
  Observables ob;
  ob.times = trajectory.times;
  const auto n = static_cast<Eigen::Index>(trajectory.size());
  ob.populations.resize(n, static_cast<Eigen::Index>(trajectory.spec.spin_dim()));
  ob.mean_n.resize(n, static_cast<Eigen::Index>(trajectory.spec.modes.size()));
  if (reference) {
    if (!reference->has_states() || reference->size() != trajectory.size())
      throw Error(ErrorKind::DimensionMismatch, kModule, "observables",
                  "reference trajectory must hold states on the same time grid", "reference");
    ob.fidelity.resize(trajectory.size());
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& psi = trajectory.states[static_cast<std::size_t>(r)];
    ob.populations.row(r) = spin_populations(trajectory.spec, psi).transpose();
    if (ob.mean_n.cols() > 0) ob.mean_n.row(r) = mean_phonons(trajectory.spec, psi).transpose();
    if (reference) {
      const auto& phi = reference->states[static_cast<std::size_t>(r)];
      ob.fidelity[static_cast<std::size_t>(r)] = spin_fidelity(trajectory.spec, psi, phi);
    }
  }
  return ob;
}

double time_average(const std::vector<double>& times, const Eigen::VectorXd& values) {
  if (times.size() != static_cast<std::size_t>(values.size()) || times.empty())
    throw Error(ErrorKind::DimensionMismatch, kModule, "time_average", "times and values differ in length");
  if (times.size() == 1) return values[0];
  double acc = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k)
    acc += 0.5 * (values[static_cast<Eigen::Index>(k)] + values[static_cast<Eigen::Index>(k - 1)]) *
           (times[k] - times[k - 1]);
  return acc / (times.back() - times.front());
}

double time_averaged_phonons(const Trajectory& trajectory) {
  if (trajectory.mean_n.cols() == 0) return 0.0;
  return time_average(trajectory.times, trajectory.mean_n.rowwise().sum());
}

std::vector<int> sample_thermal_fock(const HilbertSpec& spec, const std::vector<double>& nbar, std::mt19937_64& rng) {
  if (nbar.size() != spec.modes.size())
    throw Error(ErrorKind::DimensionMismatch, kModule, "sample_thermal_fock", "need one nbar per included mode",
                "nbar");
  std::vector<int> fock(nbar.size(), 0);
  for (std::size_t k = 0; k < nbar.size(); ++k) {
    if (nbar[k] < 0)
      throw Error(ErrorKind::ValidationError, kModule, "sample_thermal_fock", "nbar must be >= 0", "nbar");
    if (nbar[k] == 0) continue;
    std::geometric_distribution<int> dist(1.0 / (1.0 + nbar[k]));
    int n = 0;
    do n = dist(rng);
    while (n >= spec.n_max);
    fock[k] = n;
  }
  return fock;
}

Trajectory evolve_thermal(const HilbertSpec& spec, const StateVector& spin, const std::vector<double>& nbar,
                          int samples, std::uint64_t seed, const DriveProgram& drive, const ModeSet& modes,
                          double t_final, double sample_dt, const EvolveOptions& options, int jobs) {
  if (samples < 1)
    throw Error(ErrorKind::ValidationError, kModule, "evolve_thermal", "samples must be >= 1", "samples");
  // Draw every Fock configuration up front so the result is independent of scheduling.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> focks;
  for (int s = 0; s < samples; ++s) focks.push_back(sample_thermal_fock(spec, nbar, rng));

  EvolveOptions opt = options;
  opt.store_states = false;
  std::vector<Trajectory> runs(focks.size());
  parallel_for(focks.size(), jobs, [&](std::size_t s) {
    runs[s] = evolve_full(QuantumState::from_spin(spec, spin, focks[s]), drive, modes, t_final, sample_dt, opt);
  });

  Trajectory avg = runs.front();
  for (std::size_t s = 1; s < runs.size(); ++s) {
    avg.populations += runs[s].populations;
    avg.mean_n += runs[s].mean_n;
    for (std::size_t k = 0; k < avg.leakage.size(); ++k) avg.leakage[k] = std::max(avg.leakage[k], runs[s].leakage[k]);
    avg.max_leakage = std::max(avg.max_leakage, runs[s].max_leakage);
    avg.max_norm_error = std::max(avg.max_norm_error, runs[s].max_norm_error);
    avg.accepted_steps += runs[s].accepted_steps;
    avg.rejected_steps += runs[s].rejected_steps;
  }
  avg.populations /= static_cast<double>(runs.size());
  avg.mean_n /= static_cast<double>(runs.size());
  return avg;
}

}  // namespace ionxy
