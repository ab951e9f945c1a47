#include "ionxy/hamiltonian.hpp"

#include "ionxy/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace ionxy {

namespace {

constexpr const char* kModule = "dynamics-engine";

enum class Pauli { X, Y };

/// sigma_{x|y} on `ion` times a (lower=true) or a^dagger on included mode `k`.
SparseOp spin_ladder(const HilbertSpec& spec, std::size_t ion, Pauli pauli, std::size_t k, bool lower) {
  const std::size_t n = spec.n_ions;
  const std::size_t dph = spec.phonon_dim();
  const std::size_t bit = std::size_t{1} << (n - 1 - ion);
  std::size_t stride = 1;
  for (std::size_t m = k + 1; m < spec.modes.size(); ++m) stride *= spec.levels();

  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(spec.dim());
  for (std::size_t s = 0; s < spec.spin_dim(); ++s) {
    const std::size_t s2 = s ^ bit;
    cplx spin_factor = 1.0;
    if (pauli == Pauli::Y) spin_factor = (s & bit) ? cplx(0, 1) : cplx(0, -1);
    for (std::size_t p = 0; p < dph; ++p) {
      const int nk = static_cast<int>((p / stride) % spec.levels());
      if (lower && nk == 0) continue;
      if (!lower && nk == spec.n_max) continue;
      const std::size_t p2 = lower ? p - stride : p + stride;
      const double amp = lower ? std::sqrt(static_cast<double>(nk)) : std::sqrt(static_cast<double>(nk + 1));
      trips.emplace_back(static_cast<Eigen::Index>(s2 * dph + p2), static_cast<Eigen::Index>(s * dph + p),
                         spin_factor * amp);
    }
  }
  SparseOp op(static_cast<Eigen::Index>(spec.dim()), static_cast<Eigen::Index>(spec.dim()));
  op.setFromTriplets(trips.begin(), trips.end());
  return op;
}

}  // namespace

cplx drive_coefficient(const SDFTone& tone, std::size_t ion, double eta, double omega, double t, double s, bool rwa) {
  const double amp = eta * tone.effective_rabi(ion) * tone.envelope(std::clamp(s, 0.0, 1.0));
  if (amp == 0.0) return 0.0;
  if (rwa) return 0.5 * amp * std::polar(1.0, -((omega - tone.mu) * t - tone.psi(ion)));
  return amp * std::cos(tone.mu * t + tone.psi(ion)) * std::polar(1.0, -omega * t);
}

double DriveProgram::duration() const {
  double d = 0.0;
  for (const auto& s : segments) d += s.duration;
  return d;
}

std::vector<double> DriveProgram::boundaries() const {
  std::vector<double> b{0.0};
  for (const auto& s : segments) b.push_back(b.back() + s.duration);
  return b;
}

std::size_t DriveProgram::segment_at(double t) const {
  double start = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    start += segments[k].duration;
    if (t < start) return k;
  }
  return segments.empty() ? 0 : segments.size() - 1;
}

void DriveProgram::validate(std::size_t n_ions) const {
  if (segments.empty())
    throw Error(ErrorKind::ValidationError, kModule, "DriveProgram", "drive has no segments", "drive");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (!(segments[k].duration > 0))
      throw Error(ErrorKind::ValidationError, kModule, "DriveProgram",
                  fmt::format("segment {} has non-positive duration", k), fmt::format("drive.segments[{}]", k));
    for (const auto& tone : segments[k].tones) {
      tone.validate();
      if (tone.n_ions() != n_ions)
        throw Error(ErrorKind::DimensionMismatch, kModule, "DriveProgram",
                    fmt::format("tone in segment {} addresses {} ions, expected {}", k, tone.n_ions(), n_ions),
                    fmt::format("drive.segments[{}]", k));
    }
  }
  if (!sigma_z_offsets.empty() && sigma_z_offsets.size() != n_ions)
    throw Error(ErrorKind::DimensionMismatch, kModule, "DriveProgram", "sigma_z_offsets needs one entry per ion",
                "drive.sigma_z_offsets");
}

DriveProgram DriveProgram::continuous(std::vector<SDFTone> tones, double duration, bool use_rwa) {
  DriveProgram p;
  p.segments.push_back({duration, std::move(tones)});
  p.use_rwa = use_rwa;
  return p;
}

SpinPhononHamiltonian::SpinPhononHamiltonian(HilbertSpec spec, ModeSet modes, DriveProgram drive)
    : spec_(std::move(spec)), modes_(std::move(modes)), drive_(std::move(drive)) {
  spec_.validate(modes_);
  drive_.validate(spec_.n_ions);
  starts_ = drive_.boundaries();

  for (std::size_t i = 0; i < spec_.n_ions; ++i)
    for (std::size_t k = 0; k < spec_.modes.size(); ++k) {
      xa_.push_back(spin_ladder(spec_, i, Pauli::X, k, true));
      ya_.push_back(spin_ladder(spec_, i, Pauli::Y, k, true));
      xad_.push_back(spin_ladder(spec_, i, Pauli::X, k, false));
      yad_.push_back(spin_ladder(spec_, i, Pauli::Y, k, false));
    }

  if (!drive_.sigma_z_offsets.empty()) {
    std::vector<Eigen::Triplet<cplx>> trips;
    const std::size_t dph = spec_.phonon_dim();
    for (std::size_t s = 0; s < spec_.spin_dim(); ++s) {
      double diag = 0.0;
      for (std::size_t i = 0; i < spec_.n_ions; ++i) {
        const bool up = (s >> (spec_.n_ions - 1 - i)) & 1U;
        diag += drive_.sigma_z_offsets[i] * (up ? 1.0 : -1.0);
      }
      if (diag == 0.0) continue;
      for (std::size_t p = 0; p < dph; ++p)
        trips.emplace_back(static_cast<Eigen::Index>(s * dph + p), static_cast<Eigen::Index>(s * dph + p), diag);
    }
    z_.resize(static_cast<Eigen::Index>(spec_.dim()), static_cast<Eigen::Index>(spec_.dim()));
    z_.setFromTriplets(trips.begin(), trips.end());
    has_z_ = true;
  }
}

cplx SpinPhononHamiltonian::tone_coefficient(const SDFTone& tone, std::size_t ion, std::size_t k, double t,
                                             double segment_start, double segment_duration) const {
  const std::size_t m = spec_.modes[k];
  const double eta = modes_.eta(static_cast<Eigen::Index>(ion), static_cast<Eigen::Index>(m));
  const double w = modes_.omega[m];
  const double s = segment_duration > 0 ? (t - segment_start) / segment_duration : 0.0;
  return drive_coefficient(tone, ion, eta, w, t, s, drive_.use_rwa);
}

void SpinPhononHamiltonian::coefficients(double t, std::size_t segment, Coefficients& c) const {
  const std::size_t nm = spec_.modes.size();
  c.cx.assign(spec_.n_ions * nm, 0.0);
  c.cy.assign(spec_.n_ions * nm, 0.0);
  const auto& seg = drive_.segments[segment];
  const double start = starts_[segment];
  for (const auto& tone : seg.tones) {
    const double ct = std::cos(tone.spin_phase);
    const double st = std::sin(tone.spin_phase);
    for (std::size_t i = 0; i < spec_.n_ions; ++i)
      for (std::size_t k = 0; k < nm; ++k) {
        const cplx f = tone_coefficient(tone, i, k, t, start, seg.duration);
        c.cx[i * nm + k] += f * ct;
        c.cy[i * nm + k] += f * st;
      }
  }
}

void SpinPhononHamiltonian::apply(double t, std::size_t segment, const StateVector& psi, StateVector& out) const {
  thread_local Coefficients c;
  coefficients(t, segment, c);
  out.setZero(psi.size());
  for (std::size_t q = 0; q < xa_.size(); ++q) {
    if (c.cx[q] != 0.0) {
      out.noalias() += c.cx[q] * (xa_[q] * psi);
      out.noalias() += std::conj(c.cx[q]) * (xad_[q] * psi);
    }
    if (c.cy[q] != 0.0) {
      out.noalias() += c.cy[q] * (ya_[q] * psi);
      out.noalias() += std::conj(c.cy[q]) * (yad_[q] * psi);
    }
  }
  if (has_z_) out.noalias() += z_ * psi;
}

SparseOp SpinPhononHamiltonian::matrix(double t, std::size_t segment) const {
  Coefficients c;
  coefficients(t, segment, c);
  SparseOp h(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
  for (std::size_t q = 0; q < xa_.size(); ++q) {
    h += c.cx[q] * xa_[q] + std::conj(c.cx[q]) * xad_[q];
    h += c.cy[q] * ya_[q] + std::conj(c.cy[q]) * yad_[q];
  }
  if (has_z_) h += z_;
  h.prune(cplx(0.0));
  return h;
}

SparseOp SpinPhononHamiltonian::matrix(double t) const { return matrix(t, drive_.segment_at(t)); }

double SpinPhononHamiltonian::fastest_frequency(std::size_t segment) const {
  double fastest = 0.0;
  for (const auto& tone : drive_.segments[segment].tones)
    for (auto m : spec_.modes) {
      const double w = modes_.omega[m];
      fastest = std::max(fastest, drive_.use_rwa ? std::abs(w - tone.mu) : std::max(tone.mu, w));
    }
  if (has_z_)
    for (double h : drive_.sigma_z_offsets) fastest = std::max(fastest, 2.0 * std::abs(h));
  return fastest;
}

SparseOp build_hamiltonian(double t, const DriveProgram& drive, const HilbertSpec& spec, const ModeSet& modes) {
  const double total = drive.duration();
  if (t < 0 || t > total * (1 + 1e-12))
    throw Error(ErrorKind::ValidationError, kModule, "build_hamiltonian",
                fmt::format("time {:.6g} outside the program [0, {:.6g}]", t, total), "t");
  return SpinPhononHamiltonian(spec, modes, drive).matrix(t);
}

}  // namespace ionxy
