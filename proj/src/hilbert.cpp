#include "ionxy/hilbert.hpp"

#include "ionxy/error.hpp"

#include <fmt/format.h>

#include <numeric>

namespace ionxy {

namespace {
constexpr const char* kModule = "dynamics-engine";

Eigen::Map<const Eigen::MatrixXcd> as_matrix(const HilbertSpec& spec, const StateVector& psi) {
  // Column s holds the phonon amplitudes of spin basis state s.
  return {psi.data(), static_cast<Eigen::Index>(spec.phonon_dim()), static_cast<Eigen::Index>(spec.spin_dim())};
}
}  // namespace

std::size_t HilbertSpec::phonon_dim() const {
  std::size_t d = 1;
  for (std::size_t k = 0; k < modes.size(); ++k) d *= levels();
  return d;
}

void HilbertSpec::validate(const ModeSet& mode_set) const {
  if (n_ions == 0 || n_ions > 20)
    throw Error(ErrorKind::ValidationError, kModule, "HilbertSpec", "n_ions must be in [1, 20]", "n_ions");
  if (n_ions != mode_set.n_ions())
    throw Error(ErrorKind::DimensionMismatch, kModule, "HilbertSpec",
                fmt::format("Hilbert space has {} ions but mode set has {}", n_ions, mode_set.n_ions()), "n_ions");
  if (n_max < 1)
    throw Error(ErrorKind::ValidationError, kModule, "HilbertSpec", "n_max must be >= 1", "hilbert.n_max");
  for (auto m : modes)
    if (m >= mode_set.n_modes())
      throw Error(ErrorKind::DimensionMismatch, kModule, "HilbertSpec",
                  fmt::format("mode index {} out of range", m), "hilbert.modes");
  // Guard the product before it can overflow.
  double d = static_cast<double>(spin_dim());
  for (std::size_t k = 0; k < modes.size(); ++k) d *= static_cast<double>(levels());
  if (d > static_cast<double>(dimension_cap))
    throw Error(ErrorKind::DimensionCap, kModule, "HilbertSpec",
                fmt::format("dimension {:.0f} exceeds the cap {}", d, dimension_cap), "hilbert");
}

HilbertSpec HilbertSpec::all_modes(const ModeSet& mode_set, int n_max) {
  HilbertSpec s;
  s.n_ions = mode_set.n_ions();
  s.modes.resize(mode_set.n_modes());
  std::iota(s.modes.begin(), s.modes.end(), 0);
  s.n_max = n_max;
  return s;
}

std::vector<int> fock_digits(const HilbertSpec& spec, std::size_t index) {
  const std::size_t k = spec.modes.size();
  std::vector<int> d(k);
  for (std::size_t m = k; m-- > 0;) {
    d[m] = static_cast<int>(index % spec.levels());
    index /= spec.levels();
  }
  return d;
}

std::size_t phonon_index(const HilbertSpec& spec, const std::vector<int>& fock) {
  std::size_t idx = 0;
  for (std::size_t m = 0; m < spec.modes.size(); ++m) {
    const int n = m < fock.size() ? fock[m] : 0;
    if (n < 0 || n > spec.n_max)
      throw Error(ErrorKind::ValidationError, kModule, "phonon_index",
                  fmt::format("Fock number {} outside [0, {}]", n, spec.n_max), "fock");
    idx = idx * spec.levels() + static_cast<std::size_t>(n);
  }
  return idx;
}

std::size_t spin_index(std::string_view label, std::size_t n_ions) {
  std::size_t idx = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const char c = label[i];
    int bit = -1;
    if (c == 'd' || c == 'D' || c == '0') bit = 0;
    else if (c == 'u' || c == 'U' || c == '1') bit = 1;
    else if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < label.size()) {
      // UTF-8 arrows: U+2191 (up) = E2 86 91, U+2193 (down) = E2 86 93
      const auto b2 = static_cast<unsigned char>(label[i + 2]);
      if (b2 == 0x91) bit = 1;
      else if (b2 == 0x93) bit = 0;
      i += 2;
    }
    if (bit < 0)
      throw Error(ErrorKind::ValidationError, kModule, "spin_index",
                  fmt::format("cannot parse spin label '{}'", label), "init");
    idx = (idx << 1) | static_cast<std::size_t>(bit);
    ++count;
  }
  if (count != n_ions)
    throw Error(ErrorKind::ValidationError, kModule, "spin_index",
                fmt::format("spin label '{}' has {} spins, expected {}", label, count, n_ions), "init");
  return idx;
}

std::string spin_label(std::size_t index, std::size_t n_ions) {
  std::string s(n_ions, 'd');
  for (std::size_t i = 0; i < n_ions; ++i)
    if ((index >> (n_ions - 1 - i)) & 1U) s[i] = 'u';
  return s;
}

QuantumState QuantumState::product(const HilbertSpec& spec, std::size_t spin, const std::vector<int>& fock) {
  if (spin >= spec.spin_dim())
    throw Error(ErrorKind::DimensionMismatch, kModule, "QuantumState", "spin index out of range", "init");
  QuantumState s{spec, StateVector::Zero(static_cast<Eigen::Index>(spec.dim()))};
  s.amplitudes[static_cast<Eigen::Index>(spin * spec.phonon_dim() + phonon_index(spec, fock))] = 1.0;
  return s;
}

QuantumState QuantumState::from_spin(const HilbertSpec& spec, const StateVector& spin, const std::vector<int>& fock) {
  if (static_cast<std::size_t>(spin.size()) != spec.spin_dim())
    throw Error(ErrorKind::DimensionMismatch, kModule, "QuantumState", "spin vector has the wrong length", "init");
  QuantumState s{spec, StateVector::Zero(static_cast<Eigen::Index>(spec.dim()))};
  const std::size_t ph = phonon_index(spec, fock);
  for (std::size_t k = 0; k < spec.spin_dim(); ++k)
    s.amplitudes[static_cast<Eigen::Index>(k * spec.phonon_dim() + ph)] = spin[static_cast<Eigen::Index>(k)];
  return s;
}

Eigen::VectorXd spin_populations(const HilbertSpec& spec, const StateVector& psi) {
  return as_matrix(spec, psi).colwise().squaredNorm().transpose();
}

Eigen::VectorXd mean_phonons(const HilbertSpec& spec, const StateVector& psi) {
  const auto m = as_matrix(spec, psi);
  const Eigen::VectorXd ph_prob = m.rowwise().squaredNorm();
  Eigen::VectorXd n = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.modes.size()));
  for (std::size_t p = 0; p < spec.phonon_dim(); ++p) {
    const auto d = fock_digits(spec, p);
    for (std::size_t k = 0; k < d.size(); ++k) n[static_cast<Eigen::Index>(k)] += d[k] * ph_prob[static_cast<Eigen::Index>(p)];
  }
  return n;
}

double top_level_population(const HilbertSpec& spec, const StateVector& psi) {
  const auto m = as_matrix(spec, psi);
  const Eigen::VectorXd ph_prob = m.rowwise().squaredNorm();
  std::vector<double> top(spec.modes.size(), 0.0);
  for (std::size_t p = 0; p < spec.phonon_dim(); ++p) {
    const auto d = fock_digits(spec, p);
    for (std::size_t k = 0; k < d.size(); ++k)
      if (d[k] == spec.n_max) top[k] += ph_prob[static_cast<Eigen::Index>(p)];
  }
  double worst = 0.0;
  for (double t : top) worst = std::max(worst, t);
  return worst;
}

double spin_fidelity(const HilbertSpec& spec, const StateVector& psi, const StateVector& spin_reference) {
  if (static_cast<std::size_t>(spin_reference.size()) != spec.spin_dim())
    throw Error(ErrorKind::DimensionMismatch, kModule, "spin_fidelity", "reference has the wrong length", "reference");
  return (as_matrix(spec, psi) * spin_reference.conjugate()).squaredNorm();
}

}  // namespace ionxy
