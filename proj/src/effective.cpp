#include "ionxy/effective.hpp"

#include "ionxy/error.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <cmath>

namespace ionxy {

namespace {

constexpr const char* kModule = "dynamics-engine";

void check_pair(const CouplingMatrix& jx, const CouplingMatrix& jy) {
  if (jx.J.rows() != jy.J.rows() || jx.J.rows() != jx.J.cols() || jy.J.rows() != jy.J.cols())
    throw Error(ErrorKind::DimensionMismatch, kModule, "evolve_effective", "J^x and J^y must be equal-size squares",
                "couplings");
  const auto n = static_cast<std::size_t>(jx.J.rows());
  if (n == 0)
    throw Error(ErrorKind::ValidationError, kModule, "evolve_effective", "empty coupling matrices", "couplings");
  if (n > kEffectiveMaxIons)
    throw Error(ErrorKind::DimensionCap, kModule, "evolve_effective",
                fmt::format("{} ions exceed the effective-evolution cap of {}", n, kEffectiveMaxIons), "n_ions");
}

Trajectory spin_trajectory(std::size_t n, const std::vector<double>& times) {
  Trajectory tr;
  tr.spec.n_ions = n;
  tr.spec.n_max = 1;
  tr.times = times;
  tr.states.resize(times.size());
  tr.populations.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(std::size_t{1} << n));
  tr.mean_n.resize(static_cast<Eigen::Index>(times.size()), 0);
  tr.leakage.assign(times.size(), 0.0);
  return tr;
}

/// exp(-i H dt) v by a Lanczos projection with full reorthogonalisation, sub-stepping until
/// the a-posteriori error estimate is below tol.
void lanczos_propagate(const Eigen::SparseMatrix<double>& h, StateVector& v, double dt, double tol = 1e-13) {
  const Eigen::Index dim = h.rows();
  const Eigen::Index m_max = std::min<Eigen::Index>(40, dim);
  double remaining = dt;
  double sub = dt;
  while (remaining > 0) {
    sub = std::min(sub, remaining);
    const double beta0 = v.norm();
    Eigen::MatrixXcd q(dim, m_max + 1);
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m_max + 1, m_max + 1);
    q.col(0) = v / beta0;
    Eigen::Index m = m_max;
    double beta_last = 0.0;
    for (Eigen::Index j = 0; j < m_max; ++j) {
      StateVector w = h * q.col(j);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index k = 0; k <= j; ++k) {
          const cplx c = q.col(k).dot(w);
          if (pass == 0 && k == j) tri(j, j) = c.real();
          w -= c * q.col(k);
        }
      const double b = w.norm();
      beta_last = b;
      if (j + 1 <= m_max) {
        tri(j + 1, j) = b;
        tri(j, j + 1) = b;
      }
      if (b < 1e-14 * std::max(1.0, std::abs(tri(j, j)))) {
        m = j + 1;
        beta_last = 0.0;
        break;
      }
      q.col(j + 1) = w / b;
    }
    for (;;) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri.topLeftCorner(m, m));
      const Eigen::VectorXcd phase = (es.eigenvalues().cast<cplx>() * cplx(0, -sub)).array().exp();
      const Eigen::VectorXcd coef = es.eigenvectors().cast<cplx>() *
                                    (phase.asDiagonal() * es.eigenvectors().row(0).transpose().cast<cplx>());
      const double err = beta0 * beta_last * std::abs(coef[m - 1]) * sub;
      if (err <= tol || beta_last == 0.0) {
        v = beta0 * (q.leftCols(m) * coef);
        remaining -= sub;
        if (err < tol * 1e-3) sub *= 2.0;
        break;
      }
      sub *= 0.5;
    }
  }
}

}  // namespace

Eigen::SparseMatrix<double> effective_hamiltonian(const CouplingMatrix& jx, const CouplingMatrix& jy) {
  check_pair(jx, jy);
  const auto n = static_cast<std::size_t>(jx.J.rows());
  const std::size_t dim = std::size_t{1} << n;
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t s = 0; s < dim; ++s)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::size_t bi = std::size_t{1} << (n - 1 - i);
        const std::size_t bj = std::size_t{1} << (n - 1 - j);
        // sy sy picks up (-i)(-i) or (i)(i) = -1 for aligned spins and +1 otherwise
        const bool aligned = ((s & bi) != 0) == ((s & bj) != 0);
        const double v = jx(i, j) + (aligned ? -1.0 : 1.0) * jy(i, j);
        if (v != 0.0)
          trips.emplace_back(static_cast<Eigen::Index>(s ^ bi ^ bj), static_cast<Eigen::Index>(s), v);
      }
  Eigen::SparseMatrix<double> h(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  h.setFromTriplets(trips.begin(), trips.end());
  return h;
}

Trajectory evolve_effective(const CouplingMatrix& jx, const CouplingMatrix& jy, const StateVector& init,
                            const std::vector<double>& times) {
  check_pair(jx, jy);
  const auto n = static_cast<std::size_t>(jx.J.rows());
  const std::size_t dim = std::size_t{1} << n;
  if (static_cast<std::size_t>(init.size()) != dim)
    throw Error(ErrorKind::DimensionMismatch, kModule, "evolve_effective",
                fmt::format("spin state has {} amplitudes, expected {}", init.size(), dim), "init");
  if (std::abs(init.norm() - 1.0) > 1e-9)
    throw Error(ErrorKind::ValidationError, kModule, "evolve_effective", "initial spin state is not normalised",
                "init");
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] < 0 || (k > 0 && times[k] <= times[k - 1]))
      throw Error(ErrorKind::ValidationError, kModule, "evolve_effective",
                  "times must be non-negative and strictly increasing", "times");

  const auto h = effective_hamiltonian(jx, jy);
  Trajectory tr = spin_trajectory(n, times);

  if (n <= kEffectiveDenseIons) {
    const Eigen::MatrixXd hd(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hd);
    const Eigen::MatrixXcd v = es.eigenvectors().cast<cplx>();
    const Eigen::VectorXcd c0 = v.adjoint() * init;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Eigen::VectorXcd phase = (es.eigenvalues().cast<cplx>() * cplx(0, -times[k])).array().exp();
      tr.states[k] = v * (phase.cwiseProduct(c0));
    }
  } else {
    StateVector psi = init;
    double t = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] > t) lanczos_propagate(h, psi, times[k] - t);
      t = times[k];
      tr.states[k] = psi;
    }
  }
  for (std::size_t k = 0; k < times.size(); ++k)
    tr.populations.row(static_cast<Eigen::Index>(k)) = tr.states[k].cwiseAbs2().transpose();
  return tr;
}

std::vector<double> effective_energy(const CouplingMatrix& jx, const CouplingMatrix& jy, const Trajectory& traj) {
  if (!traj.has_states())
    throw Error(ErrorKind::MissingStates, kModule, "effective_energy", "trajectory has no states", "trajectory");
  const auto h = effective_hamiltonian(jx, jy);
  std::vector<double> e;
  e.reserve(traj.size());
  for (const auto& psi : traj.states) {
    const Eigen::VectorXcd hp = h.cast<cplx>() * psi;
    e.push_back(psi.dot(hp).real());
  }
  return e;
}

std::array<cplx, 4> closed_form_2ion(double jx12, double jy12, std::size_t init, double tau) {
  if (init > 3)
    throw Error(ErrorKind::ValidationError, kModule, "closed_form_2ion", "init must index dd, du, ud or uu",
                "init");
  const cplx mi(0.0, -1.0);
  std::array<cplx, 4> a{};
  // |dd> <-> |uu> rotate at J^x - J^y, |du> <-> |ud> at J^x + J^y
  const double dif = (jx12 - jy12) * tau;
  const double sum = (jx12 + jy12) * tau;
  switch (init) {
    case 0: a[0] = std::cos(dif); a[3] = mi * std::sin(dif); break;
    case 3: a[3] = std::cos(dif); a[0] = mi * std::sin(dif); break;
    case 1: a[1] = std::cos(sum); a[2] = mi * std::sin(sum); break;
    default: a[2] = std::cos(sum); a[1] = mi * std::sin(sum); break;
  }
  return a;
}

std::array<cplx, 4> closed_form_2ion(double jx12, double jy12, std::string_view init, double tau) {
  return closed_form_2ion(jx12, jy12, spin_index(init, 2), tau);
}

}  // namespace ionxy
