#include "ionxy/chain.hpp"

#include "ionxy/error.hpp"
#include "ionxy/units.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ionxy {

namespace {

constexpr const char* kModule = "chain-mechanics";

double potential(const Eigen::VectorXd& u) {
  double v = 0.5 * u.squaredNorm();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = i + 1; j < u.size(); ++j) v += 1.0 / std::abs(u[i] - u[j]);
  return v;
}

Eigen::VectorXd gradient(const Eigen::VectorXd& u) {
  Eigen::VectorXd g = u;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      if (i == j) continue;
      const double d = u[i] - u[j];
      g[i] -= std::copysign(1.0 / (d * d), d);
    }
  return g;
}

Eigen::MatrixXd axial_hessian(const Eigen::VectorXd& u) {
  const Eigen::Index n = u.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = 2.0 / std::pow(std::abs(u[i] - u[j]), 3);
      h(i, i) += c;
      h(i, j) -= c;
    }
  return h;
}

bool strictly_increasing(const Eigen::VectorXd& u) {
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (!(u[i] > u[i - 1])) return false;
  return true;
}

double min_transverse_eigenvalue(const ChainGeometry& g, const TrapConfig& trap, Axis axis) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(transverse_hessian(g, trap, axis),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

std::string axis_label(Axis axis) { return axis == Axis::X ? "X'" : "Y'"; }

void TrapConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw Error(ErrorKind::ValidationError, kModule, "TrapConfig", why, field);
  };
  if (!(omega_x > 0)) fail("omega_x", "transverse frequency omega_x must be > 0");
  if (!(omega_y > 0)) fail("omega_y", "transverse frequency omega_y must be > 0");
  if (!(omega_z > 0)) fail("omega_z", "axial frequency omega_z must be > 0");
  if (!(mass > 0)) fail("mass", "ion mass must be > 0");
  if (!(delta_k >= 0)) fail("delta_k", "delta_k must be >= 0");
}

ModeSet ModeSet::literal(std::vector<double> omega, Eigen::MatrixXd eta,
                         std::optional<Eigen::MatrixXd> b, std::string axis) {
  if (static_cast<std::size_t>(eta.cols()) != omega.size())
    throw Error(ErrorKind::DimensionMismatch, kModule, "ModeSet::literal",
                "eta must have one column per mode frequency", "eta");
  ModeSet m;
  m.axis = std::move(axis);
  m.omega = std::move(omega);
  m.eta = std::move(eta);
  if (b) {
    if (b->rows() != m.eta.rows() || b->cols() != m.eta.cols())
      throw Error(ErrorKind::DimensionMismatch, kModule, "ModeSet::literal",
                  "b and eta must have the same shape", "b");
    m.b = *b;
  } else {
    m.b = m.eta;
    for (Eigen::Index c = 0; c < m.b.cols(); ++c) {
      const double n = m.b.col(c).norm();
      if (n > 0) m.b.col(c) /= n;
    }
  }
  return m;
}

ModeSet ModeSet::subset(const std::vector<std::size_t>& modes) const {
  ModeSet out;
  out.axis = axis;
  out.b.resize(b.rows(), static_cast<Eigen::Index>(modes.size()));
  out.eta.resize(eta.rows(), static_cast<Eigen::Index>(modes.size()));
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes[k] >= omega.size())
      throw Error(ErrorKind::DimensionMismatch, kModule, "ModeSet::subset",
                  fmt::format("mode index {} out of range ({} modes)", modes[k], omega.size()),
                  "modes");
    out.omega.push_back(omega[modes[k]]);
    out.b.col(static_cast<Eigen::Index>(k)) = b.col(static_cast<Eigen::Index>(modes[k]));
    out.eta.col(static_cast<Eigen::Index>(k)) = eta.col(static_cast<Eigen::Index>(modes[k]));
  }
  return out;
}

ChainGeometry equilibrium_positions(std::size_t n_ions, const TrapConfig& trap,
                                    const EquilibriumOptions& options) {
  trap.validate();
  if (n_ions == 0)
    throw Error(ErrorKind::ValidationError, kModule, "equilibrium_positions",
                "need at least one ion", "n_ions");

  const auto n = static_cast<Eigen::Index>(n_ions);
  ChainGeometry geo;
  geo.n_ions = n_ions;
  geo.length_scale = std::cbrt(constants::coulomb_k * constants::elementary_charge *
                               constants::elementary_charge / (trap.mass * trap.omega_z * trap.omega_z));

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  if (n > 1) {
    const double half = 2.0 * (0.48 + 0.37 * std::log(static_cast<double>(n)));
    u = Eigen::VectorXd::LinSpaced(n, -half, half);
  }

  double gnorm = gradient(u).lpNorm<Eigen::Infinity>();
  for (int it = 0; it < options.max_iterations && gnorm > options.gradient_tolerance; ++it) {
    const Eigen::VectorXd g = gradient(u);
    const Eigen::VectorXd step = axial_hessian(u).ldlt().solve(-g);
    const double v0 = potential(u);
    double t = 1.0;
    Eigen::VectorXd trial = u + step;
    while (t > 1e-12 && (!strictly_increasing(trial) || potential(trial) > v0 + 1e-14 * std::abs(v0))) {
      t *= 0.5;
      trial = u + t * step;
    }
    if (t <= 1e-12) break;
    u = trial;
    gnorm = gradient(u).lpNorm<Eigen::Infinity>();
  }

  if (!(gnorm < 1e-10))
    throw Error(ErrorKind::NoConvergence, kModule, "equilibrium_positions",
                fmt::format("Newton solve stalled with |grad| = {:.3e}", gnorm), "n_ions");

  geo.positions.assign(u.data(), u.data() + n);
  geo.gradient_norm = gnorm;

  for (Axis axis : {Axis::X, Axis::Y}) {
    const double lmin = min_transverse_eigenvalue(geo, trap, axis);
    if (!(lmin > 0))
      throw Error(ErrorKind::ZigZagUnstable, kModule, "equilibrium_positions",
                  fmt::format("linear chain of {} ions is unstable along {} (lowest eigenvalue {:.4g})",
                              n_ions, axis_label(axis), lmin),
                  "trap");
  }
  return geo;
}

Eigen::MatrixXd transverse_hessian(const ChainGeometry& geometry, const TrapConfig& trap, Axis axis) {
  const auto n = static_cast<Eigen::Index>(geometry.n_ions);
  const double beta = trap.transverse(axis) / trap.omega_z;
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n, n) * beta * beta;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = 1.0 / std::pow(std::abs(geometry.positions[i] - geometry.positions[j]), 3);
      k(i, i) -= c;
      k(i, j) += c;
    }
  return k;
}

ModeSet transverse_modes(const ChainGeometry& geometry, const TrapConfig& trap, Axis axis) {
  trap.validate();
  if (geometry.positions.size() != geometry.n_ions)
    throw Error(ErrorKind::DimensionMismatch, kModule, "transverse_modes",
                "geometry positions do not match n_ions", "geometry");

  const Eigen::MatrixXd k = transverse_hessian(geometry, trap, axis);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  const Eigen::VectorXd& lambda = es.eigenvalues();
  if (!(lambda.minCoeff() > 0))
    throw Error(ErrorKind::ZigZagUnstable, kModule, "transverse_modes",
                fmt::format("transverse Hessian along {} has eigenvalue {:.4g} <= 0", axis_label(axis),
                            lambda.minCoeff()),
                "trap");

  const auto n = static_cast<Eigen::Index>(geometry.n_ions);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lambda[a] > lambda[b]; });

  ModeSet modes;
  modes.axis = axis_label(axis);
  modes.b.resize(n, n);
  modes.eta = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const Eigen::Index src = order[static_cast<std::size_t>(m)];
    Eigen::VectorXd v = es.eigenvectors().col(src);
    // Deterministic sign: the largest-magnitude component is positive (first one on ties).
    Eigen::Index imax = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[imax]) + 1e-12) imax = i;
    if (v[imax] < 0) v = -v;
    modes.b.col(m) = v;
    modes.omega.push_back(trap.omega_z * std::sqrt(lambda[src]));
  }
  return modes;
}

ModeSet lamb_dicke(ModeSet modes, const TrapConfig& trap) {
  trap.validate();
  modes.eta.resize(modes.b.rows(), modes.b.cols());
  for (Eigen::Index m = 0; m < modes.b.cols(); ++m) {
    const double x0 = std::sqrt(constants::hbar / (2.0 * trap.mass * modes.omega[static_cast<std::size_t>(m)]));
    modes.eta.col(m) = modes.b.col(m) * trap.delta_k * x0;
  }
  return modes;
}

ModeSet chain_modes(std::size_t n_ions, const TrapConfig& trap, Axis axis) {
  const ChainGeometry geo = equilibrium_positions(n_ions, trap);
  return lamb_dicke(transverse_modes(geo, trap, axis), trap);
}

}  // namespace ionxy
