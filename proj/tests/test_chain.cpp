#include <catch_amalgamated.hpp>

#include "ionxy/chain.hpp"
#include "ionxy/error.hpp"
#include "ionxy/units.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace ionxy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TrapConfig two_ion_trap() {
  return {mhz(1.135), mhz(0.920), mhz(0.201), kYb171Mass, std::sqrt(2.0) * wave_number(355e-9)};
}

// Oracle: plain gradient descent on u^2/2 + sum 1/|u_i - u_j| from a wide uniform start.
std::vector<double> brute_force_equilibrium(int n) {
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = -1.5 + 3.0 * i / std::max(1, n - 1);
  for (int it = 0; it < 200000; ++it) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
      g[i] = u[i];
      for (int j = 0; j < n; ++j)
        if (j != i) {
          const double d = u[i] - u[j];
          g[i] -= (d > 0 ? 1.0 : -1.0) / (d * d);
        }
    }
    double gn = 0;
    for (int i = 0; i < n; ++i) {
      u[i] -= 0.01 * g[i];
      gn = std::max(gn, std::abs(g[i]));
    }
    if (gn < 1e-13) break;
  }
  return u;
}

}  // namespace

TEST_CASE("equilibrium matches brute-force minimisation", "[chain]") {
  const TrapConfig trap = two_ion_trap();
  CHECK(equilibrium_positions(1, trap).positions == std::vector<double>{0.0});
  for (int n : {2, 3}) {
    const auto g = equilibrium_positions(static_cast<std::size_t>(n), trap);
    const auto oracle = brute_force_equilibrium(n);
    for (int i = 0; i < n; ++i) CHECK_THAT(g.positions[i], WithinAbs(oracle[i], 1e-9));
    CHECK(g.gradient_norm < 1e-10);
  }
  CHECK_THAT(equilibrium_positions(2, trap).positions[1], WithinAbs(std::pow(0.5, 2.0 / 3.0), 1e-12));
  CHECK_THAT(equilibrium_positions(3, trap).positions[2], WithinAbs(std::cbrt(1.25), 1e-12));
}

TEST_CASE("length scale follows the Coulomb balance", "[chain]") {
  const TrapConfig trap = two_ion_trap();
  const double l = std::cbrt(constants::elementary_charge * constants::elementary_charge * constants::coulomb_k /
                             (trap.mass * trap.omega_z * trap.omega_z));
  CHECK_THAT(equilibrium_positions(4, trap).length_scale, WithinRel(l, 1e-12));
}

TEST_CASE("positions are sorted and mirror symmetric", "[chain][property]") {
  TrapConfig trap{mhz(5.0), mhz(4.8), mhz(0.2), kYb171Mass, wave_number(355e-9)};
  for (std::size_t n = 1; n <= 30; ++n) {
    const auto g = equilibrium_positions(n, trap);
    REQUIRE(g.positions.size() == n);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(g.positions[i] < g.positions[i + 1]);
    for (std::size_t i = 0; i < n; ++i) CHECK_THAT(g.positions[i], WithinAbs(-g.positions[n - 1 - i], 1e-9));
    CHECK(g.gradient_norm < 1e-10);
  }
}

TEST_CASE("two-ion tilt mode is sqrt(w_t^2 - w_z^2)", "[chain]") {
  const TrapConfig trap = two_ion_trap();
  for (Axis ax : {Axis::X, Axis::Y}) {
    const auto m = chain_modes(2, trap, ax);
    const double wt = trap.transverse(ax);
    CHECK_THAT(m.omega[0], WithinRel(wt, 1e-12));
    CHECK_THAT(m.omega[1] * m.omega[1] + trap.omega_z * trap.omega_z, WithinRel(wt * wt, 1e-12));
  }
  CHECK_THAT(chain_modes(2, trap, Axis::X).omega[1], WithinAbs(mhz(1.117), khz(1.0)));
}

TEST_CASE("single ion has one mode at the trap frequency", "[chain]") {
  const TrapConfig trap = two_ion_trap();
  const auto m = chain_modes(1, trap, Axis::X);
  REQUIRE(m.n_modes() == 1);
  CHECK_THAT(m.omega[0], WithinRel(trap.omega_x, 1e-14));
  CHECK_THAT(m.b(0, 0), WithinAbs(1.0, 1e-14));
}

TEST_CASE("mode matrices are orthonormal with a COM mode on top", "[chain][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> wz(0.1, 0.3), wt(4.5, 5.5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 30;
    TrapConfig trap{mhz(wt(rng)), mhz(wt(rng) * 0.9), mhz(wz(rng)), kYb171Mass, wave_number(355e-9)};
    for (Axis ax : {Axis::X, Axis::Y}) {
      const auto g = equilibrium_positions(n, trap);
      const auto m = transverse_modes(g, trap, ax);
      const Eigen::MatrixXd btb = m.b.transpose() * m.b;
      CHECK((btb - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((m.b * m.b.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
      for (std::size_t i = 0; i < n; ++i)
        CHECK_THAT(std::abs(m.b(static_cast<Eigen::Index>(i), 0)), WithinAbs(1.0 / std::sqrt(double(n)), 1e-9));
      for (std::size_t k = 0; k + 1 < n; ++k) CHECK(m.omega[k] >= m.omega[k + 1]);
      // eigen-decomposition residual in units of omega_z^2
      const Eigen::MatrixXd h = transverse_hessian(g, trap, ax);
      for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::pow(m.omega[k] / trap.omega_z, 2);
        const Eigen::VectorXd v = m.b.col(static_cast<Eigen::Index>(k));
        CHECK((h * v - lam * v).norm() < 1e-9 * std::max(1.0, lam));
      }
      // sign convention: a largest-magnitude component is positive (mirror modes tie)
      for (std::size_t k = 0; k < n; ++k) {
        const Eigen::VectorXd v = m.b.col(static_cast<Eigen::Index>(k));
        CHECK(v.maxCoeff() > v.cwiseAbs().maxCoeff() - 1e-9);
      }
    }
  }
}

TEST_CASE("Hessian is independent of the library's eigen solver", "[chain]") {
  // Oracle Hessian: H_ii = (w_t/w_z)^2 - sum_j 1/|u_i-u_j|^3, H_ij = 1/|u_i-u_j|^3
  const TrapConfig trap = two_ion_trap();
  const auto g = equilibrium_positions(5, trap);
  const double beta = std::pow(trap.omega_x / trap.omega_z, 2);
  Eigen::MatrixXd h(5, 5);
  for (int i = 0; i < 5; ++i) {
    h(i, i) = beta;
    for (int j = 0; j < 5; ++j)
      if (j != i) {
        const double d3 = std::pow(std::abs(g.positions[i] - g.positions[j]), 3);
        h(i, j) = 1.0 / d3;
        h(i, i) -= 1.0 / d3;
      }
  }
  CHECK((transverse_hessian(g, trap, Axis::X) - h).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const auto m = transverse_modes(g, trap, Axis::X);
  for (int k = 0; k < 5; ++k)
    CHECK_THAT(m.omega[k], WithinRel(trap.omega_z * std::sqrt(es.eigenvalues()[4 - k]), 1e-12));
}

TEST_CASE("Lamb-Dicke parameters", "[chain]") {
  TrapConfig trap{mhz(1.1), mhz(1.0), mhz(0.1), kYb171Mass, wave_number(355e-9)};
  Eigen::MatrixXd b(2, 2);
  b << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
  ModeSet m;
  m.omega = {mhz(1.1), mhz(2.2)};
  m.b = b;
  m.eta = Eigen::MatrixXd::Zero(2, 2);
  const auto filled = lamb_dicke(m, trap);
  const double expected = b(0, 0) * trap.delta_k * std::sqrt(constants::hbar / (2 * trap.mass * mhz(1.1)));
  CHECK_THAT(filled.eta(0, 0), WithinRel(expected, 1e-14));
  CHECK_THAT(filled.eta(0, 0), WithinAbs(0.0648, 2e-4));
  // doubling the frequency scales eta by 1/sqrt(2)
  CHECK_THAT(std::abs(filled.eta(0, 1)), WithinRel(filled.eta(0, 0) / std::sqrt(2.0), 1e-12));
  CHECK(filled.eta(1, 1) < 0);

  m.b(0, 0) = 0.0;
  CHECK(lamb_dicke(m, trap).eta(0, 0) == 0.0);
}

TEST_CASE("zig-zag instability is detected", "[chain][error]") {
  TrapConfig trap{mhz(0.5), mhz(0.5), mhz(0.4), kYb171Mass, wave_number(355e-9)};
  try {
    chain_modes(10, trap, Axis::X);
    FAIL("expected ZigZagUnstable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZigZagUnstable);
  }
}

TEST_CASE("trap validation", "[chain][error]") {
  TrapConfig bad{mhz(1.0), -1.0, mhz(0.1), kYb171Mass, 1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
  TrapConfig massless{mhz(1.0), mhz(1.0), mhz(0.1), 0.0, 1.0};
  CHECK_THROWS_AS(massless.validate(), Error);
}
