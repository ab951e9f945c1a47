#include <catch_amalgamated.hpp>

#include "ionxy/coupling.hpp"
#include "ionxy/error.hpp"

#include <random>

using namespace ionxy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModeSet two_ion_com() {
  Eigen::MatrixXd eta(2, 1);
  eta << 0.0648, 0.0648;
  return ModeSet::literal({mhz(1.1)}, eta);
}

TrapConfig two_ion_trap() {
  return {mhz(1.135), mhz(0.920), mhz(0.201), kYb171Mass, std::sqrt(2.0) * wave_number(355e-9)};
}

TrapConfig chain25_trap() {
  return {mhz(5.0), mhz(4.8), mhz(0.4), kYb171Mass, std::sqrt(2.0) * wave_number(355e-9)};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no ionxy::Error thrown");
  return ErrorKind::ValidationError;
}

// Oracle: single-mode Ising coupling written out by hand.
double single_mode_j(double rabi_i, double rabi_j, double eta_i, double eta_j, double w, double mu) {
  return rabi_i * rabi_j * eta_i * eta_j * w / (mu * mu - w * w);
}

}  // namespace

TEST_CASE("two-ion COM coupling matches the hand formula", "[coupling]") {
  const auto modes = two_ion_com();
  const auto tone = SDFTone::uniform(2, mhz(1.108), khz(15.0));
  const auto j = ising_couplings(modes, tone);
  const double oracle = single_mode_j(khz(15), khz(15), 0.0648, 0.0648, mhz(1.1), mhz(1.108));
  CHECK_THAT(j(0, 1), WithinRel(oracle, 1e-12));
  CHECK_THAT(to_hz(j(0, 1)), WithinRel(59.0, 0.02));
  CHECK(j(0, 0) == 0.0);
  CHECK(j(1, 1) == 0.0);
}

TEST_CASE("trap route and Lamb-Dicke route agree", "[coupling][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> off(khz(2), khz(200));
  for (std::size_t n : {2, 3, 5, 8}) {
    const auto trap = chain25_trap();
    const auto modes = chain_modes(n, trap, Axis::X);
    auto tone = SDFTone::uniform(n, modes.omega[0] + off(rng), khz(20));
    for (std::size_t i = 0; i < n; ++i) tone.rabi[i] *= 1.0 + 0.1 * i;
    const auto a = ising_couplings(modes, tone, trap);
    const auto b = ising_couplings(modes, tone);
    CHECK((a.J - b.J).cwiseAbs().maxCoeff() < 1e-10 * a.max_abs());
  }
}

TEST_CASE("coupling matrices are symmetric with zero diagonal", "[coupling][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r(khz(5), khz(30)), d(khz(-80), khz(80));
  const auto trap = chain25_trap();
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto modes = chain_modes(n, trap, Axis::X);
    SDFTone t;
    t.mu = modes.omega[trial % n] + (trial % 2 ? 1 : -1) * khz(3) + d(rng) * 1e-3;
    for (std::size_t i = 0; i < n; ++i) t.rabi.push_back(r(rng));
    const auto j = ising_couplings(modes, t, trap);
    CHECK((j.J - j.J.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(j.J.diagonal().cwiseAbs().maxCoeff() == 0.0);
    // quadratic in a global Rabi scale
    SDFTone t2 = t;
    for (double& x : t2.rabi) x *= 3.0;
    CHECK((ising_couplings(modes, t2, trap).J - 9.0 * j.J).cwiseAbs().maxCoeff() < 1e-11 * 9.0 * j.max_abs());
    // zero Rabi on one ion zeroes its row and column
    SDFTone t3 = t;
    t3.rabi[0] = 0.0;
    const auto j3 = ising_couplings(modes, t3, trap);
    CHECK(j3.J.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(j3.J.col(0).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("sign flips across the COM mode", "[coupling]") {
  const auto modes = two_ion_com();
  const auto above = ising_couplings(modes, SDFTone::uniform(2, mhz(1.1) + khz(8), khz(15)));
  const auto below = ising_couplings(modes, SDFTone::uniform(2, mhz(1.1) - khz(8), khz(15)));
  CHECK(above(0, 1) > 0);
  CHECK(below(0, 1) < 0);
}

TEST_CASE("resonant tones are rejected", "[coupling][error]") {
  const auto modes = two_ion_com();
  CHECK(kind_of([&] { ising_couplings(modes, SDFTone::uniform(2, mhz(1.1) + hz(50), khz(15))); }) ==
        ErrorKind::ResonantTone);
  CHECK_NOTHROW(ising_couplings(modes, SDFTone::uniform(2, mhz(1.1) + hz(200), khz(15))));
  CHECK(kind_of([&] { ising_couplings(modes, SDFTone::uniform(3, mhz(1.2), khz(15))); }) ==
        ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { ising_couplings(modes, SDFTone::uniform(2, -1.0, khz(15))); }) == ErrorKind::ValidationError);
}

TEST_CASE("matched y tone equalises the single-mode couplings", "[coupling]") {
  const auto modes = two_ion_com();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  const auto ty = scale_omega_y(tx, mhz(1.105), modes);
  const double oracle = khz(15) * std::sqrt((1.105 * 1.105 - 1.1 * 1.1) / (1.108 * 1.108 - 1.1 * 1.1));
  CHECK_THAT(ty.rabi[0], WithinRel(oracle, 1e-12));
  CHECK_THAT(ty.rabi[0] / kTwoPi / 1e3, WithinRel(11.86, 1e-3));
  CHECK_THAT(ty.spin_phase, WithinAbs(kPi / 2, 1e-15));
  const auto [jx, jy] = xy_couplings(modes, tx, ty);
  CHECK_THAT(jx(0, 1), WithinRel(jy(0, 1), 1e-12));
  CHECK(jx.axis_label == "xx");
  CHECK(jy.axis_label == "yy");
}

TEST_CASE("xy_couplings checks spin phases", "[coupling][error]") {
  const auto modes = two_ion_com();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  CHECK(kind_of([&] { xy_couplings(modes, tx, tx); }) == ErrorKind::ValidationError);
}

TEST_CASE("validity report ratios", "[coupling]") {
  const auto modes = two_ion_com();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  const auto ty = scale_omega_y(tx, mhz(1.105), modes);
  const auto [jx, jy] = xy_couplings(modes, tx, ty);
  const auto r = validity_report(jx, jy, tx, ty, modes);
  const double jmax = std::max(std::abs(jx(0, 1)), std::abs(jy(0, 1)));
  CHECK_THAT(r.separation_ratio, WithinRel(khz(3) / jmax, 1e-9));
  CHECK_THAT(r.lambda_bound * r.separation_ratio, WithinRel(4.0, 1e-12));
  CHECK(r.separation_verdict == Verdict::Pass);
  REQUIRE(r.slow_regime_ratios.size() == 2);
  CHECK_THAT(r.slow_regime_ratios[0], WithinRel(khz(8) / (0.0648 * khz(15)), 1e-9));
  CHECK_THAT(r.slow_regime_ratios[1], WithinRel(khz(5) / (0.0648 * ty.rabi[0]), 1e-9));
  // both slow-regime ratios sit between 3 and 10
  CHECK(r.slow_regime_verdict == Verdict::Warn);
  CHECK(r.verdict == Verdict::Warn);
  CHECK_FALSE(r.note.empty());

  CHECK(kind_of([&] { validity_report(jx, jy, tx, tx, modes); }) == ErrorKind::DegenerateTones);
}

TEST_CASE("power-law fit on synthetic matrices", "[coupling]") {
  for (double alpha : {0.0, 0.7, 1.0, 2.5}) {
    CouplingMatrix c;
    c.J = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (i != j) c.J(i, j) = 3.0 / std::pow(std::abs(i - j), alpha);
    const auto f = power_law_fit(c);
    CHECK_THAT(f.alpha, WithinAbs(alpha, 1e-12));
    CHECK(f.residual < 1e-12);
    CHECK_THAT(f.intercept, WithinAbs(std::log(3.0), 1e-12));
  }
  CouplingMatrix z;
  z.J = Eigen::MatrixXd::Zero(4, 4);
  z.J(0, 1) = z.J(1, 0) = 1.0;
  CHECK(kind_of([&] { power_law_fit(z); }) == ErrorKind::ZeroCoupling);
  CouplingMatrix two;
  two.J = Eigen::MatrixXd::Ones(2, 2);
  CHECK(kind_of([&] { power_law_fit(two); }) == ErrorKind::ValidationError);
}

TEST_CASE("Frobenius proximity", "[coupling]") {
  CouplingMatrix a, b;
  a.J = Eigen::MatrixXd::Random(5, 5);
  a.J = (a.J + a.J.transpose()).eval();
  b.J = 2.5 * a.J;
  CHECK_THAT(frobenius_proximity(a, b), WithinAbs(1.0, 1e-14));
  b.J = -a.J;
  CHECK_THAT(frobenius_proximity(a, b), WithinAbs(-1.0, 1e-14));
  b.J = Eigen::MatrixXd::Zero(5, 5);
  CHECK(kind_of([&] { frobenius_proximity(a, b); }) == ErrorKind::ZeroMatrix);
  b.J = Eigen::MatrixXd::Zero(4, 4);
  CHECK(kind_of([&] { frobenius_proximity(a, b); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("power-law engineering on a 25-ion chain", "[coupling][slow]") {
  const auto trap = chain25_trap();
  const auto modes = chain_modes(25, trap, Axis::X);
  const EngineerOptions opt;
  const auto scan = power_law_scan(modes, trap, opt);
  CHECK(scan.monotone);
  // close to the COM mode every pair sees the same force; far detuned the interaction is short range
  CHECK(scan.alphas.front() < 0.5);
  CHECK(scan.alphas.back() > 1.5);
  for (double target : {0.5, 1.0, 1.5}) {
    const auto d = engineer_power_law(target, modes, trap, scan, hz(100), opt);
    CHECK_THAT(d.alpha, WithinAbs(target, opt.alpha_tolerance));
    CHECK_THAT(d.jx.max_abs(), WithinRel(hz(100), 1e-9));
    CHECK_THAT(power_law_fit(d.jx).alpha, WithinAbs(d.alpha, 1e-12));
    const auto tx = SDFTone::uniform(25, d.mu1, d.rabi);
    const auto ty = scale_omega_y(tx, d.mu1 + khz(3), modes);
    const auto [jx, jy] = xy_couplings(modes, tx, ty, trap);
    CHECK(frobenius_proximity(jx, jy) > 0.99);
  }
  CHECK(kind_of([&] { engineer_power_law(3.0, modes, trap, scan, hz(100), opt); }) == ErrorKind::ValidationError);
  EngineerOptions narrow = opt;
  narrow.max_detuning = khz(2);
  narrow.grid_points = 20;
  const auto short_scan = power_law_scan(modes, trap, narrow);
  CHECK(kind_of([&] { engineer_power_law(0.5, modes, trap, short_scan, hz(100), narrow); }) ==
        ErrorKind::TargetUnreachable);
}

TEST_CASE("two-ion XY couplings for the asymmetric trap", "[coupling]") {
  const auto trap = two_ion_trap();
  const auto modes = chain_modes(2, trap, Axis::X);
  const auto tx = SDFTone::uniform(2, modes.omega[1] - khz(8), khz(15), 0.0);
  const auto ty = SDFTone::uniform(2, modes.omega[1] - khz(5), khz(11.5), kPi / 2);
  const auto [jx, jy] = xy_couplings(modes, tx, ty, trap);
  for (const auto* j : {&jx, &jy}) {
    CHECK(std::abs(to_hz((*j)(0, 1))) > 70.0);
    CHECK(std::abs(to_hz((*j)(0, 1))) < 90.0);
  }
  // below both modes the tilt mode dominates: b_1 b_2 < 0 and mu^2 < w^2 give J > 0
  CHECK(jx(0, 1) > 0);
  CHECK(jy(0, 1) > 0);
}

TEST_CASE("mode spectrum report", "[coupling]") {
  TrapConfig trap{mhz(1.1), mhz(0.9), mhz(0.1327), kYb171Mass, wave_number(355e-9)};
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n = 2; n <= 10; ++n) {
    const auto r = mode_spectrum_report(trap, n);
    REQUIRE(r.x_modes.size() == n);
    CHECK_FALSE(r.overlap);
    CHECK(r.band_gap < prev);
    CHECK(r.min_gap <= r.band_gap + 1e-9);
    const double oracle = *std::min_element(r.x_modes.begin(), r.x_modes.end()) -
                          *std::max_element(r.y_modes.begin(), r.y_modes.end());
    CHECK_THAT(r.band_gap, WithinRel(oracle, 1e-14));
    prev = r.band_gap;
  }
}
