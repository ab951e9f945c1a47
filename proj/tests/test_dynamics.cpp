#include <catch_amalgamated.hpp>

#include "ionxy/effective.hpp"
#include "ionxy/error.hpp"
#include "ionxy/evolution.hpp"
#include "ionxy/fit.hpp"
#include "ionxy/integrator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <random>

using namespace ionxy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using Dense = Eigen::MatrixXcd;

ModeSet com_modes() {
  Eigen::MatrixXd eta(2, 1);
  eta << 0.0648, 0.0648;
  return ModeSet::literal({mhz(1.1)}, eta);
}

CouplingMatrix coupling(const Eigen::MatrixXd& j, const char* label) {
  CouplingMatrix c;
  c.J = j;
  c.axis_label = label;
  return c;
}

Eigen::MatrixXd random_symmetric(std::size_t n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) j(a, b) = j(b, a) = u(rng);
  return j;
}

// Oracle H_eff from explicit bit manipulation: sx sx flips both bits with +1, sy sy flips
// both with -1 when the bits agree and +1 when they differ.
Dense oracle_heff(const Eigen::MatrixXd& jx, const Eigen::MatrixXd& jy) {
  const auto n = static_cast<std::size_t>(jx.rows());
  const std::size_t dim = std::size_t{1} << n;
  Dense h = Dense::Zero(dim, dim);
  for (std::size_t s = 0; s < dim; ++s)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        const std::size_t ba = std::size_t{1} << (n - 1 - a), bb = std::size_t{1} << (n - 1 - b);
        const bool same = ((s & ba) != 0) == ((s & bb) != 0);
        h(s ^ ba ^ bb, s) += jx(a, b) + (same ? -1.0 : 1.0) * jy(a, b);
      }
  return h;
}

StateVector random_state(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  StateVector v(dim);
  for (auto& x : v) x = cplx(g(rng), g(rng));
  return v / v.norm();
}

StateVector basis(std::size_t dim, std::size_t k) {
  StateVector v = StateVector::Zero(dim);
  v[k] = 1.0;
  return v;
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

DriveProgram matched_drive(double duration, bool rwa = true) {
  const auto modes = com_modes();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  const auto ty = scale_omega_y(tx, mhz(1.105), modes);
  return DriveProgram::continuous({tx, ty}, duration, rwa);
}

}  // namespace

TEST_CASE("DOPRI5 is fifth order", "[dynamics][integrator]") {
  // y' = -i w sx y from |0>: y = (cos wt, -i sin wt)
  const double w = 1.3, t1 = 2.0;
  auto err_for = [&](double h_fixed) {
    IntegratorOptions opt;
    opt.rtol = opt.atol = 1e6;
    opt.norm_tolerance = 1.0;
    opt.max_step = h_fixed;
    IntegratorStats st;
    StateVector y = basis(2, 0);
    double h = h_fixed;
    dopri5_advance([&](double, const StateVector& v, StateVector& dv) {
      dv.resize(2);
      dv[0] = cplx(0, -w) * v[1];
      dv[1] = cplx(0, -w) * v[0];
    }, 0.0, t1, y, h, opt, st, [](double, const StateVector&) {});
    StateVector exact(2);
    exact << std::cos(w * t1), cplx(0, -std::sin(w * t1));
    return (y - exact).norm();
  };
  const double e1 = err_for(0.2), e2 = err_for(0.1);
  const double order = std::log2(e1 / e2);
  CHECK(order > 4.5);
  CHECK(order < 6.5);
}

TEST_CASE("adaptive DOPRI5 meets its tolerance", "[dynamics][integrator]") {
  IntegratorOptions opt;
  IntegratorStats st;
  StateVector y = basis(2, 0);
  double h = 0;
  int calls = 0;
  dopri5_advance([&](double t, const StateVector& v, StateVector& dv) {
    dv.resize(2);
    const double w = 2.0 + std::sin(t);
    dv[0] = cplx(0, -w) * v[1];
    dv[1] = cplx(0, -w) * v[0];
  }, 0.0, 10.0, y, h, opt, st, [&](double, const StateVector&) { ++calls; });
  // rotation angle is the integral of w: 20 + 1 - cos(10)
  const double phi = 21.0 - std::cos(10.0);
  CHECK(std::abs(y[0] - std::cos(phi)) < 1e-6);
  CHECK(std::abs(y[1] - cplx(0, -std::sin(phi))) < 1e-6);
  CHECK(calls == st.accepted);
  CHECK(st.max_norm_error < 1e-7);
}

TEST_CASE("full evolution conserves the norm", "[dynamics][property]") {
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 4);
  for (const char* init : {"dd", "du", "uu"}) {
    const auto psi0 = QuantumState::product(spec, spin_index(init, 2));
    const auto tr = evolve_full(psi0, matched_drive(2e-3), modes, 2e-3, 10e-6);
    CHECK(tr.max_norm_error < 1e-7);
    for (const auto& s : tr.states) CHECK_THAT(s.norm(), WithinAbs(1.0, 1e-12));
    for (Eigen::Index r = 0; r < tr.populations.rows(); ++r)
      CHECK_THAT(tr.populations.row(r).sum(), WithinAbs(1.0, 1e-12));
    CHECK(tr.max_leakage < 1e-3);
  }
}

TEST_CASE("zero drive leaves populations unchanged", "[dynamics]") {
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 3);
  StateVector spin = StateVector::Zero(4);
  spin << 0.6, cplx(0, 0.48), 0.0, 0.64;
  const auto psi0 = QuantumState::from_spin(spec, spin, {1});
  const auto drive = DriveProgram::continuous({SDFTone::uniform(2, mhz(1.108), 0.0)}, 1e-3);
  const auto tr = evolve_full(psi0, drive, modes, 1e-3, 50e-6);
  for (Eigen::Index r = 0; r < tr.populations.rows(); ++r) {
    CHECK_THAT(tr.populations(r, 0), WithinAbs(0.36, 1e-14));
    CHECK_THAT(tr.populations(r, 3), WithinAbs(0.4096, 1e-14));
    CHECK_THAT(tr.mean_n(r, 0), WithinAbs(1.0, 1e-14));
  }
}

TEST_CASE("effective Hamiltonian matches the bit-flip oracle", "[dynamics][effective]") {
  std::mt19937_64 rng(21);
  for (std::size_t n : {2, 3, 4, 6}) {
    const auto jx = random_symmetric(n, rng, 500), jy = random_symmetric(n, rng, 500);
    const Dense got = Dense(effective_hamiltonian(coupling(jx, "xx"), coupling(jy, "yy")).cast<cplx>());
    CHECK((got - oracle_heff(jx, jy)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("two-ion closed form agrees with effective evolution", "[dynamics][effective][property]") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> uj(-800, 800), ut(0, 5e-3);
  std::uniform_int_distribution<int> ui(0, 3);
  double worst = 0, worst_oracle = 0;
  for (int k = 0; k < 1000; ++k) {
    const double jx = uj(rng), jy = uj(rng), tau = ut(rng);
    const int init = ui(rng);
    Eigen::MatrixXd mx = Eigen::MatrixXd::Zero(2, 2), my = mx;
    mx(0, 1) = mx(1, 0) = jx;
    my(0, 1) = my(1, 0) = jy;
    const auto cf = closed_form_2ion(jx, jy, static_cast<std::size_t>(init), tau);
    const auto tr = evolve_effective(coupling(mx, "xx"), coupling(my, "yy"), basis(4, init), {tau});
    const Dense u = (cplx(0, -tau) * oracle_heff(mx, my)).exp();
    for (int s = 0; s < 4; ++s) {
      worst = std::max(worst, std::abs(tr.states[0][s] - cf[s]));
      worst_oracle = std::max(worst_oracle, std::abs(u(s, init) - cf[s]));
    }
  }
  CHECK(worst < 1e-12);
  CHECK(worst_oracle < 1e-12);
  CHECK(closed_form_2ion(100, 50, "du", 1e-3)[1] == closed_form_2ion(100, 50, 1, 1e-3)[1]);
  CHECK(kind_of([] { closed_form_2ion(1, 1, 7, 0.1); }) == ErrorKind::ValidationError);
}

TEST_CASE("three-ion effective evolution matches the matrix exponential", "[dynamics][effective]") {
  std::mt19937_64 rng(33);
  const auto jx = random_symmetric(3, rng, 300), jy = random_symmetric(3, rng, 300);
  const auto psi0 = random_state(8, rng);
  std::vector<double> times;
  for (int k = 0; k <= 20; ++k) times.push_back(k * 2.5e-4);
  const auto tr = evolve_effective(coupling(jx, "xx"), coupling(jy, "yy"), psi0, times);
  const Dense h = oracle_heff(jx, jy);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const StateVector ref = (cplx(0, -times[k]) * h).exp() * psi0;
    CHECK((tr.states[k] - ref).norm() < 1e-10);
  }
}

TEST_CASE("effective energy is conserved", "[dynamics][effective][property]") {
  std::mt19937_64 rng(4);
  for (std::size_t n : {2, 5, 8}) {
    const auto jx = random_symmetric(n, rng, 400), jy = random_symmetric(n, rng, 400);
    const auto psi0 = random_state(std::size_t{1} << n, rng);
    std::vector<double> times;
    for (int k = 0; k <= 40; ++k) times.push_back(k * 1e-4);
    const auto tr = evolve_effective(coupling(jx, "xx"), coupling(jy, "yy"), psi0, times);
    const auto e = effective_energy(coupling(jx, "xx"), coupling(jy, "yy"), tr);
    for (double x : e) CHECK_THAT(x, WithinAbs(e.front(), 1e-8 * std::max(1.0, std::abs(e.front()))));
    for (const auto& s : tr.states) CHECK_THAT(s.norm(), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("pure Ising coupling gives sin^2 flips", "[dynamics][effective]") {
  const double j = 369.67;
  Eigen::MatrixXd mx = Eigen::MatrixXd::Zero(2, 2);
  mx(0, 1) = mx(1, 0) = j;
  std::vector<double> times;
  for (int k = 0; k <= 50; ++k) times.push_back(k * 1e-4);
  const auto tr = evolve_effective(coupling(mx, "xx"), coupling(Eigen::MatrixXd::Zero(2, 2), "yy"), basis(4, 0), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK_THAT(tr.populations(k, 3), WithinAbs(std::pow(std::sin(j * times[k]), 2), 1e-12));
    CHECK_THAT(tr.populations(k, 1) + tr.populations(k, 2), WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("Lanczos propagation for 11 ions matches a Taylor oracle", "[dynamics][effective]") {
  std::mt19937_64 rng(11);
  const std::size_t n = 11;
  const auto jx = random_symmetric(n, rng, 200), jy = random_symmetric(n, rng, 200);
  const auto psi0 = random_state(std::size_t{1} << n, rng);
  const Eigen::SparseMatrix<cplx> h = oracle_heff(jx, jy).sparseView();
  const std::vector<double> times{0.0, 1e-3, 3e-3};
  const auto tr = evolve_effective(coupling(jx, "xx"), coupling(jy, "yy"), psi0, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    // exp(-iHt) psi by Taylor series on short substeps
    StateVector v = psi0;
    const int sub = 200;
    const double dt = times[k] / sub;
    for (int s = 0; s < sub && dt > 0; ++s) {
      StateVector term = v, acc = v;
      for (int m = 1; m < 30; ++m) {
        term = (cplx(0, -dt) / double(m)) * (h * term);
        acc += term;
      }
      v = acc;
    }
    CHECK((tr.states[k] - v).norm() < 1e-9);
  }
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(15, 15);
  big(0, 1) = big(1, 0) = 1;
  CHECK(kind_of([&] { evolve_effective(coupling(big, "xx"), coupling(big, "yy"), basis(1 << 15, 0), {0.1}); }) ==
        ErrorKind::DimensionCap);
}

TEST_CASE("lab and RWA frames agree over a short window", "[dynamics][slow]") {
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 4);
  const auto psi0 = QuantumState::product(spec, spin_index("dd", 2));
  const double t = 0.2e-3;
  const auto rwa = evolve_full(psi0, matched_drive(t, true), modes, t, 10e-6);
  const auto lab = evolve_full(psi0, matched_drive(t, false), modes, t, 10e-6);
  REQUIRE(rwa.size() == lab.size());
  CHECK((rwa.populations - lab.populations).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((rwa.mean_n - lab.mean_n).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("full dynamics tracks the effective model away from the modes", "[dynamics]") {
  // far detuned, weak drive: the spin-phonon model reduces to H_eff
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 3);
  const auto tx = SDFTone::uniform(2, mhz(1.1) + khz(60), khz(20));
  const auto ty = scale_omega_y(tx, mhz(1.1) + khz(40), modes);
  const auto [jx, jy] = xy_couplings(modes, tx, ty);
  const double t = 1.0 / jx.max_abs();
  const auto drive = DriveProgram::continuous({tx, ty}, t);
  const auto full = evolve_full(QuantumState::product(spec, spin_index("du", 2)), drive, modes, t, t / 50);
  const auto eff = evolve_effective(jx, jy, basis(4, 1), full.times);
  const auto obs = observables(full, &eff);
  REQUIRE(obs.fidelity.size() == full.size());
  for (double f : obs.fidelity) CHECK(f > 0.99);
  // the excitation actually hops: du is emptied to below a half at some sample
  CHECK(full.populations.col(1).minCoeff() < 0.5);
}

TEST_CASE("fidelity to the effective model improves with detuning", "[dynamics]") {
  // same J, growing detuning: residual spin-motion entanglement shrinks like (eta Omega / delta)^2
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 4);
  std::vector<double> infid;
  for (double det : {8.0, 16.0, 32.0}) {
    const double rabi = khz(15) * std::sqrt(det / 8.0);
    const auto tx = SDFTone::uniform(2, mhz(1.1) + khz(det), rabi);
    SDFTone ty = tx;
    ty.spin_phase = kPi / 2;
    ty.rabi.assign(2, 0.0);
    const auto j = ising_couplings(modes, tx);
    const double tau = 1.0 / (4.0 * j.max_abs());
    const auto drive = DriveProgram::continuous({tx}, tau);
    const auto full = evolve_full(QuantumState::product(spec, 0), drive, modes, tau, tau / 40);
    const auto eff = evolve_effective(j, coupling(Eigen::MatrixXd::Zero(2, 2), "yy"), basis(4, 0), full.times);
    const auto obs = observables(full, &eff);
    infid.push_back(1.0 - *std::min_element(obs.fidelity.begin(), obs.fidelity.end()));
  }
  CHECK(infid[0] > infid[1]);
  CHECK(infid[1] > infid[2]);
  // the residual scales close to 1/delta^2 at fixed J (Omega^2 ~ delta)
  CHECK(infid[0] / infid[1] > 1.5);
}

TEST_CASE("observables need stored states", "[dynamics][error]") {
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 3);
  EvolveOptions opt;
  opt.store_states = false;
  const auto tr = evolve_full(QuantumState::product(spec, 0), matched_drive(1e-4), modes, 1e-4, 1e-5, opt);
  CHECK_FALSE(tr.has_states());
  CHECK(tr.populations.rows() == 11);
  CHECK(kind_of([&] { observables(tr); }) == ErrorKind::MissingStates);

  opt.store_states = true;
  const auto tr2 = evolve_full(QuantumState::product(spec, 0), matched_drive(1e-4), modes, 1e-4, 1e-5, opt);
  const auto obs = observables(tr2);
  CHECK((obs.populations - tr.populations).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(obs.fidelity.empty());
}

TEST_CASE("leakage guards", "[dynamics][error]") {
  const auto modes = com_modes();
  HilbertSpec spec = HilbertSpec::all_modes(modes, 1);
  // strong near-resonant drive pumps phonons into the truncation edge
  const auto drive = DriveProgram::continuous({SDFTone::uniform(2, mhz(1.1) + khz(1), khz(200))}, 1e-3);
  CHECK(kind_of([&] { evolve_full(QuantumState::product(spec, 0), drive, modes, 1e-3, 1e-4); }) ==
        ErrorKind::LeakageExceeded);
  HilbertSpec s4 = HilbertSpec::all_modes(modes, 4);
  CHECK(kind_of([&] { evolve_full(QuantumState::product(s4, 0, {4}), matched_drive(1e-4), modes, 1e-4, 1e-5); }) ==
        ErrorKind::ValidationError);
}

TEST_CASE("sample grid", "[dynamics]") {
  const auto g = sample_grid(1.0, 0.3);
  REQUIRE(g.size() == 5);
  CHECK(g.back() == 1.0);
  CHECK_THAT(g[3], WithinAbs(0.9, 1e-15));
  CHECK(sample_grid(1.0, 0.25).size() == 5);
  CHECK(kind_of([] { sample_grid(1.0, 0.0); }) == ErrorKind::ValidationError);
}

TEST_CASE("time averages", "[dynamics]") {
  std::vector<double> t;
  Eigen::VectorXd v(101);
  for (int k = 0; k <= 100; ++k) {
    t.push_back(k * 0.01);
    v[k] = t.back() * t.back();
  }
  CHECK_THAT(time_average(t, v), WithinAbs(1.0 / 3.0, 1e-4));
}

TEST_CASE("oscillation fit recovers the frequency", "[dynamics][fit]") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.005);
  const double w = 742.0, gamma = 40.0, alpha = 0.9, beta = 0.45, phi = 0.3, c = 0.01;
  std::vector<double> t, y;
  for (int k = 0; k <= 2000; ++k) {
    t.push_back(k * 4e-6);
    y.push_back(oscillation_model(t.back(), w, gamma, alpha, beta, phi, c) + noise(rng));
  }
  const auto f = fit_oscillation(t, y);
  CHECK_THAT(f.omega, WithinRel(w, 1e-3));
  CHECK_THAT(f.gamma, WithinRel(gamma, 0.1));
  CHECK_THAT(f.T, WithinRel(1.0 / f.gamma, 1e-12));
  CHECK(f.omega_err > 0);
  CHECK(f.rms_residual < 0.01);
  CHECK_THAT(dominant_angular_frequency(t, y), WithinRel(2 * w, 0.05));
}

TEST_CASE("thermal averaging is deterministic and independent of jobs", "[dynamics][thermal]") {
  const auto modes = com_modes();
  const auto spec = HilbertSpec::all_modes(modes, 4);
  const auto drive = matched_drive(2e-4);
  std::mt19937_64 rng(1);
  const auto nbar = std::vector<double>{0.3};
  for (int k = 0; k < 200; ++k) {
    const auto f = sample_thermal_fock(spec, nbar, rng);
    CHECK(f[0] >= 0);
    CHECK(f[0] < 4);
  }
  const auto a = evolve_thermal(spec, basis(4, 0), nbar, 6, 42, drive, modes, 2e-4, 2e-5, {}, 1);
  const auto b = evolve_thermal(spec, basis(4, 0), nbar, 6, 42, drive, modes, 2e-4, 2e-5, {}, 3);
  const auto c = evolve_thermal(spec, basis(4, 0), nbar, 6, 43, drive, modes, 2e-4, 2e-5, {}, 1);
  CHECK(a.populations == b.populations);
  CHECK(a.mean_n == b.mean_n);
  CHECK_FALSE(a.has_states());
  CHECK(a.mean_n(0, 0) != c.mean_n(0, 0));
  for (Eigen::Index r = 0; r < a.populations.rows(); ++r)
    CHECK_THAT(a.populations.row(r).sum(), WithinAbs(1.0, 1e-12));
  CHECK(kind_of([&] { evolve_thermal(spec, basis(4, 0), nbar, 0, 1, drive, modes, 2e-4, 2e-5); }) ==
        ErrorKind::ValidationError);
}
