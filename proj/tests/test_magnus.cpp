#include <catch_amalgamated.hpp>

#include "ionxy/coupling.hpp"
#include "ionxy/error.hpp"
#include "ionxy/magnus.hpp"

using namespace ionxy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModeSet com_modes() {
  Eigen::MatrixXd eta(2, 1);
  eta << 0.0648, 0.0648;
  return ModeSet::literal({mhz(1.1)}, eta);
}

std::vector<double> grid(double t_final, int points) {
  std::vector<double> t;
  for (int k = 0; k <= points; ++k) t.push_back(t_final * k / points);
  return t;
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

}  // namespace

TEST_CASE("single-tone Magnus terms follow the RWA closed form", "[magnus]") {
  // f(t) = g e^{i delta t} with g = eta Omega / 2: the second-order spin-spin generator is
  // 2 g^2 (tau / delta - sin(delta tau) / delta^2) and the displacement 2 g |sin(delta tau / 2)| / delta.
  const auto modes = com_modes();
  const double delta = khz(8), rabi_x = khz(15);
  SDFTone tx = SDFTone::uniform(2, mhz(1.1) + delta, rabi_x, 0.0);
  SDFTone ty = SDFTone::uniform(2, mhz(1.1) + khz(5), 0.0, kPi / 2);
  const double t_final = 1e-3;
  const auto tau = grid(t_final, 100);
  const auto d = magnus_diagnostics(DriveProgram::continuous({tx, ty}, t_final), modes, tau);
  const double g = 0.0648 * rabi_x / 2;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const double chi = 2 * g * g * (tau[k] / delta - std::sin(delta * tau[k]) / (delta * delta));
    CHECK_THAT(std::abs(d.chi_x[k](0, 1)), WithinAbs(std::abs(chi), 1e-6 * std::abs(chi) + 1e-12));
    CHECK_THAT(d.phi[k][0], WithinAbs(2 * g * std::abs(std::sin(delta * tau[k] / 2)) / delta, 1e-9));
    CHECK(d.chi_y[k].cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.lambda[k].cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.zeta[k].cwiseAbs().maxCoeff() == 0.0);
  }
  // secular slope is the RWA coupling 2 g^2 / delta, within the oscillation's leakage into the fit
  CHECK_THAT(d.max_chi_slope, WithinRel(2 * g * g / delta, 0.01));
  CHECK(d.max_lambda == 0.0);
  CHECK(d.max_zeta == 0.0);
  CHECK(d.secular_ratio == 0.0);
  CHECK(d.bound_satisfied);
}

TEST_CASE("matched two-tone drive: Lambda bounded, chi tracks J", "[magnus]") {
  const auto modes = com_modes();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  const auto ty = scale_omega_y(tx, mhz(1.105), modes);
  const auto [jx, jy] = xy_couplings(modes, tx, ty);
  const double t_final = 1.0 / jx.max_abs();
  const auto d = magnus_diagnostics(DriveProgram::continuous({tx, ty}, t_final), modes, grid(t_final, 200));
  CHECK_THAT(d.lambda_bound, WithinRel(4 * jx.max_abs() / khz(3), 1e-9));
  CHECK(d.max_lambda <= d.lambda_bound);
  CHECK(d.bound_satisfied);
  CHECK_THAT(d.max_chi_slope, WithinRel(jx.max_abs(), 0.03));
  CHECK_THAT(std::abs(d.chi_y_slope(0, 1)), WithinRel(jy.max_abs(), 0.03));
  CHECK(d.secular_ratio < 0.05);
  CHECK(d.max_zeta > 0.0);
  CHECK_THAT(d.jx_max, WithinRel(jx.max_abs(), 1e-12));
}

TEST_CASE("degenerate tones make Lambda secular", "[magnus]") {
  const auto modes = com_modes();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15), 0.0);
  const auto ty = SDFTone::uniform(2, mhz(1.108), khz(15), kPi / 2);
  const double t_final = 5e-3;
  const auto d = magnus_diagnostics(DriveProgram::continuous({tx, ty}, t_final), modes, grid(t_final, 200));
  CHECK(std::isinf(d.lambda_bound));
  // with a common detuning the x-y cross term accumulates like the couplings themselves
  CHECK(std::abs(d.lambda_slope(0, 1)) > 0.5 * d.max_chi_slope);
  CHECK(d.secular_ratio > 0.5);
}

TEST_CASE("tau = 0 gives vanishing terms", "[magnus]") {
  const auto modes = com_modes();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  const auto ty = scale_omega_y(tx, mhz(1.105), modes);
  const auto d = magnus_diagnostics(DriveProgram::continuous({tx, ty}, 1e-3), modes, {0.0, 5e-4, 1e-3});
  CHECK(d.chi_x[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.phi[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unsupported drives are rejected", "[magnus][error]") {
  const auto modes = com_modes();
  const auto tx = SDFTone::uniform(2, mhz(1.108), khz(15));
  CHECK(kind_of([&] { magnus_diagnostics(DriveProgram::continuous({tx}, 1e-3), modes, {1e-4}); }) ==
        ErrorKind::UnsupportedDrive);
  SDFTone skew = tx;
  skew.spin_phase = 0.3;
  CHECK(kind_of([&] { magnus_diagnostics(DriveProgram::continuous({tx, skew}, 1e-3), modes, {1e-4}); }) ==
        ErrorKind::UnsupportedDrive);
  const auto ty = scale_omega_y(tx, mhz(1.105), modes);
  CHECK(kind_of([&] { magnus_diagnostics(DriveProgram::continuous({tx, ty}, 1e-3), modes, {2e-3}); }) ==
        ErrorKind::ValidationError);
  CHECK(kind_of([&] { magnus_diagnostics(DriveProgram::continuous({tx, ty}, 1e-3), modes, {}); }) ==
        ErrorKind::ValidationError);
}

TEST_CASE("linear slope", "[magnus]") {
  CHECK_THAT(linear_slope({0, 1, 2, 3}, {1, 3, 5, 7}), WithinAbs(2.0, 1e-14));
  CHECK_THROWS_AS(linear_slope({1}, {1}), Error);
}
