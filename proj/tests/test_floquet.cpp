#include <catch_amalgamated.hpp>

#include "ionxy/error.hpp"
#include "ionxy/fit.hpp"
#include "ionxy/floquet.hpp"

using namespace ionxy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Dimensionless single-mode model: omega = 2 pi, mu = 2 pi 1.02, eta = 0.1, Omega = 2 pi 0.03.
ModeSet unit_modes() {
  Eigen::MatrixXd eta(2, 1);
  eta << 0.1, 0.1;
  return ModeSet::literal({kTwoPi}, eta);
}

SDFTone unit_tone(double phase) { return SDFTone::uniform(2, kTwoPi * 1.02, kTwoPi * 0.03, phase); }

double oracle_blackman_rise_ms() {
  // rise(s) = w(s / 2), w(x) = 0.42 - 0.5 cos 2 pi x + 0.08 cos 4 pi x; midpoint rule
  const int n = 200000;
  double acc = 0;
  for (int k = 0; k < n; ++k) {
    const double x = 0.5 * (k + 0.5) / n;
    const double w = 0.42 - 0.5 * std::cos(kTwoPi * x) + 0.08 * std::cos(2 * kTwoPi * x);
    acc += w * w;
  }
  return acc / n;
}

double cw_cycles() {
  const CouplingOptions o{.resonance_guard = 0.0, .mode_mask = {}};
  return ising_couplings(unit_modes(), unit_tone(0.0), o).max_abs() / kTwoPi;
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

TEST_CASE("coupling factor", "[floquet]") {
  CHECK_THAT(blackman_rise_mean_square(), WithinAbs(oracle_blackman_rise_ms(), 1e-8));
  CHECK_THAT(blackman_rise_mean_square(), WithinAbs(0.3046, 1e-4));
  CHECK_THAT(floquet_coupling_factor(0.0), WithinAbs(0.5, 1e-15));
  CHECK_THAT(floquet_coupling_factor(0.4), WithinAbs(0.5 * (0.6 + 0.4 * oracle_blackman_rise_ms()), 1e-8));
  // the factor is the time-averaged squared envelope of one half-period, halved for the duty cycle
  Envelope e = BlackmanEdges{0.4};
  CHECK_THAT(0.5 * e.mean_square(20000), WithinAbs(floquet_coupling_factor(0.4), 1e-6));
  CHECK(kind_of([] { floquet_coupling_factor(0.95); }) == ErrorKind::InvalidEdgeFraction);
  CHECK(kind_of([] { floquet_coupling_factor(-0.1); }) == ErrorKind::InvalidEdgeFraction);
}

TEST_CASE("Blackman envelope shape", "[floquet]") {
  Envelope e = BlackmanEdges{0.4};
  CHECK_THAT(e(0.0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(e(1.0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(e(0.5), WithinAbs(1.0, 1e-15));
  CHECK_THAT(e(0.2), WithinAbs(1.0, 1e-12));
  CHECK_THAT(e(0.1), WithinAbs(e(0.9), 1e-12));
  for (double s = 0; s < 0.2; s += 0.01) CHECK(e(s + 0.01) >= e(s) - 1e-15);
}

TEST_CASE("schedule and program layout", "[floquet]") {
  const double j = 8e-5;
  const auto s = FloquetSchedule::make(32, j, unit_tone(0.0), unit_tone(1.0));
  CHECK_THAT(s.t_f, WithinRel(1.0 / (32 * j), 1e-15));
  CHECK_THAT(s.tone_yy.spin_phase, WithinAbs(kPi / 2, 1e-15));
  CHECK(s.tone_xx.spin_phase == 0.0);

  const auto one = build_floquet_program(s, s.t_f);
  REQUIRE(one.segments.size() == 2);
  CHECK_THAT(one.segments[0].duration, WithinRel(s.t_f / 2, 1e-15));
  CHECK(one.segments[0].tones[0].spin_phase == 0.0);
  CHECK_THAT(one.segments[1].tones[0].spin_phase, WithinAbs(kPi / 2, 1e-15));
  CHECK(build_floquet_program(s, 3.5 * s.t_f).segments.size() == 8);

  const auto flat = build_floquet_program(FloquetSchedule::make(32, j, unit_tone(0.0), unit_tone(0.0), 0.0), s.t_f);
  for (const auto& seg : flat.segments)
    for (double x : {0.0, 0.01, 0.5, 0.99, 1.0}) CHECK(seg.tones[0].envelope(x) == 1.0);
  CHECK_THAT(build_floquet_program(s, s.t_f).segments[0].tones[0].envelope(0.0), WithinAbs(0.0, 1e-12));

  CHECK(kind_of([&] { FloquetSchedule::make(32, j, unit_tone(0.0), unit_tone(0.0), 0.95); }) ==
        ErrorKind::InvalidEdgeFraction);
  CHECK(kind_of([&] { FloquetSchedule::make(0, j, unit_tone(0.0), unit_tone(0.0)); }) == ErrorKind::ValidationError);
  CHECK(kind_of([&] { build_floquet_program(s, -1.0); }) == ErrorKind::ValidationError);
  CHECK(kind_of([&] { FloquetSchedule::make(8, j, unit_tone(0.0), SDFTone::uniform(3, 1.0, 1.0)); }) ==
        ErrorKind::DimensionMismatch);
}

TEST_CASE("deviation and spectral helpers", "[floquet]") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Random(20, 4).cwiseAbs();
  const auto self = population_deviation(p, p, {0, 5, 10});
  CHECK(self.stroboscopic == 0.0);
  CHECK(self.all_samples == 0.0);
  CHECK(self.final_time == 0.0);
  Eigen::MatrixXd q = p;
  q(5, 1) += 0.3;
  q(7, 2) -= 0.5;
  const auto d = population_deviation(q, p, {0, 5, 10});
  CHECK_THAT(d.stroboscopic, WithinAbs(0.3, 1e-15));
  CHECK_THAT(d.all_samples, WithinAbs(0.5, 1e-15));
  CHECK(kind_of([&] { population_deviation(p, q.topRows(3), {0}); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { population_deviation(p, q, {40}); }) == ErrorKind::DimensionMismatch);

  std::vector<double> t;
  Eigen::VectorXd v(4001);
  for (int k = 0; k <= 4000; ++k) {
    t.push_back(k * 0.01);
    v[k] = 0.7 + 0.25 * std::cos(3.0 * t.back() + 0.4);
  }
  // 40 time units hold 120 / 2 pi cycles; the leakage from the non-integer count is small
  CHECK_THAT(spectral_amplitude(t, v, 3.0), WithinAbs(0.25, 5e-3));
  CHECK(spectral_amplitude(t, v, 11.0) < 0.01);
}

TEST_CASE("scan results do not depend on order or jobs", "[floquet]") {
  const double j = cw_cycles() * floquet_coupling_factor(0.4);
  CHECK_THAT(j, WithinRel(8.0403e-5, 1e-4));
  const auto templ = FloquetSchedule::make(8, j, unit_tone(0.0), unit_tone(kPi / 2));
  FloquetScanOptions opt;
  opt.total_time = 0.05 / j;
  opt.n_max = 8;
  const auto a = scan_nf({16, 32}, templ, unit_modes(), opt, 1);
  const auto b = scan_nf({32, 16}, templ, unit_modes(), opt, 2);
  REQUIRE(a.points.size() == 2);
  for (int k = 0; k < 2; ++k) {
    const auto& pa = a.points[k];
    const auto& pb = b.points[1 - k];
    CHECK(pa.n_f == pb.n_f);
    CHECK(pa.mean_phonons == pb.mean_phonons);
    CHECK(pa.deviation.stroboscopic == pb.deviation.stroboscopic);
    CHECK(pa.slow_amplitude == pb.slow_amplitude);
    CHECK(pa.max_leakage < 1e-3);
    CHECK(pa.inits == std::vector<std::string>{"dd", "du"});
  }
  FloquetScanOptions no_dd = opt;
  no_dd.inits = {"du"};
  CHECK(kind_of([&] { scan_nf({16}, templ, unit_modes(), no_dd); }) == ErrorKind::ValidationError);
}

TEST_CASE("Floquet coupling close to the duty-cycle formula", "[floquet][slow]") {
  // du -> ud transfer under J (sx sx + sy sy) has P_du = cos^2(2 J t)
  const double j = cw_cycles() * floquet_coupling_factor(0.4);
  const auto templ = FloquetSchedule::make(92, j, unit_tone(0.0), unit_tone(kPi / 2));
  FloquetScanOptions opt;
  opt.inits = {"dd", "du"};
  opt.total_time = 1.0 / j;
  opt.n_max = 6;
  opt.keep_trajectories = true;
  const auto r = scan_nf({92}, templ, unit_modes(), opt);
  const auto& tr = r.points[0].trajectories[1];
  std::vector<double> p_du(tr.populations.rows());
  for (Eigen::Index k = 0; k < tr.populations.rows(); ++k) p_du[k] = tr.populations(k, 1);
  const auto fit = fit_oscillation(tr.times, p_du);
  const double j_eff = fit.omega / 2 / kTwoPi;
  CHECK_THAT(j_eff, WithinRel(j, 0.15));
  CHECK(r.points[0].deviation.stroboscopic < 0.2);
}

TEST_CASE("dual-tone baseline", "[floquet]") {
  const auto modes = unit_modes();
  FloquetScanOptions opt;
  opt.inits = {"dd"};
  opt.total_time = 200.0;
  const auto weak = dual_sdf_baseline(1e-8, kTwoPi * 0.02, kTwoPi * 0.025, modes, opt);
  CHECK(weak.mean_phonons_avg < 1e-5);
  CHECK_THAT(weak.jx(0, 1), WithinRel(kTwoPi * 1e-8, 1e-9));
  CHECK_THAT(weak.jy(0, 1), WithinRel(kTwoPi * 1e-8, 1e-9));
  CHECK(weak.rabi_x < weak.rabi_y);
  const auto strong = dual_sdf_baseline(8e-5, kTwoPi * 0.02, kTwoPi * 0.025, modes, opt);
  // off-resonant displacement: <n> ~ (eta Omega / delta)^2 ~ J
  CHECK_THAT(strong.mean_phonons_avg / weak.mean_phonons_avg, WithinRel(8e-5 / 1e-8, 0.05));
  // J is quadratic in Omega
  CHECK_THAT(strong.rabi_x / weak.rabi_x, WithinRel(std::sqrt(8e-5 / 1e-8), 1e-9));
  CHECK(kind_of([&] { dual_sdf_baseline(8e-5, 0.1, 0.1, modes, opt); }) == ErrorKind::DegenerateTones);
  CHECK(kind_of([&] { dual_sdf_baseline(8e-5, 0.0, 0.1, modes, opt); }) == ErrorKind::ResonantTone);
  CHECK(kind_of([&] { dual_sdf_baseline(0.0, 0.1, 0.2, modes, opt); }) == ErrorKind::ValidationError);
}
