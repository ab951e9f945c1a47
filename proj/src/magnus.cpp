#include "ionxy/magnus.hpp"

#include "ionxy/coupling.hpp"
#include "ionxy/error.hpp"
#include "ionxy/units.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace ionxy {

namespace {

constexpr const char* kModule = "dynamics-engine";

struct Layout {
  std::size_t n{};  // ions
  std::size_t m{};  // modes
  std::size_t q() const { return 2 * n * m; }
  // axis 0 = x, 1 = y
  std::size_t at(int axis, std::size_t ion, std::size_t mode) const {
    return (static_cast<std::size_t>(axis) * n + ion) * m + mode;
  }
};

/// State of the accumulators: F (q), S1 = int f F^T and S2 = int f F^H (q x q).
struct Accum {
  Eigen::VectorXcd F;
  Eigen::MatrixXcd S1;
  Eigen::MatrixXcd S2;
};

}  // namespace

double linear_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorKind::ValidationError, kModule, "linear_slope", "need at least two matched points");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

MagnusDiagnostics magnus_diagnostics(const DriveProgram& drive, const ModeSet& modes, const std::vector<double>& tau,
                                     const MagnusOptions& options) {
  const std::size_t n = modes.n_ions();
  drive.validate(n);
  const SDFTone* tx = nullptr;
  const SDFTone* ty = nullptr;
  for (std::size_t s = 0; s < drive.segments.size(); ++s) {
    const auto& tones = drive.segments[s].tones;
    if (tones.size() != 2)
      throw Error(ErrorKind::UnsupportedDrive, kModule, "magnus_diagnostics",
                  fmt::format("segment {} has {} tones; the diagnostics need exactly two", s, tones.size()),
                  fmt::format("drive.segments[{}].tones", s));
    const SDFTone* a = &tones[0];
    const SDFTone* b = &tones[1];
    if (std::abs(a->spin_phase) > 1e-12) std::swap(a, b);
    if (std::abs(a->spin_phase) > 1e-12 || std::abs(b->spin_phase - kPi / 2) > 1e-12)
      throw Error(ErrorKind::UnsupportedDrive, kModule, "magnus_diagnostics",
                  "tones must carry spin phases 0 and pi/2", fmt::format("drive.segments[{}].tones", s));
    if (s == 0) {
      tx = a;
      ty = b;
    }
  }
  if (tau.empty())
    throw Error(ErrorKind::ValidationError, kModule, "magnus_diagnostics", "empty tau grid", "tau");
  for (std::size_t k = 0; k < tau.size(); ++k)
    if (tau[k] < 0 || tau[k] > drive.duration() * (1 + 1e-12) || (k > 0 && tau[k] <= tau[k - 1]))
      throw Error(ErrorKind::ValidationError, kModule, "magnus_diagnostics",
                  "tau grid must be increasing and inside the program", "tau");

  const Layout L{n, modes.n_modes()};
  const auto Q = static_cast<Eigen::Index>(L.q());
  const auto bounds = drive.boundaries();

  // Coefficient vector f(t) for the whole Layout.
  auto coeffs = [&](double t, std::size_t seg, Eigen::VectorXcd& f) {
    f.setZero(Q);
    const auto& sg = drive.segments[seg];
    const double s = (t - bounds[seg]) / sg.duration;
    for (const auto& tone : sg.tones) {
      const double c = std::cos(tone.spin_phase);
      const double sn = std::sin(tone.spin_phase);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < L.m; ++m) {
          const cplx v = drive_coefficient(tone, i, modes.eta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)),
                                           modes.omega[m], t, s, drive.use_rwa);
          f[static_cast<Eigen::Index>(L.at(0, i, m))] += c * v;
          f[static_cast<Eigen::Index>(L.at(1, i, m))] += sn * v;
        }
    }
  };

  std::vector<double> dt_cap(drive.segments.size());
  for (std::size_t s = 0; s < dt_cap.size(); ++s) {
    double fastest = 0.0;
    for (const auto& tone : drive.segments[s].tones)
      for (double w : modes.omega)
        fastest = std::max(fastest, drive.use_rwa ? std::abs(w - tone.mu) : std::max(tone.mu, w));
    dt_cap[s] = drive.segments[s].duration / 16.0;
    if (fastest > 0) dt_cap[s] = std::min(dt_cap[s], kTwoPi / (options.steps_per_period * fastest));
  }

  Accum acc{Eigen::VectorXcd::Zero(Q), Eigen::MatrixXcd::Zero(Q, Q), Eigen::MatrixXcd::Zero(Q, Q)};
  Eigen::VectorXcd f0(Q), fh(Q), f1(Q);

  // One RK4 step of dF = f, dS1 = f F^T, dS2 = f F^H. F only depends on t, so its stages are
  // exact combinations of the sampled f.
  auto rk4 = [&](double t, double h, std::size_t seg) {
    coeffs(t, seg, f0);
    coeffs(t + 0.5 * h, seg, fh);
    coeffs(t + h, seg, f1);
    const Eigen::VectorXcd F0 = acc.F;
    const Eigen::VectorXcd Fh = acc.F + 0.5 * h * f0;       // stage 2
    const Eigen::VectorXcd Fh2 = acc.F + 0.5 * h * fh;      // stage 3
    const Eigen::VectorXcd F1 = acc.F + h * fh;             // stage 4
    const Eigen::MatrixXcd d1 = f0 * F0.transpose() + 2.0 * fh * Fh.transpose() + 2.0 * fh * Fh2.transpose() +
                                f1 * F1.transpose();
    const Eigen::MatrixXcd d2 = f0 * F0.adjoint() + 2.0 * fh * Fh.adjoint() + 2.0 * fh * Fh2.adjoint() +
                                f1 * F1.adjoint();
    acc.S1 += (h / 6.0) * d1;
    acc.S2 += (h / 6.0) * d2;
    acc.F += (h / 6.0) * (f0 + 4.0 * fh + f1);
  };

  MagnusDiagnostics out;
  out.tau = tau;

  auto snapshot = [&] {
    Eigen::MatrixXd cx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd cy = cx;
    Eigen::MatrixXd lam = cx;
    Eigen::VectorXd zeta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd phi = zeta;
    auto S1 = [&](std::size_t p, std::size_t q) { return acc.S1(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)); };
    auto S2 = [&](std::size_t p, std::size_t q) { return acc.S2(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)); };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double sx = 0, sy = 0, sl = 0;
        for (std::size_t m = 0; m < L.m; ++m) {
          sx += S2(L.at(0, i, m), L.at(0, j, m)).imag() + S2(L.at(0, j, m), L.at(0, i, m)).imag();
          sy += S2(L.at(1, i, m), L.at(1, j, m)).imag() + S2(L.at(1, j, m), L.at(1, i, m)).imag();
          sl += S2(L.at(0, i, m), L.at(1, j, m)).imag() + S2(L.at(1, j, m), L.at(0, i, m)).imag();
        }
        cx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sx;
        cy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sy;
        lam(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sl;
      }
      // sz_i (P a a + h.c. + Q a^dag a + c) / 2
      const auto M = static_cast<Eigen::Index>(L.m);
      Eigen::MatrixXcd P(M, M), Qm(M, M);
      double c = 0.0;
      double f2 = 0.0;
      for (std::size_t a = 0; a < L.m; ++a) {
        c += 2.0 * (S2(L.at(0, i, a), L.at(1, i, a)) - S2(L.at(1, i, a), L.at(0, i, a))).real();
        f2 += std::norm(acc.F[static_cast<Eigen::Index>(L.at(0, i, a))]) +
              std::norm(acc.F[static_cast<Eigen::Index>(L.at(1, i, a))]);
        for (std::size_t b = 0; b < L.m; ++b) {
          P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              2.0 * (S1(L.at(0, i, a), L.at(1, i, b)) - S1(L.at(1, i, a), L.at(0, i, b)));
          Qm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              2.0 * (std::conj(S2(L.at(0, i, a), L.at(1, i, b))) - std::conj(S2(L.at(1, i, a), L.at(0, i, b))) +
                     S2(L.at(0, i, b), L.at(1, i, a)) - S2(L.at(1, i, b), L.at(0, i, a)));
        }
      }
      const Eigen::MatrixXcd Ps = 0.5 * (P + P.transpose());
      zeta[static_cast<Eigen::Index>(i)] = 0.5 * std::sqrt(2.0 * Ps.squaredNorm() + Qm.squaredNorm() + c * c);
      phi[static_cast<Eigen::Index>(i)] = std::sqrt(f2);
    }
    out.chi_x.push_back(cx);
    out.chi_y.push_back(cy);
    out.lambda.push_back(lam);
    out.zeta.push_back(zeta);
    out.phi.push_back(phi);
  };

  double t = 0.0;
  std::size_t seg = 0;
  for (double target : tau) {
    while (t < target) {
      while (seg + 1 < drive.segments.size() && t >= bounds[seg + 1]) ++seg;
      const double stop = seg + 1 == drive.segments.size() ? target : std::min(target, bounds[seg + 1]);
      const double span = stop - t;
      const auto steps = static_cast<long>(std::ceil(span / dt_cap[seg] - 1e-9));
      const double h = span / static_cast<double>(std::max(1L, steps));
      for (long k = 0; k < std::max(1L, steps); ++k) rk4(t + static_cast<double>(k) * h, h, seg);
      t = stop;
    }
    snapshot();
  }

  // Slopes and extrema
  const auto N = static_cast<Eigen::Index>(n);
  out.chi_x_slope = Eigen::MatrixXd::Zero(N, N);
  out.chi_y_slope = Eigen::MatrixXd::Zero(N, N);
  out.lambda_slope = Eigen::MatrixXd::Zero(N, N);
  out.zeta_slope = Eigen::VectorXd::Zero(N);
  const bool fit = tau.size() >= 2;
  std::vector<double> buf(tau.size());
  auto series_slope = [&](auto getter) {
    for (std::size_t k = 0; k < tau.size(); ++k) buf[k] = getter(k);
    return fit ? linear_slope(tau, buf) : 0.0;
  };
  double max_lam_slope = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      if (i == j) continue;
      out.chi_x_slope(i, j) = series_slope([&](std::size_t k) { return out.chi_x[k](i, j); });
      out.chi_y_slope(i, j) = series_slope([&](std::size_t k) { return out.chi_y[k](i, j); });
      out.lambda_slope(i, j) = series_slope([&](std::size_t k) { return out.lambda[k](i, j); });
      out.max_chi_slope = std::max({out.max_chi_slope, std::abs(out.chi_x_slope(i, j)), std::abs(out.chi_y_slope(i, j))});
      max_lam_slope = std::max(max_lam_slope, std::abs(out.lambda_slope(i, j)));
      for (std::size_t k = 0; k < tau.size(); ++k) out.max_lambda = std::max(out.max_lambda, std::abs(out.lambda[k](i, j)));
    }
    out.zeta_slope[i] = series_slope([&](std::size_t k) { return out.zeta[k][i]; });
    for (std::size_t k = 0; k < tau.size(); ++k) {
      out.max_zeta = std::max(out.max_zeta, out.zeta[k][i]);
      out.max_phi = std::max(out.max_phi, out.phi[k][i]);
    }
  }
  const double max_sec = std::max(max_lam_slope, out.zeta_slope.cwiseAbs().maxCoeff());
  out.secular_ratio = out.max_chi_slope > 0 ? max_sec / out.max_chi_slope
                                            : (max_sec > 0 ? std::numeric_limits<double>::infinity() : 0.0);

  const CouplingOptions copt;
  const double jx = tx->rabi.empty() ? 0.0 : ising_couplings(modes, *tx, copt).max_abs();
  const double jy = ty->rabi.empty() ? 0.0 : ising_couplings(modes, *ty, copt).max_abs();
  out.jx_max = jx;
  out.jy_max = jy;
  const double dmu = std::abs(tx->mu - ty->mu);
  out.lambda_bound = dmu > 0 ? 4.0 * std::max(jx, jy) / dmu : std::numeric_limits<double>::infinity();
  out.bound_satisfied = out.max_lambda <= out.lambda_bound;
  return out;
}

}  // namespace ionxy
