#include "ionxy/envelope.hpp"

#include "ionxy/error.hpp"
#include "ionxy/units.hpp"

#include <algorithm>
#include <cmath>

namespace ionxy {

double blackman(double x) {
  return 0.42 - 0.5 * std::cos(kTwoPi * x) + 0.08 * std::cos(2.0 * kTwoPi * x);
}

double blackman_rise(double s) { return blackman(0.5 * std::clamp(s, 0.0, 1.0)); }

double blackman_rise_mean_square() {
  // Mean of w^2 over the full window; the rising half has the same mean by symmetry.
  return 0.42 * 0.42 + 0.5 * 0.5 / 2.0 + 0.08 * 0.08 / 2.0;
}

Envelope::Envelope(BlackmanEdges e) : shape_(e) {
  if (!(e.edge_fraction >= 0.0 && e.edge_fraction <= 0.9))
    throw Error(ErrorKind::InvalidEdgeFraction, "floquet-bench", "Envelope",
                "edge_fraction must lie in [0, 0.9]", "edge_fraction");
}

Envelope::Envelope(PiecewiseLinear e) : shape_(std::move(e)) {
  const auto& k = std::get<PiecewiseLinear>(shape_).knots;
  if (k.empty())
    throw Error(ErrorKind::ValidationError, "coupling-engine", "Envelope", "piecewise envelope needs knots",
                "envelope");
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i].second < 0.0 || k[i].second > 1.0 || k[i].first < 0.0 || k[i].first > 1.0)
      throw Error(ErrorKind::ValidationError, "coupling-engine", "Envelope",
                  "envelope knots must lie in [0,1] x [0,1]", "envelope");
    if (i > 0 && !(k[i].first > k[i - 1].first))
      throw Error(ErrorKind::ValidationError, "coupling-engine", "Envelope",
                  "envelope knot times must increase", "envelope");
  }
}

double Envelope::operator()(double s) const {
  struct Visitor {
    double s;
    double operator()(const FlatEnvelope&) const { return 1.0; }
    double operator()(const BlackmanEdges& e) const {
      const double edge = 0.5 * e.edge_fraction;
      if (edge <= 0.0) return 1.0;
      if (s < edge) return blackman_rise(s / edge);
      if (s > 1.0 - edge) return blackman_rise((1.0 - s) / edge);
      return 1.0;
    }
    double operator()(const PiecewiseLinear& p) const {
      const auto& k = p.knots;
      if (s <= k.front().first) return k.front().second;
      if (s >= k.back().first) return k.back().second;
      auto it = std::upper_bound(k.begin(), k.end(), s,
                                 [](double v, const auto& knot) { return v < knot.first; });
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      const double w = (s - lo.first) / (hi.first - lo.first);
      return lo.second + w * (hi.second - lo.second);
    }
  };
  return std::visit(Visitor{s}, shape_);
}

double Envelope::mean_square(int samples) const {
  // Composite Simpson on [0, 1].
  const int n = samples + (samples % 2);
  const double h = 1.0 / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double v = (*this)(i * h);
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * v * v;
  }
  return acc * h / 3.0;
}

}  // namespace ionxy
