#pragma once

#include <utility>
#include <variant>
#include <vector>

namespace ionxy {

/// Blackman window w(x) = 0.42 - 0.5 cos(2 pi x) + 0.08 cos(4 pi x) on x in [0, 1].
double blackman(double x);

/// Rising Blackman edge on s in [0, 1]: the first half of the window, 0 at s=0 and 1 at s=1.
double blackman_rise(double s);

/// Mean of blackman_rise(s)^2 over [0, 1].
double blackman_rise_mean_square();

struct FlatEnvelope {};

/// Flat top with Blackman ramps. `edge_fraction` is the total share of the pulse spent in
/// rise plus fall, split evenly.
struct BlackmanEdges {
  double edge_fraction = 0.4;
};

/// Linear interpolation through (s, value) knots; s must be increasing within [0, 1].
struct PiecewiseLinear {
  std::vector<std::pair<double, double>> knots;
};

/// Amplitude envelope over the normalised time s in [0, 1] of one drive segment.
class Envelope {
 public:
  Envelope() = default;
  Envelope(FlatEnvelope e) : shape_(e) {}
  Envelope(BlackmanEdges e);
  Envelope(PiecewiseLinear e);

  double operator()(double s) const;

  /// Mean of the squared envelope over the segment.
  double mean_square(int samples = 4096) const;

  bool is_flat() const { return std::holds_alternative<FlatEnvelope>(shape_); }
  const auto& shape() const { return shape_; }

 private:
  std::variant<FlatEnvelope, BlackmanEdges, PiecewiseLinear> shape_;
};

}  // namespace ionxy
