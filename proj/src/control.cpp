#include "chirpctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chirpctl {

Shape Shape::sine() {
  Shape s;
  s.kind_ = Kind::sine;
  s.min_ = 0.0;
  s.max_ = 1.0;
  return s;
}

Shape Shape::linear(double a, double b) {
  Shape s;
  s.kind_ = Kind::linear;
  s.a_ = a;
  s.b_ = b;
  s.min_ = std::min(a, b);
  s.max_ = std::max(a, b);
  return s;
}

Shape Shape::tabulated(std::vector<double> samples) {
  if (samples.size() < 4)
    throw std::invalid_argument("Shape::tabulated: need at least 4 samples");
  Shape s;
  s.kind_ = Kind::tabulated;
  s.samples_ = samples;
  s.spline_ = CubicSpline(std::move(samples));
  // The spline can overshoot its knots slightly, so scan it densely.
  int scan = std::max(2048, 16 * s.spline_.segments());
  s.min_ = s.max_ = s.spline_.value(0.0);
  for (int i = 1; i <= scan; ++i) {
    double v = s.spline_.value(static_cast<double>(i) / scan);
    s.min_ = std::min(s.min_, v);
    s.max_ = std::max(s.max_, v);
  }
  return s;
}

double Shape::value(double x) const {
  switch (kind_) {
    case Kind::sine:
      return std::sin(M_PI * x);
    case Kind::linear:
      return a_ + (b_ - a_) * x;
    default:
      return spline_.value(x);
  }
}

double Shape::slope(double x) const {
  switch (kind_) {
    case Kind::sine:
      return M_PI * std::cos(M_PI * x);
    case Kind::linear:
      return b_ - a_;
    default:
      return spline_.deriv(x);
  }
}

double Shape::integral(double x) const {
  switch (kind_) {
    case Kind::sine:
      return (1.0 - std::cos(M_PI * x)) / M_PI;
    case Kind::linear:
      return a_ * x + 0.5 * (b_ - a_) * x * x;
    default:
      return spline_.integral(x);
  }
}

double Shape::min_value() const { return min_; }
double Shape::max_value() const { return max_; }

void ChirpedPulse::validate() const {
  if (!(eps1 > 0.0))
    throw std::invalid_argument("ChirpedPulse: eps1 must be positive");
  if (!(eps2 > 0.0))
    throw std::invalid_argument("ChirpedPulse: eps2 must be positive");
  if (!(T > 0.0))
    throw std::invalid_argument("ChirpedPulse: T must be positive");
  if (!(v0 > 0.0))
    throw std::invalid_argument("ChirpedPulse: v0 must be positive");
  if (!(v1 > v0))
    throw std::invalid_argument("ChirpedPulse: need v1 > v0");

  if (std::abs(u(0.0)) > 1e-9 || std::abs(u(T)) > 1e-9)
    throw std::invalid_argument(
        "ChirpedPulse: envelope must vanish at both window ends");
  if (!(envelope.max_value() > 0.0))
    throw std::invalid_argument("ChirpedPulse: envelope peak must be positive");

  if (!chirp_is_default) {
    if (std::abs(f(0.0) - v0) > 1e-6 * std::max(1.0, v0) ||
        std::abs(f(T) - v1) > 1e-6 * std::max(1.0, v1))
      throw std::invalid_argument(
          "ChirpedPulse: chirp must sweep from v0 to v1");
    int grid = 1001;
    for (int i = 0; i <= grid; ++i) {
      double s = T * i / grid;
      if (df(s) < -1e-9 * std::max(1.0, v1 - v0))
        throw std::invalid_argument(
            "ChirpedPulse: chirp must be nondecreasing");
    }
  }
}

double ChirpedPulse::u(double s) const { return envelope.value(s / T); }

double ChirpedPulse::du(double s) const { return envelope.slope(s / T) / T; }

double ChirpedPulse::f(double s) const {
  if (chirp_is_default) return v0 + (v1 - v0) * s / T;
  return chirp.value(s / T);
}

double ChirpedPulse::df(double s) const {
  if (chirp_is_default) return (v1 - v0) / T;
  return chirp.slope(s / T) / T;
}

double ChirpedPulse::F(double s) const {
  if (chirp_is_default || chirp.kind() == Shape::Kind::linear)
    return v0 * s + 0.5 * (v1 - v0) * s * s / T;
  return T * chirp.integral(s / T);
}

double ChirpedPulse::phase(double t) const {
  return F(eps1 * eps2 * t) / (eps1 * eps2);
}

double ChirpedPulse::omega(double t) const {
  return 2.0 * eps1 * u(eps1 * eps2 * t) * std::cos(phase(t));
}

ChirpedPulse synthesize_standard(double v0, double v1, double eps1,
                                 double eps2) {
  ChirpedPulse p;
  p.eps1 = eps1;
  p.eps2 = eps2;
  p.v0 = v0;
  p.v1 = v1;
  p.T = 1.0;
  p.envelope = Shape::sine();
  p.chirp = Shape::linear(v0, v1);
  p.chirp_is_default = true;
  p.validate();
  return p;
}

PiecewiseControl PiecewiseControl::single(ChirpedPulse pulse) {
  pulse.validate();
  PiecewiseControl c;
  c.segments.push_back(std::move(pulse));
  return c;
}

double PiecewiseControl::total_slow() const {
  double s = 0.0;
  for (const auto& seg : segments) s += seg.T;
  return s;
}

double PiecewiseControl::segment_start(int i) const {
  double t = 0.0;
  for (int j = 0; j < i; ++j) t += segments[j].horizon();
  return t;
}

int PiecewiseControl::segment_at(double t) const {
  int last = static_cast<int>(segments.size()) - 1;
  double start = 0.0;
  for (int i = 0; i < last; ++i) {
    double end = start + segments[i].horizon();
    if (t < end) return i;
    start = end;
  }
  return last;
}

double PiecewiseControl::omega(double t) const {
  int i = segment_at(t);
  return segments[i].omega(t - segment_start(i));
}

double PiecewiseControl::max_carrier() const {
  double m = 0.0;
  for (const auto& seg : segments) {
    double c = seg.chirp_is_default ? std::max(seg.v0, seg.v1)
                                    : seg.chirp.max_value();
    m = std::max(m, c);
  }
  return m;
}

double PiecewiseControl::max_envelope() const {
  double m = 0.0;
  for (const auto& seg : segments) m = std::max(m, seg.max_envelope());
  return m;
}

PiecewiseControl concat(std::vector<ChirpedPulse> pulses) {
  if (pulses.empty())
    throw std::invalid_argument("concat: need at least one segment");
  for (auto& p : pulses) p.validate();
  for (size_t i = 1; i < pulses.size(); ++i) {
    if (pulses[i].eps1 != pulses[0].eps1 || pulses[i].eps2 != pulses[0].eps2)
      throw std::invalid_argument(
          "concat: all segments must share (eps1, eps2)");
  }
  PiecewiseControl c;
  c.segments = std::move(pulses);
  return c;
}

}  // namespace chirpctl
