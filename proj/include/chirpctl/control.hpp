#pragma once

#include <string>
#include <vector>

#include "chirpctl/numeric.hpp"
#include "chirpctl/types.hpp"

namespace chirpctl {

// Scalar profile on the normalized domain [0, 1]: either a built-in closed
// form (half sine arch, straight line) or a cubic spline through equally
// spaced samples. Exposes the value, the derivative, and the running
// integral from 0 -- all three are needed by the control law and by the
// frame diagnostics.
class Shape {
 public:
  enum class Kind { sine, linear, tabulated };

  Shape() = default;  // the half sine arch

  static Shape sine();                         // sin(pi x)
  static Shape linear(double a, double b);     // a + (b - a) x
  static Shape tabulated(std::vector<double> samples);  // >= 4 samples

  double value(double x) const;
  double slope(double x) const;     // d/dx
  double integral(double x) const;  // integral from 0 to x

  double min_value() const;
  double max_value() const;
  Kind kind() const { return kind_; }
  const std::vector<double>& samples() const { return samples_; }
  double linear_a() const { return a_; }
  double linear_b() const { return b_; }

 private:
  Kind kind_ = Kind::sine;
  double a_ = 0.0, b_ = 0.0;      // linear endpoints
  std::vector<double> samples_;   // tabulated input (kept for round-trips)
  CubicSpline spline_;
  double min_ = 0.0, max_ = 1.0;  // defaults match the sine arch
};

// One chirped pulse: omega(t) = 2*eps1 * u(eps1*eps2*t) * cos(phi(t)) with
// phi(t) the running integral of the swept carrier frequency
// f(eps1*eps2*t). The envelope u vanishes at both ends of [0, T] and the
// carrier sweeps monotonically from v0 up to v1 across the window. eps1
// scales the amplitude, eps2 the sweep rate; the pulse lasts T slow units,
// i.e. T/(eps1*eps2) time units.
struct ChirpedPulse {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double v0 = 0.0;
  double v1 = 0.0;
  double T = 1.0;                      // duration in slow time
  Shape envelope = Shape::sine();      // u on [0, T], via x = s/T
  Shape chirp;                         // f on [0, T]; default linear(v0, v1)
  bool chirp_is_default = true;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  double horizon() const { return T / (eps1 * eps2); }

  // Slow-time profiles (s in [0, T]).
  double u(double s) const;
  double du(double s) const;   // du/ds
  double f(double s) const;
  double df(double s) const;   // df/ds
  double F(double s) const;    // integral of f from 0 to s

  // Fast-time control law (t in [0, horizon()]).
  double phase(double t) const;  // phi(t), integral of f(eps1*eps2*tau)
  double omega(double t) const;

  double max_envelope() const { return envelope.max_value(); }
};

// The pulse used throughout: sine envelope, linear sweep v0 -> v1, T = 1.
ChirpedPulse synthesize_standard(double v0, double v1, double eps1,
                                 double eps2);

// Several pulses played back to back. All segments share (eps1, eps2);
// each segment runs on its own clock, so its oscillation phase restarts at
// the segment boundary. Segments own [t_i, t_{i+1}) with the last segment
// closed on the right.
struct PiecewiseControl {
  std::vector<ChirpedPulse> segments;

  static PiecewiseControl single(ChirpedPulse pulse);

  double eps1() const { return segments.front().eps1; }
  double eps2() const { return segments.front().eps2; }
  double total_slow() const;
  double horizon() const { return total_slow() / (eps1() * eps2()); }

  int segment_at(double t) const;        // fast time -> segment index
  double segment_start(int i) const;     // fast-time start of segment i
  double omega(double t) const;

  double max_carrier() const;   // max over segments of v1
  double max_envelope() const;  // max over segments of the envelope peak
};

// Validates the segments and checks they share (eps1, eps2).
PiecewiseControl concat(std::vector<ChirpedPulse> pulses);

}  // namespace chirpctl
