#pragma once

#include <functional>
#include <vector>

#include "chirpctl/types.hpp"

namespace chirpctl {

// exp(i*X) for Hermitian X, computed by eigendecomposition. Unitary up to
// rounding. Throws std::invalid_argument if X is not Hermitian within htol.
Mat expi_hermitian(const Mat& x, double htol = 1e-10);

bool is_hermitian(const Mat& m, double tol = 1e-12);

// Recursive adaptive Simpson quadrature of f on [a, b] to absolute
// tolerance tol. depth caps the recursion (interval width a.. b / 2^depth).
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth = 48);

// Natural cubic spline through equally spaced samples on [0, 1].
// Provides the interpolant, its derivative, and the exact antiderivative of
// the piecewise cubic (the integral of a cubic segment is evaluated in
// closed form, so no quadrature error enters on top of interpolation error).
class CubicSpline {
 public:
  CubicSpline() = default;
  explicit CubicSpline(std::vector<double> samples);

  double value(double x) const;
  double deriv(double x) const;
  double integral(double x) const;  // integral from 0 to x

  int segments() const { return static_cast<int>(y_.size()) - 1; }

 private:
  std::vector<double> y_;    // knot values
  std::vector<double> m_;    // knot second derivatives
  std::vector<double> cum_;  // integral from 0 up to each knot
  double h_ = 0.0;           // knot spacing

  int clamp_segment(double x, double& local) const;
};

// Ordinary least squares line fit y = slope*x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace chirpctl
