#include "chirpctl/numeric.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace chirpctl {

bool is_hermitian(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

Mat expi_hermitian(const Mat& x, double htol) {
  if (!is_hermitian(x, htol))
    throw std::invalid_argument("expi_hermitian: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(x);
  const RVec& ev = es.eigenvalues();
  Vec phases(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    phases(i) = Complex(std::cos(ev(i)), std::sin(ev(i)));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a,
                   double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double err = left + right - whole;
  if (depth <= 0 || std::abs(err) <= 15.0 * tol)
    return left + right + err / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

CubicSpline::CubicSpline(std::vector<double> samples) : y_(std::move(samples)) {
  int n = static_cast<int>(y_.size()) - 1;
  if (n < 3)
    throw std::invalid_argument("CubicSpline: need at least 4 samples");
  h_ = 1.0 / n;
  m_.assign(n + 1, 0.0);

  // Natural boundary: second derivative zero at both ends. Tridiagonal
  // system (h/6) m_{i-1} + (2h/3) m_i + (h/6) m_{i+1} = second difference.
  std::vector<double> diag(n + 1, 2.0 * h_ / 3.0), rhs(n + 1, 0.0);
  for (int i = 1; i < n; ++i)
    rhs[i] = (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / h_;
  double off = h_ / 6.0;
  // Thomas sweep over interior rows only.
  for (int i = 2; i < n; ++i) {
    double w = off / diag[i - 1];
    diag[i] -= w * off;
    rhs[i] -= w * rhs[i - 1];
  }
  for (int i = n - 1; i >= 1; --i)
    m_[i] = (rhs[i] - off * m_[i + 1]) / diag[i];

  // Exact integral of each cubic segment, accumulated at the knots.
  cum_.assign(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    double seg = h_ * (0.5 * (y_[i] + y_[i + 1]) -
                       h_ * h_ * (m_[i] + m_[i + 1]) / 24.0);
    cum_[i + 1] = cum_[i] + seg;
  }
}

int CubicSpline::clamp_segment(double x, double& local) const {
  int n = segments();
  if (x <= 0.0) {
    local = 0.0;
    return 0;
  }
  if (x >= 1.0) {
    local = 1.0;
    return n - 1;
  }
  int i = static_cast<int>(x / h_);
  if (i >= n) i = n - 1;
  local = x / h_ - i;
  return i;
}

double CubicSpline::value(double x) const {
  double b;
  int i = clamp_segment(x, b);
  double a = 1.0 - b;
  return a * y_[i] + b * y_[i + 1] +
         h_ * h_ / 6.0 *
             ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]);
}

double CubicSpline::deriv(double x) const {
  double b;
  int i = clamp_segment(x, b);
  double a = 1.0 - b;
  return (y_[i + 1] - y_[i]) / h_ +
         h_ / 6.0 *
             ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]);
}

double CubicSpline::integral(double x) const {
  if (x <= 0.0) return 0.0;
  double b;
  int i = clamp_segment(x, b);
  if (x >= 1.0) return cum_.back();
  double omb = 1.0 - b;
  // Antiderivative of the segment cubic from its left knot, in the local
  // coordinate b; a = 1 - b makes the two knot contributions symmetric.
  double part =
      h_ * (y_[i] * (b - 0.5 * b * b) + y_[i + 1] * 0.5 * b * b +
            h_ * h_ / 6.0 *
                (m_[i] * (-0.25 - 0.25 * omb * omb * omb * omb +
                          0.5 * omb * omb) +
                 m_[i + 1] * (0.25 * b * b * b * b - 0.5 * b * b)));
  return cum_[i] + part;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need matching x/y with >= 2 points");
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  return f;
}

}  // namespace chirpctl
