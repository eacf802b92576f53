#include "chirpctl/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace chirpctl {

namespace {

std::string pair_str(int j, int k) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(%d, %d)", j, k);
  return buf;
}

}  // namespace

bool ParamBox::contains(const RVec& alpha, double tol) const {
  if (alpha.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (!axes[i].contains(alpha(i), tol)) return false;
  return true;
}

RVec ParamBox::corner(unsigned mask) const {
  RVec v(dim());
  for (int i = 0; i < dim(); ++i)
    v(i) = (mask >> i) & 1u ? axes[i].hi : axes[i].lo;
  return v;
}

void EnsembleSystem::validate() const {
  int nn = n();
  if (nn < 2)
    throw std::invalid_argument("EnsembleSystem: need at least two levels");
  int m = box.dim();
  for (int j = 0; j < nn; ++j) {
    if (levels[j].slope.size() != m)
      throw std::invalid_argument("EnsembleSystem: level " +
                                  std::to_string(j) +
                                  " slope length does not match the box");
  }
  for (const auto& axis : box.axes) {
    if (!(axis.lo <= axis.hi))
      throw std::invalid_argument("EnsembleSystem: inverted box axis");
  }
  if (static_cast<int>(coupling.size()) != nn)
    throw std::invalid_argument("EnsembleSystem: coupling row count != n");
  for (int j = 0; j < nn; ++j) {
    if (static_cast<int>(coupling[j].size()) != nn)
      throw std::invalid_argument("EnsembleSystem: coupling row " +
                                  std::to_string(j) + " has wrong length");
  }
  for (int j = 0; j < nn; ++j) {
    for (int k = j + 1; k < nn; ++k) {
      const Interval& a = coupling[j][k];
      const Interval& b = coupling[k][j];
      if (std::abs(a.lo - b.lo) > 1e-12 || std::abs(a.hi - b.hi) > 1e-12)
        throw std::invalid_argument(
            "EnsembleSystem: coupling entry " + pair_str(j, k) +
            " is not symmetric");
      if (!(a.lo <= a.hi))
        throw std::invalid_argument("EnsembleSystem: coupling entry " +
                                    pair_str(j, k) + " is inverted");
    }
  }
  // Level ordering must hold over the whole box. Each adjacent gap is
  // affine in alpha, so its minimum sits at the per-axis endpoint that
  // pulls it down; that vertex certifies the entire box.
  for (int j = 0; j + 1 < nn; ++j) {
    double gap = levels[j + 1].offset - levels[j].offset;
    for (int i = 0; i < m; ++i) {
      double ds = levels[j + 1].slope(i) - levels[j].slope(i);
      gap += ds * (ds >= 0.0 ? box.axes[i].lo : box.axes[i].hi);
    }
    if (!(gap > 0.0))
      throw std::invalid_argument(
          "EnsembleSystem: levels " + pair_str(j, j + 1) +
          " lose their ordering inside the box (min gap " +
          std::to_string(gap) + ")");
  }
}

SampledSystem sample_system(const EnsembleSystem& ens, const RVec& alpha,
                            const RMat& delta_choice) {
  ens.validate();
  if (!ens.box.contains(alpha))
    throw std::domain_error("sample_system: parameter outside the box");
  int n = ens.n();
  if (delta_choice.rows() != n || delta_choice.cols() != n)
    throw std::invalid_argument("sample_system: delta_choice must be n x n");
  for (int j = 0; j < n; ++j) {
    for (int k = j; k < n; ++k) {
      double d = delta_choice(j, k);
      if (std::abs(d - delta_choice(k, j)) > 1e-12)
        throw std::invalid_argument(
            "sample_system: delta_choice is not symmetric at " +
            pair_str(j, k));
      if (d < -1e-12 || d > 1.0 + 1e-12)
        throw std::invalid_argument(
            "sample_system: delta_choice outside [0, 1] at " +
            pair_str(j, k));
    }
  }
  SampledSystem sys;
  sys.lambda = RVec(n);
  for (int j = 0; j < n; ++j) sys.lambda(j) = ens.levels[j].at(alpha);
  sys.coupling = RMat(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      sys.coupling(j, k) = ens.coupling[j][k].pick(delta_choice(j, k));
  sys.coupling = 0.5 * (sys.coupling + sys.coupling.transpose().eval());
  return sys;
}

SampledSystem sample_system(const EnsembleSystem& ens, const RVec& alpha,
                            double delta_choice) {
  return sample_system(ens, alpha,
                       RMat::Constant(ens.n(), ens.n(), delta_choice));
}

SampledSystem recenter(const SampledSystem& sys, int p, int q) {
  if (p < 0 || q <= p || q >= sys.n())
    throw std::invalid_argument("recenter: need 0 <= p < q < n");
  double shift = 0.5 * (sys.lambda(p) + sys.lambda(q));
  SampledSystem out = sys;
  out.lambda.array() -= shift;
  return out;
}

RMat hamiltonian_at(const SampledSystem& sys, double w) {
  RMat h = w * sys.coupling;
  h.diagonal() += sys.lambda;
  return h;
}

}  // namespace chirpctl
