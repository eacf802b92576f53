#pragma once

#include <vector>

#include "chirpctl/types.hpp"

namespace chirpctl {

// Closed real interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double pick(double x) const { return lo + x * (hi - lo); }  // x in [0, 1]
  bool contains(double v, double tol = 0.0) const {
    return lo - tol <= v && v <= hi + tol;
  }
  bool sign_definite() const { return lo > 0.0 || hi < 0.0; }
};

// Axis-aligned box of ensemble parameters.
struct ParamBox {
  std::vector<Interval> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  bool contains(const RVec& alpha, double tol = 1e-12) const;
  // Vertex selected by bitmask: bit i set -> hi endpoint on axis i.
  RVec corner(unsigned mask) const;
};

// One energy level as an affine function of the parameter vector.
struct AffineLevel {
  double offset = 0.0;
  RVec slope;  // one entry per box axis

  double at(const RVec& alpha) const { return offset + slope.dot(alpha); }
};

// Family of n-level Hamiltonians H(alpha) = diag(level energies) sharing a
// real symmetric coupling operator whose entries are known only up to
// intervals. The level ordering must hold uniformly over the whole box.
struct EnsembleSystem {
  std::vector<AffineLevel> levels;
  std::vector<std::vector<Interval>> coupling;  // symmetric n x n
  ParamBox box;

  int n() const { return static_cast<int>(levels.size()); }
  // Throws std::invalid_argument naming the first offending entry: shape
  // mismatches, asymmetric coupling, or a level pair whose ordering fails
  // somewhere on the box (the gap minimum of an affine family sits at a
  // box vertex, so vertices certify the whole box).
  void validate() const;
};

// One concrete system drawn from the ensemble.
struct SampledSystem {
  RVec lambda;    // strictly increasing level energies
  RMat coupling;  // real symmetric

  int n() const { return static_cast<int>(lambda.size()); }
};

// Realize a concrete system. alpha must lie in the box (std::domain_error
// otherwise). delta_choice selects each coupling entry inside its interval:
// 0 -> lo, 1 -> hi, affinely in between. The matrix overload must be
// symmetric with entries in [0, 1]; the scalar overload broadcasts.
SampledSystem sample_system(const EnsembleSystem& ens, const RVec& alpha,
                            const RMat& delta_choice);
SampledSystem sample_system(const EnsembleSystem& ens, const RVec& alpha,
                            double delta_choice = 0.5);

// Shift all level energies so the targeted pair sits symmetrically about
// zero: lambda_p = -gap/2, lambda_q = +gap/2. Gaps are unchanged.
// Indices are 0-based with p < q.
SampledSystem recenter(const SampledSystem& sys, int p, int q);

// H = diag(lambda) + w * coupling at control value w. Real symmetric.
RMat hamiltonian_at(const SampledSystem& sys, double w);

}  // namespace chirpctl
