#pragma once

#include <string>
#include <vector>

#include "chirpctl/control.hpp"
#include "chirpctl/model.hpp"
#include "chirpctl/types.hpp"

namespace chirpctl {

// Why a configuration fails the frequency-separation requirements.
//   "thm1-c1"       targeted gap leaves the swept window (v0, v1) somewhere
//                   on the box
//   "thm1-c2"       an untargeted gap enters [v0, v1] somewhere on the box
//   "prop2"         a gap enters the doubled window [2*v0, 2*v1]
//   "coupling-zero" the targeted coupling interval contains 0
struct Violation {
  int j = 0, k = 0;        // 0-based level pair (j < k); (p, q) for coupling
  std::string condition;   // one of the identifiers above
  RVec alpha;              // witnessing box vertex (empty for coupling-zero)
  double gap = 0.0;        // offending gap value at the witness
};

struct ConditionReport {
  bool holds = true;
  std::vector<Violation> violations;
};

// Range of the affine gap lambda_k - lambda_j over the box, along with the
// vertices attaining the extremes (affine functions peak at vertices, so
// the two corners certify the full range).
struct GapRange {
  double lo = 0.0, hi = 0.0;
  RVec argmin, argmax;
};

GapRange gap_range(const EnsembleSystem& ens, int j, int k);

// Checks, uniformly over the box: the targeted gap stays strictly inside
// (v0 + margin, v1 - margin); every other gap stays outside [v0 - margin,
// v1 + margin]; and the targeted coupling interval excludes zero. A gap
// range that straddles the window produces one violation per extreme
// vertex. Runs on every pair even after the first failure, so the report
// is complete.
ConditionReport check_theorem1(const EnsembleSystem& ens, int p, int q,
                               double v0, double v1, double margin = 0.0);

// check_theorem1 plus: every gap (the targeted pair included) must also
// avoid the doubled window [2*v0 - margin, 2*v1 + margin].
ConditionReport check_prop2(const EnsembleSystem& ens, int p, int q,
                            double v0, double v1, double margin = 0.0);

// The same window checks for one concrete system (zero-width box).
ConditionReport check_theorem1_point(const SampledSystem& sys, int p, int q,
                                     double v0, double v1,
                                     double margin = 0.0);

// Slow time at which the sweep crosses the given gap: f(sbar) = gap.
// Closed form for the linear sweep, bisection (tolerance 1e-12 * T)
// otherwise. Requires gap strictly inside (v0, v1).
double crossing_time(const ChirpedPulse& pulse, double gap);

}  // namespace chirpctl
