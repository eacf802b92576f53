#include "chirpctl/conditions.hpp"

#include <cmath>
#include <stdexcept>

namespace chirpctl {

GapRange gap_range(const EnsembleSystem& ens, int j, int k) {
  if (j < 0 || k <= j || k >= ens.n())
    throw std::invalid_argument("gap_range: need 0 <= j < k < n");
  int m = ens.box.dim();
  GapRange r;
  r.lo = r.hi = ens.levels[k].offset - ens.levels[j].offset;
  r.argmin = RVec(m);
  r.argmax = RVec(m);
  for (int i = 0; i < m; ++i) {
    double ds = ens.levels[k].slope(i) - ens.levels[j].slope(i);
    const Interval& ax = ens.box.axes[i];
    double lo_end = ds >= 0.0 ? ax.lo : ax.hi;
    double hi_end = ds >= 0.0 ? ax.hi : ax.lo;
    r.lo += ds * lo_end;
    r.hi += ds * hi_end;
    r.argmin(i) = lo_end;
    r.argmax(i) = hi_end;
  }
  return r;
}

namespace {

void check_indices(int n, int p, int q) {
  if (p < 0 || q <= p || q >= n)
    throw std::invalid_argument("condition check: need 0 <= p < q < n");
}

// One violation per extreme vertex whose gap falls inside [wlo, whi]; a
// range that straddles the window without either extreme inside still
// passes through it, so both extremes are reported as witnesses. A
// zero-width range yields a single record.
void report_window_entry(std::vector<Violation>* out, int j, int k,
                         const std::string& id, const GapRange& r,
                         double wlo, double whi) {
  bool lo_in = r.lo >= wlo && r.lo <= whi;
  bool hi_in = r.hi >= wlo && r.hi <= whi;
  bool straddle = r.lo < wlo && r.hi > whi;
  if (!(lo_in || hi_in || straddle)) return;
  bool want_min = lo_in || straddle;
  bool want_max = hi_in || straddle;
  if (want_min) out->push_back({j, k, id, r.argmin, r.lo});
  if (want_max && !(want_min && r.hi == r.lo))
    out->push_back({j, k, id, r.argmax, r.hi});
}

ConditionReport run_checks(const EnsembleSystem& ens, int p, int q, double v0,
                           double v1, double margin, bool doubled) {
  ens.validate();
  check_indices(ens.n(), p, q);
  if (margin < 0.0)
    throw std::invalid_argument("condition check: margin must be >= 0");
  if (!(0.0 < v0 && v0 < v1))
    throw std::invalid_argument("condition check: need 0 < v0 < v1");

  ConditionReport rep;
  if (ens.coupling[p][q].contains(0.0)) {
    Violation v;
    v.j = p;
    v.k = q;
    v.condition = "coupling-zero";
    v.gap = 0.0;
    rep.violations.push_back(v);
  }

  int n = ens.n();
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      GapRange r = gap_range(ens, j, k);
      if (j == p && k == q) {
        // The targeted gap must stay strictly inside the narrowed window.
        if (r.lo <= v0 + margin)
          rep.violations.push_back({j, k, "thm1-c1", r.argmin, r.lo});
        if (r.hi >= v1 - margin &&
            !(r.lo <= v0 + margin && r.hi == r.lo))
          rep.violations.push_back({j, k, "thm1-c1", r.argmax, r.hi});
      } else {
        report_window_entry(&rep.violations, j, k, "thm1-c2", r,
                            v0 - margin, v1 + margin);
      }
      if (doubled) {
        report_window_entry(&rep.violations, j, k, "prop2", r,
                            2.0 * v0 - margin, 2.0 * v1 + margin);
      }
    }
  }
  rep.holds = rep.violations.empty();
  return rep;
}

}  // namespace

ConditionReport check_theorem1(const EnsembleSystem& ens, int p, int q,
                               double v0, double v1, double margin) {
  return run_checks(ens, p, q, v0, v1, margin, false);
}

ConditionReport check_prop2(const EnsembleSystem& ens, int p, int q,
                            double v0, double v1, double margin) {
  return run_checks(ens, p, q, v0, v1, margin, true);
}

ConditionReport check_theorem1_point(const SampledSystem& sys, int p, int q,
                                     double v0, double v1, double margin) {
  check_indices(sys.n(), p, q);
  ConditionReport rep;
  if (sys.coupling(p, q) == 0.0) {
    Violation v;
    v.j = p;
    v.k = q;
    v.condition = "coupling-zero";
    rep.violations.push_back(v);
  }
  int n = sys.n();
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      double gap = sys.lambda(k) - sys.lambda(j);
      Violation v;
      v.j = j;
      v.k = k;
      v.gap = gap;
      if (j == p && k == q) {
        if (gap <= v0 + margin || gap >= v1 - margin) {
          v.condition = "thm1-c1";
          rep.violations.push_back(v);
        }
      } else if (gap >= v0 - margin && gap <= v1 + margin) {
        v.condition = "thm1-c2";
        rep.violations.push_back(v);
      }
    }
  }
  rep.holds = rep.violations.empty();
  return rep;
}

double crossing_time(const ChirpedPulse& pulse, double gap) {
  if (!(gap > pulse.v0 && gap < pulse.v1))
    throw std::domain_error(
        "crossing_time: gap must lie strictly inside (v0, v1)");
  if (pulse.chirp_is_default ||
      pulse.chirp.kind() == Shape::Kind::linear) {
    return (gap - pulse.v0) / (pulse.v1 - pulse.v0) * pulse.T;
  }
  // The sweep is nondecreasing, so bisection on f(s) - gap converges.
  double lo = 0.0, hi = pulse.T;
  double tol = 1e-12 * pulse.T;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (pulse.f(mid) < gap)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace chirpctl
