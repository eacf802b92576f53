#pragma once

// Shared test fixtures: a four-level ladder with one uncertain parameter
// and interval-free couplings, plus a three-level system whose gaps also
// clear the doubled sweep window.

#include <vector>

#include "chirpctl/control.hpp"
#include "chirpctl/model.hpp"

namespace fixtures {

using chirpctl::AffineLevel;
using chirpctl::ChirpedPulse;
using chirpctl::EnsembleSystem;
using chirpctl::Interval;
using chirpctl::ParamBox;
using chirpctl::RMat;
using chirpctl::RVec;

inline RVec alpha1(double a) {
  RVec v(1);
  v << a;
  return v;
}

inline std::vector<std::vector<Interval>> point_coupling(const RMat& m) {
  std::vector<std::vector<Interval>> c(m.rows(),
                                       std::vector<Interval>(m.cols()));
  for (int j = 0; j < m.rows(); ++j)
    for (int k = 0; k < m.cols(); ++k) c[j][k] = {m(j, k), m(j, k)};
  return c;
}

// Levels (0, 1 + a, 3 + 2a, 7); targeted pair (2, 3) has gap 4 - 2a, the
// only one inside the swept window (3, 5) for a near -0.1.
inline EnsembleSystem ladder4(double lo = -0.3, double hi = -0.1) {
  EnsembleSystem ens;
  auto level = [](double off, double slope) {
    AffineLevel l;
    l.offset = off;
    l.slope = RVec::Constant(1, slope);
    return l;
  };
  ens.levels = {level(0, 0), level(1, 1), level(3, 2), level(7, 0)};
  RMat c(4, 4);
  c << 1, 1, 1, 0,
       1, 1, 2, 0,
       1, 2, 1, 3,
       0, 0, 3, 1;
  ens.coupling = point_coupling(c);
  ens.box.axes = {{lo, hi}};
  return ens;
}

// Levels (0, 4 + a, 20): every untargeted gap clears both (3, 5) and its
// doubled window (6, 10) over the whole box.
inline EnsembleSystem ladder3(double lo = -0.5, double hi = 0.5) {
  EnsembleSystem ens;
  auto level = [](double off, double slope) {
    AffineLevel l;
    l.offset = off;
    l.slope = RVec::Constant(1, slope);
    return l;
  };
  ens.levels = {level(0, 0), level(4, 1), level(20, 0)};
  RMat c(3, 3);
  c << 1.0, 1.0, 0.5,
       1.0, 1.0, 0.7,
       0.5, 0.7, 1.0;
  ens.coupling = point_coupling(c);
  ens.box.axes = {{lo, hi}};
  return ens;
}

inline ChirpedPulse window35(double eps1, double eps2) {
  return chirpctl::synthesize_standard(3.0, 5.0, eps1, eps2);
}

}  // namespace fixtures
