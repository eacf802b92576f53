#pragma once

#include <vector>

#include "chirpctl/control.hpp"
#include "chirpctl/model.hpp"
#include "chirpctl/types.hpp"

namespace chirpctl {

// States sampled at uniform slow times over one propagation.
struct Trajectory {
  std::vector<double> slow_times;  // uniform grid on [0, total slow time]
  std::vector<Vec> states;         // one unit vector per sample
  double max_norm_drift = 0.0;     // max over all steps of | ||psi|| - 1 |
  bool degraded = false;           // norm drift exceeded 1e-6
  long n_steps = 0;
  double dt = 0.0;                 // fast-time step of the first segment
};

// One step of the exponential midpoint rule: psi -> exp(-i*dt*H) psi with
// the exponential evaluated exactly through the eigendecomposition of H.
// The real overload takes a symmetric matrix, the complex overload a
// Hermitian one (checked, std::invalid_argument).
Vec step_unitary(const RMat& h, double dt, const Vec& psi);
Vec step_unitary(const Mat& h, double dt, const Vec& psi);

// Integrate i dpsi/dt = (diag(lambda) + omega(t) * coupling) psi over the
// full control horizon. Steps are uniform inside each control segment with
// dt = 2*pi / (nu_max * steps_per_period), where nu_max bounds the fastest
// frequency in play: max(|lambda_n|, |lambda_1|, max carrier) plus the
// peak coupling strength 2*eps1*max|coupling|*max(u). The Hamiltonian is
// evaluated at each step midpoint. n_samples states are stored at uniform
// slow times (each sample holds the state at the nearest step boundary).
// Norm drift beyond 1e-6 flags the trajectory as degraded (with a warning
// on stderr); psi0 must be normalized within 1e-9.
Trajectory propagate(const SampledSystem& sys, const PiecewiseControl& ctrl,
                     const Vec& psi0, int steps_per_period = 50,
                     int n_samples = 2000);
Trajectory propagate(const SampledSystem& sys, const ChirpedPulse& pulse,
                     const Vec& psi0, int steps_per_period = 50,
                     int n_samples = 2000);

// Population of level q (0-based) at each stored sample.
std::vector<double> fidelity(const Trajectory& traj, int q);

// Distance to the target level modulo global phase:
// min over phases of || psi - e^{i phase} e_q || = sqrt(2 - 2|psi_q|).
double distance_to_target(const Vec& psi, int q);

// Final state computed by step-halving Richardson extrapolation of the
// midpoint rule: the resolution doubles until two successive extrapolated
// final states agree within tol, and the newest extrapolant is returned
// (normalized). Throws std::runtime_error if max_doublings resolution
// doublings do not reach the tolerance.
Vec reference_propagate(const SampledSystem& sys, const PiecewiseControl& ctrl,
                        const Vec& psi0, double tol = 1e-10,
                        int steps_per_period = 50, int max_doublings = 14);

}  // namespace chirpctl
