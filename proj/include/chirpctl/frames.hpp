#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "chirpctl/control.hpp"
#include "chirpctl/model.hpp"
#include "chirpctl/types.hpp"

namespace chirpctl {

// Hermitian basis pair attached to a level pair and a phase E:
//   j < k:  A = e^{iE} e_jk + e^{-iE} e_kj,   B = i e^{iE} e_jk - i e^{-iE} e_kj
//   j == k: A = cos(E) e_jj,                  B = -sin(E) e_jj
// B is the E-derivative of A, and dB/dE = -A. For j > k the same formulas
// apply and A_jk(E) = A_kj(-E), B_jk(E) = -B_kj(-E).
Mat basis_a(int n, int j, int k, double E);
Mat basis_b(int n, int j, int k, double E);

// The four pieces of the second-order oscillating remainder, split by
// which level pairs they touch: `bulk` couples untargeted levels among
// themselves, `pair` lives on the targeted two levels (and their
// populations), `row_p` / `row_q` couple untargeted levels to the dressed
// targeted pair.
struct ResidualSet {
  Mat bulk, pair, row_p, row_q;
};

// Diagnostics of the slow rotation angle at one slow time.
struct RotationAngles {
  double lambda = 0.0;  // half the dressed gap of the targeted pair
  double theta = 0.0;   // mixing angle, 0 at s=0 sweeping to +-pi at s=T
  double dtheta = 0.0;  // d theta / ds
};

// Everything needed to follow one concrete system through the chain of
// rotating frames induced by one chirped pulse targeting levels (p, q):
// interaction frame, two oscillation-averaging frames, the carrier-locked
// frame, the adiabatic frame, and the remainder-absorbing frame. The
// system is recentered internally (lambda_p = -gap/2, lambda_q = +gap/2);
// all member formulas refer to the recentered energies. Construction
// checks the frequency-separation requirements for this concrete system
// and throws std::domain_error naming the offending pair if they fail.
class FrameContext {
 public:
  FrameContext(const SampledSystem& sys, const ChirpedPulse& pulse, int p,
               int q);

  const SampledSystem& system() const { return sys_; }   // recentered
  const ChirpedPulse& pulse() const { return pulse_; }
  int p() const { return p_; }
  int q() const { return q_; }
  int n() const { return sys_.n(); }
  double gap() const { return gap_; }          // targeted gap
  double coupling_pq() const { return dpq_; }  // targeted coupling entry
  double sbar() const { return sbar_; }        // sweep crossing slow time

  // Drift-rotating frame of the recentered system:
  // e^{i t diag(lambda)} (omega(t) * coupling) e^{-i t diag(lambda)}.
  Mat interaction_hamiltonian(double t) const;

  // First-order oscillation-averaging generator. Its time derivative
  // cancels every first-order oscillating term except the targeted
  // co-rotating one.
  Mat x1_operator(double t) const;

  // Second-order generator over the index set that needs no further
  // frequency assumptions (counter-rotating and zero-shift terms).
  Mat x2_operator(double t) const;

  // Variant that also removes the remaining doubled-frequency terms;
  // requires every gap to avoid [2*v0, 2*v1] (std::domain_error otherwise).
  Mat x2_tilde_operator(double t) const;

  // First-order coefficient tables (sigma in {-1, +1}), defined for any
  // index pair through the antisymmetric / symmetric extensions.
  double c_coeff(int j, int k, int sigma, double s) const;
  double l_coeff(int j, int k, int sigma, double s) const;
  // Second-order coefficients (sigma in {-2, 0, +2}).
  double h_coeff(int j, int k, int sigma, double s) const;

  RotationAngles rotation_angles(double s) const;

  // Running integral of lambda(eps1*eps2*tau) from 0 to t, evaluated from
  // a cached cumulative quadrature of the slow profile.
  double phi_tilde(double t) const;

  Mat u3(double t) const;  // carrier-locked diagonal frame
  Mat u4(double t) const;  // adiabatic half-angle rotation of rows p, q

  // Effective Hamiltonian after the first two averaging frames, dropping
  // remainders of cubic order in the amplitude scale: the targeted
  // co-rotating term plus the kept second-order terms (doubled-frequency
  // off-diagonals and static level shifts).
  Mat h_frame2(double t) const;

  ResidualSet residuals(double t) const;

  // -(integral from 0 to t) of the residual sum, by composite Simpson with
  // steps_per_period midpoint-rule intervals per oscillation period.
  Mat x5_operator(double t, int steps_per_period = 50) const;

  // Truncated Hamiltonian in the adiabatic frame: slow rotation term plus
  // the dressed static level shifts.
  Mat h_rwa_full(double t) const;
  // The same dynamics written back in the drift-rotating frame: targeted
  // co-rotating term plus static level shifts.
  Mat h_rwa_back(double t) const;
  // Rows/columns (p, q) of h_rwa_back: the decoupled two-level dynamics.
  Eigen::Matrix2cd h_rwa_block(double t) const;

  // Largest Frobenius norms, over the whole horizon, of the running
  // integrals of the four residual pieces (order: bulk, pair, row_p,
  // row_q). Composite Simpson accumulation, steps_per_period intervals
  // per oscillation period.
  std::array<double, 4> residual_integral_sups(int steps_per_period = 16) const;

 private:
  SampledSystem sys_;  // recentered
  ChirpedPulse pulse_;
  int p_, q_;
  double gap_, dpq_, sbar_;
  std::vector<double> phi_tilde_knots_;  // cumulative integral of lambda
  double knot_h_ = 0.0;                  // slow-time knot spacing

  double lambda_of(double s) const;
  void eval_residuals(double t, ResidualSet& out) const;
  double osc_rate_bound() const;
};

// Effective Hamiltonian seen after the frame change psi -> e^{-iX(t)} psi,
// through the nested-commutator series truncated at the given order:
//   sum_k (-1)^k/k! ad_{iX}^k(H)  +  sum_k (-1)^k/(k+1)! ad_{iX}^k(dX/dt).
// h, x, dxdt are evaluated at time t; x(t) and h(t) must be Hermitian and
// the result is Hermitian within 1e-12 (checked).
Mat bch_transform(const std::function<Mat(double)>& h,
                  const std::function<Mat(double)>& x,
                  const std::function<Mat(double)>& dxdt, double t,
                  int order = 12);

// Scaling diagnostics of the frame-chain error terms at one (eps1, eps2).
struct LemmaRow {
  double eps1 = 0.0, eps2 = 0.0;
  double int_abs_dtheta = 0.0;    // total rotation-angle variation
  double sup_abs_dtheta = 0.0;    // peak angular speed (slow derivative)
  double margin_curvature = 0.0;  // min of -2*lambda' + f'/2 on [0, sbar]
  double margin_rate = 0.0;       // min of -2*lambda + f - gap/2 on [sbar, T]
  double margin_slope = 0.0;      // min of |f'| - |lambda'| on [0, T]
  std::array<double, 4> residual_sups{};  // bulk, pair, row_p, row_q
  // Optional dynamics comparison (costly): final-time gaps between the
  // truncated dynamics and the exact state pushed through the frames.
  std::optional<double> truncation_gap;  // || psi_rwa(T) - psi_5(T) ||
  std::optional<double> chain_gap;       // back in the drift frame
};

struct LemmaOptions {
  int grid_points = 10000;        // margin and angle scans
  int steps_per_period = 16;      // residual integral accumulation
  bool dynamics = false;          // also integrate the truncated dynamics
  int dynamics_steps_per_period = 50;
};

// Runs the diagnostics for each (eps1, eps2) pair on pulses rebuilt from
// the prototype (same window, envelope, sweep, and duration).
std::vector<LemmaRow> verify_lemmas(
    const SampledSystem& sys, int p, int q, const ChirpedPulse& proto,
    const std::vector<std::pair<double, double>>& eps_pairs,
    const LemmaOptions& opts = {});

}  // namespace chirpctl
