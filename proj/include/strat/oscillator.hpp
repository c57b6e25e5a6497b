#pragma once

#include <span>

namespace strat {

// Pseudo-spectral acceleration of a damped linear oscillator under base
// acceleration `accel` (m/s^2) sampled at spacing `dt`: omega^2 * max|u|.
// Uses the exact piecewise-linear (Nigam-Jennings) recursion, so the result
// carries no time-step truncation error beyond the linear interpolation of
// the record itself.
double spectral_acceleration(std::span<const double> accel, double dt, double period_s,
                             double zeta);

struct BilinearParams {
  double period_s;     // elastic small-amplitude period
  double zeta;         // viscous damping ratio
  double yield_disp;   // yield displacement u_y, m
  double hardening;    // post-yield stiffness ratio alpha
};

struct SdofResponse {
  double peak_disp = 0.0;      // max |u| over the record, m
  double residual_disp = 0.0;  // |plastic offset| at the end, m
  bool diverged = false;
};

// Response of a bilinear-hysteretic (kinematic hardening) SDOF to a base
// acceleration record in m/s^2. Mass-normalized: restoring force has units
// of acceleration, elastic stiffness omega^2. The record is linearly
// interpolated onto the integrator's own sub-steps. `guard_disp` marks the
// run as diverged when |u| exceeds it (or goes non-finite).
SdofResponse bilinear_sdof_response(std::span<const double> accel, double dt,
                                    const BilinearParams& p, double guard_disp);

}  // namespace strat
