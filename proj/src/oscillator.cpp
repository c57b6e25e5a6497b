#include "strat/oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace strat {

double spectral_acceleration(std::span<const double> accel, double dt, double period_s,
                             double zeta) {
  if (!(period_s > 0.0)) throw std::invalid_argument("oscillator: period must be positive");
  if (!(zeta > 0.0 && zeta < 1.0)) throw std::invalid_argument("oscillator: zeta must lie in (0, 1)");
  if (!(dt > 0.0)) throw std::invalid_argument("oscillator: dt must be positive");
  if (accel.size() < 2) return 0.0;

  const double w = 2.0 * std::numbers::pi / period_s;
  const double k = w * w;
  const double sq = std::sqrt(1.0 - zeta * zeta);
  const double wd = w * sq;
  const double e = std::exp(-zeta * w * dt);
  const double s = std::sin(wd * dt);
  const double c = std::cos(wd * dt);

  // Exact state transition for ü + 2ζω u̇ + ω² u = p(t) with p piecewise
  // linear (Nigam & Jennings 1969; coefficients as in Chopra, Table 5.2.1).
  const double A = e * (c + zeta / sq * s);
  const double B = e * s / wd;
  const double C = (2.0 * zeta / (w * dt) +
                    e * (((1.0 - 2.0 * zeta * zeta) / (wd * dt) - zeta / sq) * s -
                         (1.0 + 2.0 * zeta / (w * dt)) * c)) / k;
  const double D = (1.0 - 2.0 * zeta / (w * dt) +
                    e * ((2.0 * zeta * zeta - 1.0) / (wd * dt) * s +
                         2.0 * zeta / (w * dt) * c)) / k;
  const double Ap = -e * (w / sq) * s;
  const double Bp = e * (c - zeta / sq * s);
  const double Cp = (-1.0 / dt + e * ((w / sq + zeta / (dt * sq)) * s + c / dt)) / k;
  const double Dp = (1.0 - e * (zeta / sq * s + c)) / (k * dt);

  double u = 0.0, v = 0.0, peak = 0.0;
  for (std::size_t i = 0; i + 1 < accel.size(); ++i) {
    const double p0 = -accel[i];
    const double p1 = -accel[i + 1];
    const double un = A * u + B * v + C * p0 + D * p1;
    v = Ap * u + Bp * v + Cp * p0 + Dp * p1;
    u = un;
    const double au = std::fabs(u);
    if (au > peak) peak = au;
  }
  return k * peak;
}

SdofResponse bilinear_sdof_response(std::span<const double> accel, double dt,
                                    const BilinearParams& p, double guard_disp) {
  if (!(p.period_s > 0.0)) throw std::invalid_argument("oscillator: period must be positive");
  if (!(p.yield_disp > 0.0)) throw std::invalid_argument("oscillator: yield displacement must be positive");
  if (!(p.hardening >= 0.0 && p.hardening < 1.0)) throw std::invalid_argument("oscillator: hardening ratio must lie in [0, 1)");
  if (!(dt > 0.0)) throw std::invalid_argument("oscillator: dt must be positive");

  SdofResponse out;
  if (accel.size() < 2) return out;

  const double w = 2.0 * std::numbers::pi / p.period_s;
  const double k = w * w;
  const double fy = k * p.yield_disp;
  // Kinematic hardening modulus giving post-yield slope alpha*k.
  const double hard = p.hardening * k / (1.0 - p.hardening);
  const double cvis = 2.0 * p.zeta * w;

  const double h_target = 1e-3;  // substep well below both periods of interest
  const int sub = std::max(1, static_cast<int>(std::lround(dt / h_target)));
  const double hs = dt / sub;

  double u = 0.0, v = 0.0, up = 0.0;
  // Restoring force (mass-normalized) after the plastic return map.
  auto restore = [&](double disp) {
    double f_tr = k * (disp - up);
    const double xi = f_tr - hard * up;
    const double over = std::fabs(xi) - fy;
    if (over > 0.0) {
      up += over / (k + hard) * ((xi > 0.0) ? 1.0 : -1.0);
      f_tr = k * (disp - up);
    }
    return f_tr;
  };

  double f = 0.0;
  double ag0 = accel[0];
  for (std::size_t n = 0; n + 1 < accel.size(); ++n) {
    const double ag_a = accel[n];
    const double ag_b = accel[n + 1];
    for (int j = 0; j < sub; ++j) {
      const double ag1 = ag_a + (ag_b - ag_a) * (static_cast<double>(j + 1) / sub);
      // Velocity Verlet; the damping term at the step end is taken
      // implicitly, the plastic return map updates f at the new position.
      const double acc0 = -ag0 - cvis * v - f;
      u += hs * v + 0.5 * hs * hs * acc0;
      const double f1 = restore(u);
      v = (v + 0.5 * hs * (acc0 - ag1 - f1)) / (1.0 + hs * p.zeta * w);
      f = f1;
      ag0 = ag1;

      const double au = std::fabs(u);
      if (au > out.peak_disp) out.peak_disp = au;
      if (!(au <= guard_disp)) {  // catches NaN too
        out.diverged = true;
        out.residual_disp = std::fabs(up);
        return out;
      }
    }
  }
  out.residual_disp = std::fabs(up);
  return out;
}

}  // namespace strat
