// Point-source stochastic ground motion: a two-corner source spectrum with
// whole-path attenuation, site amplification, and an f_max diminution filter
// shapes envelope-windowed white noise in the frequency domain (spectral
// normalization, then inverse transform). Magnitude and distance steer both
// the spectrum and the duration; the noise vector carries record-to-record
// variability.

#pragma once

#include <span>
#include <string>

namespace strat {

inline constexpr int kGmSamples = 6001;   // 60 s at 0.01 s
inline constexpr double kGmDt = 0.01;     // s

// Fourier amplitude spectrum of ground acceleration at the site (cgs units,
// cm/s) for moment magnitude M and source distance r_km.
double gm_target_spectrum(double f_hz, double M, double r_km);

// Source duration plus distance-dependent path duration, seconds.
double gm_duration(double M, double r_km);

// Time-domain modulating envelope, peaking early in the motion and decaying
// to a small fraction of the peak at gm_duration(M, r_km).
double gm_envelope(double t, double M, double r_km);

// Shape the noise z (length kGmSamples) into an acceleration record, m/s^2.
// Output is linear in z up to the internal spectral normalization: scaling z
// by any positive constant leaves the record unchanged, and an all-zero z
// yields an all-zero record.
void synthesize_acceleration(double M, double r_km, std::span<const double> z,
                             std::span<double> accel_out);

// Inspection dump: "t,accel" per line.
void write_time_series_csv(const std::string& path, std::span<const double> accel, double dt);

}  // namespace strat
