#include "strat/ground_motion.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "strat/site_amp.hpp"

namespace strat {

namespace {

constexpr double kPi = std::numbers::pi;

// Calibration constants. Source scaling and corner frequencies follow the
// two-corner California model of Atkinson & Silva (2000); the simulation
// procedure and envelope are those of Boore (2003).
constexpr double kRadiation = 0.55;        // radiation pattern R_phi
constexpr double kPartition = 0.70710678118654752;  // two horizontal components
constexpr double kFreeSurface = 2.0;
constexpr double kBetaS = 3.5;             // source shear-wave velocity, km/s
constexpr double kRhoS = 2.8;              // source density, g/cm^3
constexpr double kCQ = 3.5;                // seismic velocity in Q, km/s
constexpr double kOmegaMax = 15.0;         // f_max diminution, rad/s
constexpr double kSpreadCross = 70.0;      // geometric spreading knee, km
constexpr double kLambdaT = 0.2;           // envelope peak position fraction
constexpr double kEtaT = 0.05;             // envelope amplitude at t = duration

// Envelope shape exponents (Saragoni-Hart form, Boore 2003): peak of 1 at
// t = lambda * duration, decayed to eta at t = duration.
const double kEnvB = -kLambdaT * std::log(kEtaT) / (1.0 + kLambdaT * (std::log(kLambdaT) - 1.0));
const double kEnvC = kEnvB / kLambdaT;
const double kEnvA = std::pow(std::exp(1.0) / kLambdaT, kEnvB);

// FFT workspace: one plan pair for the fixed length, created once; per-thread
// buffers so concurrent evaluations never share arrays. fftw_execute_*_dft is
// thread-safe; plan creation is not, hence the once-guarded setup.
constexpr int kNfft = 16384;  // next power of two >= 2 * kGmSamples
constexpr int kNspec = kNfft / 2 + 1;

fftw_plan g_fwd = nullptr;
fftw_plan g_inv = nullptr;
std::once_flag g_plan_once;

void make_plans() {
  double* in = fftw_alloc_real(kNfft);
  fftw_complex* out = fftw_alloc_complex(kNspec);
  g_fwd = fftw_plan_dft_r2c_1d(kNfft, in, out, FFTW_ESTIMATE);
  g_inv = fftw_plan_dft_c2r_1d(kNfft, out, in, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (!g_fwd || !g_inv) throw std::runtime_error("ground motion: FFT plan creation failed");
}

struct Workspace {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  Workspace() {
    real = fftw_alloc_real(kNfft);
    spec = fftw_alloc_complex(kNspec);
    if (!real || !spec) throw std::bad_alloc();
  }
  ~Workspace() {
    fftw_free(real);
    fftw_free(spec);
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

struct SourceShape {
  double fa = 0.0;   // lower corner, Hz
  double fb = 0.0;   // upper corner, Hz
  double eps = 0.0;  // weight of the high-frequency corner term
  double moment = 0.0;  // dyne * cm
};

SourceShape source_shape(double M) {
  SourceShape s;
  s.fa = std::pow(10.0, 2.181 - 0.496 * M);
  s.fb = std::pow(10.0, 2.41 - 0.408 * M);
  s.eps = std::pow(10.0, 0.605 - 0.255 * M);
  s.moment = std::pow(10.0, 1.5 * M + 16.05);
  return s;
}

void check_params(double M, double r_km) {
  if (!(M >= 6.0 && M <= 8.0)) throw std::invalid_argument("ground motion: M must lie in [6, 8]");
  if (!(r_km > 0.0)) throw std::invalid_argument("ground motion: r must be positive");
}

double spectrum_at(double f_hz, const SourceShape& s, double r_km) {
  if (f_hz <= 0.0) return 0.0;

  // Two-corner displacement shape: unity at f -> 0, sagging between the
  // corners, with eps setting the high-frequency plateau relative to a
  // single-corner source.
  const double shape = (1.0 - s.eps) / (1.0 + (f_hz / s.fa) * (f_hz / s.fa)) +
                       s.eps / (1.0 + (f_hz / s.fb) * (f_hz / s.fb));
  // 1e-20 reconciles dyne*cm moment with km/s and g/cm^3 to give cm/s.
  const double scale = kRadiation * kPartition * kFreeSurface * 1e-20 /
                       (4.0 * kPi * kRhoS * kBetaS * kBetaS * kBetaS);
  const double source = scale * s.moment * shape;

  const double spreading = (r_km < kSpreadCross) ? 1.0 / r_km : 1.0 / kSpreadCross;
  const double q = 180.0 * std::pow(f_hz, 0.45);
  const double path = spreading * std::exp(-kPi * f_hz * r_km / (q * kCQ));

  const double omega_ratio = 2.0 * kPi * f_hz / kOmegaMax;
  const double ratio4 = omega_ratio * omega_ratio * omega_ratio * omega_ratio;
  const double diminution = 1.0 / std::sqrt(1.0 + ratio4 * ratio4);
  const double site = site_amplification(f_hz) * diminution;

  const double w = 2.0 * kPi * f_hz;
  return w * w * source * path * site;
}

}  // namespace

double gm_target_spectrum(double f_hz, double M, double r_km) {
  check_params(M, r_km);
  return spectrum_at(f_hz, source_shape(M), r_km);
}

double gm_duration(double M, double r_km) {
  check_params(M, r_km);
  return 0.5 / source_shape(M).fa + 0.05 * r_km;
}

double gm_envelope(double t, double M, double r_km) {
  if (t <= 0.0) return 0.0;
  const double tn = t / gm_duration(M, r_km);
  return kEnvA * std::pow(tn, kEnvB) * std::exp(-kEnvC * tn);
}

void synthesize_acceleration(double M, double r_km, std::span<const double> z,
                             std::span<double> accel_out) {
  check_params(M, r_km);
  if (z.size() != kGmSamples) throw std::invalid_argument("ground motion: noise vector must have 6001 entries");
  if (accel_out.size() != kGmSamples) throw std::invalid_argument("ground motion: output must have 6001 entries");

  std::call_once(g_plan_once, make_plans);
  thread_local Workspace ws;

  const double dur = gm_duration(M, r_km);
  for (int k = 0; k < kGmSamples; ++k) {
    const double t = k * kGmDt;
    const double tn = t / dur;
    const double env = (t <= 0.0) ? 0.0 : kEnvA * std::pow(tn, kEnvB) * std::exp(-kEnvC * tn);
    ws.real[k] = env * z[static_cast<std::size_t>(k)];
  }
  for (int k = kGmSamples; k < kNfft; ++k) ws.real[k] = 0.0;

  fftw_execute_dft_r2c(g_fwd, ws.real, ws.spec);

  // Spectral normalization: divide by the rms amplitude over the positive-
  // frequency bins, so the noise contributes shape only, not level. The DC
  // bin is excluded (the target is zero there regardless).
  double ms = 0.0;
  for (int j = 1; j < kNspec; ++j)
    ms += ws.spec[j][0] * ws.spec[j][0] + ws.spec[j][1] * ws.spec[j][1];
  ms /= static_cast<double>(kNspec - 1);
  if (ms == 0.0) {
    for (int k = 0; k < kGmSamples; ++k) accel_out[static_cast<std::size_t>(k)] = 0.0;
    return;
  }
  const double inv_rms = 1.0 / std::sqrt(ms);

  ws.spec[0][0] = 0.0;
  ws.spec[0][1] = 0.0;
  const SourceShape shape = source_shape(M);
  const double df = 1.0 / (kNfft * kGmDt);
  for (int j = 1; j < kNspec; ++j) {
    const double gain = spectrum_at(j * df, shape, r_km) * inv_rms;
    ws.spec[j][0] *= gain;
    ws.spec[j][1] *= gain;
  }

  fftw_execute_dft_c2r(g_inv, ws.spec, ws.real);

  // The continuous inverse transform is the unnormalized sum times df; the
  // trailing 1e-2 converts cm/s^2 to m/s^2.
  const double scale = df * 1e-2;
  for (int k = 0; k < kGmSamples; ++k)
    accel_out[static_cast<std::size_t>(k)] = ws.real[k] * scale;
}

void write_time_series_csv(const std::string& path, std::span<const double> accel, double dt) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!f) throw std::runtime_error("cannot write: " + path);
  std::fprintf(f.get(), "t,accel\n");
  for (std::size_t k = 0; k < accel.size(); ++k)
    std::fprintf(f.get(), "%.6f,%.12g\n", static_cast<double>(k) * dt, accel[k]);
}

}  // namespace strat
