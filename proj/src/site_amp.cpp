#include "strat/site_amp.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace strat {

namespace {

// Generic-soil (NEHRP D, Vs30 ~ 310 m/s) amplification versus frequency,
// Boore & Joyner, "Site amplifications for generic rock sites", BSSA 87
// (1997), as tabulated for use with stochastic simulation.
constexpr int kPoints = 11;
constexpr double kFreq[kPoints] = {0.01, 0.09, 0.16, 0.51, 0.84, 1.25,
                                   2.26, 3.17, 6.05, 16.60, 61.20};
constexpr double kAmp[kPoints] = {1.00, 1.10, 1.18, 1.42, 1.58, 1.74,
                                  2.06, 2.25, 2.58, 3.13, 4.00};

}  // namespace

double site_amplification(double freq_hz) {
  if (!(freq_hz >= 0.0)) throw std::invalid_argument("site_amplification: frequency must be >= 0");
  if (freq_hz <= kFreq[0]) return kAmp[0];
  if (freq_hz >= kFreq[kPoints - 1]) return kAmp[kPoints - 1];
  int lo = 0;
  for (int i = 1; i < kPoints; ++i) {
    if (kFreq[i] >= freq_hz) {
      lo = i - 1;
      break;
    }
  }
  const double t = (std::log(freq_hz) - std::log(kFreq[lo])) /
                   (std::log(kFreq[lo + 1]) - std::log(kFreq[lo]));
  return std::exp(std::log(kAmp[lo]) + t * (std::log(kAmp[lo + 1]) - std::log(kAmp[lo])));
}

}  // namespace strat
