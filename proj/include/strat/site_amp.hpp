// Frequency-dependent crustal/site amplification for NEHRP class D ground,
// log-log interpolated from the empirical generic-soil curve of Boore &
// Joyner (1997). Flat beyond the tabulated ends.

#pragma once

namespace strat {

double site_amplification(double freq_hz);

}  // namespace strat
