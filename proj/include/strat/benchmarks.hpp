// Built-in benchmark models and their reference solutions. The factories are
// normally reached through make_model(); the oracles are exact (quadrature /
// closed-form) values the estimators are tested against.

#pragma once

#include <map>
#include <string>

#include "strat/model.hpp"

namespace strat {

// chi = sigma^3, g = 200 sin(tau) + 3 sigma^3.
// Params: "thresholds" = comma-separated response thresholds (default "1500").
ModelHandle make_toy2d(const std::map<std::string, std::string>& params = {});

// Stochastic ground motion (point-source spectrum) feeding a bilinear SDOF.
// chi = Sa(T1, 5%); responses = {peak drift ratio, residual drift ratio}.
ModelHandle make_gm_sdof(const std::map<std::string, std::string>& params = {});

// P(chi > v) for the toy model, in closed form via the normal CDF.
double toy2d_chi_tail(double v);

// P(200 sin(tau) + 3 sigma^3 > threshold) by adaptive quadrature over tau;
// absolute error well below 1e-9.
double toy_oracle(double threshold = 1500.0);

}  // namespace strat
