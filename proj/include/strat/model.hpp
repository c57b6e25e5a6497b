// Model abstraction: a cheap stratification map H(sigma) -> chi and an
// expensive response map G(sigma, tau) -> responses, with exceed-above limit
// states on response components. Everything downstream (Phase-I, allocation,
// Phase-II) talks to models only through this surface.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "strat/dist.hpp"

namespace strat {

struct InputSplit {
  std::vector<DistributionSpec> sigma_spec;
  std::vector<DistributionSpec> tau_spec;
};

struct LimitStateDef {
  std::string id;
  int response_index = 0;
  double threshold = 0.0;  // failure when response[response_index] > threshold
};

struct ModelHandle {
  std::string name;
  InputSplit inputs;
  std::vector<LimitStateDef> limit_states;
  int response_dim = 0;

  // Lower support bound of chi; anchors hazard-curve grids. -inf when the
  // stratification variable is unbounded below.
  double chi_lower = -std::numeric_limits<double>::infinity();

  // Rough per-evaluation costs in seconds, used only by the auto mode rule
  // until measured probes replace them.
  double cost_chi_hint = 1e-7;
  double cost_response_hint = 1e-7;

  std::function<double(std::span<const double>)> chi_fn;
  std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> response_fn;

  int sigma_dim() const { return static_cast<int>(inputs.sigma_spec.size()); }
  int tau_dim() const { return static_cast<int>(inputs.tau_spec.size()); }
};

// Evaluate chi; throws model_evaluation_error if the model returns a
// non-finite value (sample id filled in by sweep callers).
double eval_chi(const ModelHandle& model, std::span<const double> sigma);

// One response evaluation serving all limit states. Non-finite responses are
// the model's divergence signal: the record is flagged and every indicator is
// set (all limit states treated as violated). Returns false on divergence.
bool eval_indicators(const ModelHandle& model, std::span<const double> sigma, std::span<const double> tau,
                     std::span<double> responses, std::span<uint8_t> indicators);

// Registry lookup for the built-in models: "toy2d" and "gm-sdof".
// Unknown names throw std::invalid_argument.
ModelHandle make_model(const std::string& name, const std::map<std::string, std::string>& params = {});

}  // namespace strat
