// Error types thrown across the engine. Each names a failure condition a
// caller can reasonably catch and act on; plain std::invalid_argument is used
// for parameter validation.

#pragma once

#include <stdexcept>
#include <string>

namespace strat {

// A model returned a non-finite chi value; carries the offending sample id.
struct model_evaluation_error : std::runtime_error {
  explicit model_evaluation_error(const std::string& what, long sample_id_ = -1)
      : std::runtime_error(what), sample_id(sample_id_) {}
  long sample_id;
};

// Explicit-threshold stratification left a stratum with no samples.
struct under_populated_stratum : std::runtime_error {
  under_populated_stratum(const std::string& what, int stratum_) : std::runtime_error(what), stratum(stratum_) {}
  int stratum;
};

// Fixed-threshold SuS level with no surviving seeds.
struct level_extinction : std::runtime_error {
  level_extinction(const std::string& what, int level_) : std::runtime_error(what), level(level_) {}
  int level;
};

// Phase-II selection asked for more samples than a stratum banked.
struct infeasible_selection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Level statistics on a single-chain level (gamma undefined).
struct gamma_undefined : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fragility fit on degenerate data.
struct fit_infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pipeline stage invoked before its upstream stage exists / matches.
struct stage_order_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace strat
