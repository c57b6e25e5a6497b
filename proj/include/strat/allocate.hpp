// Preliminary study and the c.o.v.-constrained integer sample allocation:
// minimize the Phase-II evaluation count subject to predicted kappa_h <=
// omega_h per limit state, with per-stratum floor and bank caps.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "strat/estimators.hpp"
#include "strat/kernels.hpp"
#include "strat/model.hpp"
#include "strat/phase1.hpp"

namespace strat {

struct UnitVarianceTable {
  std::int64_t n_p = 0;
  std::vector<std::string> limit_state_ids;           // size H
  std::vector<std::vector<double>> pf;                // [h][stratum]
  std::vector<std::vector<double>> psi;               // [h][stratum]
  std::vector<std::vector<std::uint8_t>> cardinal;    // [h][stratum]: observed unit variance 0

  int limit_state_count() const { return static_cast<int>(limit_state_ids.size()); }
  int stratum_count() const { return pf.empty() ? 0 : static_cast<int>(pf.front().size()); }
};

// Evaluate every limit state on the first n_p selection slots of each
// stratum (one shared response pass). The same slots reappear as the prefix
// of the Phase-II selection under the same seed, so these evaluations are
// reused, not discarded; sweep_out, when given, receives the raw rows
// (stratum-major, slot order) so callers can persist them for that reuse.
UnitVarianceTable preliminary_study(const PhaseIResult& phase1, const ModelHandle& model, std::int64_t n_p,
                                    std::uint64_t seed, int workers = 0, EvalSweepResult* sweep_out = nullptr);

struct AllocationPlan {
  std::vector<std::int64_t> n;             // per-stratum allocation
  std::vector<double> kappa;               // predicted c.o.v. at n
  std::vector<double> targets;             // requested omega_h
  std::vector<double> floor_kappa;         // best achievable (all caps)
  std::vector<std::uint8_t> feasible;      // per limit state
  std::vector<std::uint8_t> no_failures;   // preliminary pf identically zero
  std::vector<std::uint8_t> cardinal_strata;
  bool all_feasible = true;

  std::int64_t total() const;
};

// Exact greedy marginal-decrement solver with a local-minimality certificate
// (result is feasible and no single-sample decrement stays feasible).
// Infeasible targets are replaced by the achievable floor value, flagged, and
// driven to the caps. kappa uses the mode-matching variance formula with all
// non-allocation quantities frozen at table values.
AllocationPlan optimal_allocation(const UnitVarianceTable& table, const StratumSet& strata,
                                  std::span<const double> targets, std::span<const std::int64_t> caps,
                                  std::int64_t floor, std::int64_t block = 1);

// Per-limit-state kappa at maximal allocation (n_i = caps): the part of the
// estimator c.o.v. Phase-II cannot reduce. Large values call for a Phase-I
// refresh with a bigger N.
std::vector<double> feasibility_floor(const UnitVarianceTable& table, const StratumSet& strata,
                                      std::span<const std::int64_t> caps);

// Predicted kappa for one limit state at a given allocation; exposed for
// tests and the report stage.
double predicted_kappa(const UnitVarianceTable& table, const StratumSet& strata, int h,
                       std::span<const std::int64_t> n, std::span<const std::int64_t> caps);

}  // namespace strat
