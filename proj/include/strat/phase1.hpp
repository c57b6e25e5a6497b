// Phase-I sampling: build strata over the stratification variable chi, bank
// strata-wise sigma samples by plain Monte Carlo or subset simulation, and
// attach the strata-probability statistics (per-level delta/gamma factors and
// the full covariance matrix of the P(S_i) estimates).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "strat/model.hpp"
#include "strat/rng.hpp"

namespace strat {

enum class sampling_mode : std::uint8_t { mc = 0, sus = 1 };

// Strata request: either adaptive (m strata, conditional probability p, with
// thresholds placed at empirical quantiles) or explicit interior thresholds
// chi_1 < ... < chi_{m-1} (chi_0 and chi_m are the support bounds).
struct StrataSpec {
  int m = 0;
  double p = 0.1;
  std::vector<double> thresholds;  // empty => adaptive

  static StrataSpec adaptive(int m, double p) { return {m, p, {}}; }
  static StrataSpec explicit_bounds(std::vector<double> interior);
  bool is_adaptive() const { return thresholds.empty(); }
  int stratum_count() const { return m; }
};

struct StratumSet {
  sampling_mode mode = sampling_mode::mc;
  int m = 0;
  double p = 0.0;                  // conditional-probability constant (SuS)
  std::vector<double> thresholds;  // chi_0 .. chi_m, size m+1, ends may be +-inf
  std::vector<double> probs;       // P(S_i), size m
  std::vector<double> prob_cov;    // m x m, row-major
  std::vector<double> delta;       // per-level c.o.v. of conditional probs, size m-1 (SuS)
  std::vector<double> gamma;       // per-level chain-correlation factors, size m-1 (SuS)
  std::vector<double> cond_probs;  // P(F_i | F_{i-1}), size m-1 (SuS)

  double cov(int i, int j) const { return prob_cov[static_cast<std::size_t>(i) * m + j]; }
};

struct ChainSample {
  std::vector<double> sigma;  // empty when regenerable from mc_index
  double chi = 0.0;
  int stratum = 0;     // 1-based
  int chain_id = -1;   // -1 for i.i.d. draws
  int state_index = 0; // position within the chain (0 = seed)
  int level = 0;       // conditional level that produced the sample
  std::int64_t mc_index = -1;  // draw index for sigma regeneration (MC mode)
};

struct PhaseIResult {
  StratumSet strata;
  std::vector<std::vector<ChainSample>> samples;  // per stratum, sizes n_hat_i
  std::int64_t n_hat = 0;
  std::int64_t N = 0;  // per-level budget (SuS) or n_hat (MC)
  std::uint64_t seed = 0;

  std::int64_t stratum_size(int i) const { return static_cast<std::int64_t>(samples[i].size()); }
};

// Plain Monte Carlo Phase-I: n_hat i.i.d. sigma draws, binned by chi. Strata
// probabilities are the bin fractions with multinomial covariance. sigma
// vectors are not banked; they regenerate on demand from mc_index (see
// kernels.hpp). Explicit thresholds leaving a stratum empty raise
// under_populated_stratum.
PhaseIResult run_phase1_mc(const ModelHandle& model, std::int64_t n_hat, const StrataSpec& strata, std::uint64_t seed,
                           int workers = 0);

// Subset simulation Phase-I: N samples per level, m levels, conditional
// probability p. Adaptive mode places thresholds at per-level (1-p)
// quantiles; fixed thresholds (refresh mode) keep the given interior
// thresholds and estimate the conditional probabilities empirically, raising
// level_extinction if a level has no survivors.
PhaseIResult run_phase1_sus(const ModelHandle& model, std::int64_t N, int m, double p, std::uint64_t seed,
                            const std::vector<double>* fixed_thresholds = nullptr, int workers = 0);

// One modified Metropolis-Hastings transition: component-wise symmetric
// proposals accepted by marginal-density ratio, then a wholesale rejection if
// the candidate's chi does not exceed level_threshold. The returned sample
// always has state_index = current.state_index + 1; on rejection it repeats
// the current state. Draws come from per-component streams addressed by
// (level, chain, component, state), so chains are order-independent.
ChainSample mmh_step(const ModelHandle& model, const ChainSample& current, std::span<const double> proposal_spread,
                     double level_threshold, std::uint64_t seed);

// Proposal widths used by run_phase1_sus: one marginal standard deviation on
// each side, in standard-normal space for non-uniform marginals.
std::vector<double> default_proposal_spread(const ModelHandle& model);

struct LevelStats {
  double cond_prob = 0.0;  // P(F_i | F_{i-1})
  double delta = 0.0;
  double gamma = 0.0;
  std::int64_t count_above = 0;
};

// Per-level conditional-probability statistics from the level's N samples
// (ordered by chain): empirical P(F_i|F_{i-1}), the chain-correlation factor
// gamma (lag-weighted sum of intra-chain indicator autocorrelations; 0 for
// the i.i.d. level), and delta = sqrt((1-P)(1+gamma)/(N P)). Raises
// gamma_undefined when a conditional level has fewer than two chains.
LevelStats estimate_level_stats(std::span<const ChainSample> level_samples, double next_threshold, std::int64_t N);

// Covariance matrix of the strata-probability estimates from the per-level
// statistics (SuS mode). delta and cond_probs have size m-1.
std::vector<double> strata_prob_cov(std::span<const double> delta, std::span<const double> cond_probs,
                                    std::int64_t N);

}  // namespace strat
