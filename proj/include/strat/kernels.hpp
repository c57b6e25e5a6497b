// Evaluation sweeps, each in two interchangeable flavors: an OpenMP-parallel
// path used in production and a plain serial loop kept as the reference.
// Both write into preallocated per-sample slots and draw from per-sample
// streams, so results are bit-identical across flavors and worker counts
// (tests/test_kernels.cpp holds them to that).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "strat/model.hpp"
#include "strat/phase1.hpp"

namespace strat {

enum class exec : std::uint8_t { serial = 0, openmp = 1 };

// sigma components of i.i.d. draw number mc_index, regenerated from its
// per-component streams. The same routine produces Phase-I MC draws and
// re-materializes banked MC samples for Phase-II.
void regen_sigma(const ModelHandle& model, std::uint64_t seed, std::int64_t mc_index, std::span<double> out);

// chi for i.i.d. draws 0..n-1. sigma_bank, when given, receives the draws
// themselves (row i = draw i) for modes that keep sigma in memory.
void mc_chi_sweep(const ModelHandle& model, std::uint64_t seed, std::int64_t n, std::span<double> chi_out,
                  std::vector<std::vector<double>>* sigma_bank, int workers, exec policy);

// Advance every chain of one level to its target length. chains[j] must hold
// the seed state (state_index 0, correct level and chain_id); afterwards
// chains[j].size() == lengths[j]. Chains are independent given their seeds
// and are scheduled in parallel; states within a chain are sequential.
void advance_level_chains(const ModelHandle& model, std::uint64_t seed, std::span<const double> proposal_spread,
                          double level_threshold, std::vector<std::vector<ChainSample>>& chains,
                          std::span<const std::int64_t> lengths, int workers, exec policy);

// One Phase-II evaluation: a banked sigma sample paired with the selection
// slot that names its fresh-tau stream.
struct EvalItem {
  const ChainSample* sample = nullptr;
  int stratum = 0;        // 1-based
  std::int64_t slot = 0;  // position in the stratum's selection order
};

struct EvalSweepResult {
  std::int64_t count = 0;
  int response_dim = 0;
  int limit_state_count = 0;
  std::vector<double> responses;        // count x response_dim, row-major
  std::vector<std::uint8_t> indicators; // count x limit_state_count, row-major
  std::vector<std::uint8_t> finite;     // per item; 0 marks a diverged evaluation

  std::span<const double> response_row(std::int64_t i) const {
    return {responses.data() + i * response_dim, static_cast<std::size_t>(response_dim)};
  }
  std::span<const std::uint8_t> indicator_row(std::int64_t i) const {
    return {indicators.data() + i * limit_state_count, static_cast<std::size_t>(limit_state_count)};
  }
};

// Full response evaluation of the given items: tau drawn fresh per item from
// its (stratum, slot) stream, sigma taken from the sample or regenerated
// from mc_index when the bank holds no vector.
EvalSweepResult response_sweep(const ModelHandle& model, std::uint64_t seed, std::span<const EvalItem> items,
                               int workers, exec policy);

}  // namespace strat
