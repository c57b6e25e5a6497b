// Counter-based random number streams (Philox4x32-10).
//
// Every random draw in the engine is addressed, not sequenced: a stream is
// identified by (global_seed, StreamId) and the draw counter, so any draw can
// be regenerated in isolation and no amount of reordering, threading, or
// stage re-running changes a value. StreamId fields are packed structurally
// into the Philox counter block -- distinct ids can never collide.

#pragma once

#include <cstdint>
#include <vector>

namespace strat {

// Contexts that own independent stream families. Values are stable and
// persisted indirectly through stored results; append only.
enum class rng_domain : uint32_t {
  mc_sigma = 1,       // Phase-I MC / SuS level-0 input draws (chain = sample index)
  seed_perm = 2,      // SuS per-level seed shuffling (level = conditional level)
  mmh = 3,            // chain proposals/acceptance (level, chain, state)
  tau_draw = 4,       // Phase-II tau draws (level = stratum, chain = selection slot)
  select_perm = 5,    // Phase-II per-stratum selection shuffle (level = stratum)
  synthetic = 6,      // test fixtures and synthetic-chain oracles
  cost_probe = 7,     // mode auto-selection timing probes
};

struct StreamId {
  rng_domain domain = rng_domain::synthetic;
  uint32_t level = 0;      // conditional level or stratum index (8 bits used)
  uint32_t state = 0;      // in-chain state index (16 bits)
  uint32_t chain = 0;      // chain id / sample index (32 bits)
  uint32_t component = 0;  // vector component or substream (16 bits)
};

// One addressed stream. Cheap value type: copying restarts nothing, the
// draw counter is part of the value.
class RngStream {
 public:
  RngStream(uint64_t global_seed, StreamId id);

  uint64_t next_u64();
  // Uniform on the open interval (0,1); 53-bit resolution, never 0 or 1,
  // safe to push through inverse CDFs.
  double next_u01();
  // Standard normal via the quantile of next_u01().
  double next_normal();

  // Jump so the next next_u64()/next_u01() returns draw number draw_index
  // of this stream (counting from 0).
  void seek(uint64_t draw_index);

 private:
  void refill();
  uint32_t key_[2];
  uint32_t block_[3];  // id fields packed at construction
  uint64_t counter_ = 0;
  uint32_t buf_[4] = {0, 0, 0, 0};
  int have_ = 0;
};

// Raw Philox4x32-10 block function, exposed for known-answer tests.
void philox4x32_10(const uint32_t ctr[4], const uint32_t key[2], uint32_t out[4]);

// Uniform integer in [0, n), bias-free (rejection). Consumes a variable
// number of draws; use only on streams that are read strictly sequentially.
uint64_t uniform_index(RngStream& stream, uint64_t n);

// In-place Fisher-Yates shuffle of {0, 1, ..., n-1}.
std::vector<uint32_t> random_permutation(RngStream& stream, uint32_t n);

}  // namespace strat
