#include "strat/rng.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"

using namespace strat;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors from the Random123 distribution's kat_vectors file.
  uint32_t out[4];

  const uint32_t zeros[4] = {0, 0, 0, 0};
  const uint32_t zero_key[2] = {0, 0};
  philox4x32_10(zeros, zero_key, out);
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  const uint32_t ones[4] = {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
  const uint32_t ones_key[2] = {0xffffffffu, 0xffffffffu};
  philox4x32_10(ones, ones_key, out);
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);

  const uint32_t pi_ctr[4] = {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u};
  const uint32_t pi_key[2] = {0xa4093822u, 0x299f31d0u};
  philox4x32_10(pi_ctr, pi_key, out);
  CHECK(out[0] == 0xd16cfe09u);
  CHECK(out[1] == 0x94fdccebu);
  CHECK(out[2] == 0x5001e420u);
  CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("streams reproduce exactly and are order-independent") {
  StreamId id{rng_domain::mmh, 3, 7, 123456, 2};
  RngStream a(0xDEADBEEFCAFEF00Dull, id);
  std::vector<uint64_t> first;
  for (int i = 0; i < 64; ++i) first.push_back(a.next_u64());

  RngStream b(0xDEADBEEFCAFEF00Dull, id);
  for (int i = 0; i < 64; ++i) CHECK(b.next_u64() == first[i]);

  // Seeking to a draw index replays the same tail regardless of history,
  // including mid-block (odd) positions.
  RngStream c(0xDEADBEEFCAFEF00Dull, id);
  c.seek(10);
  CHECK(c.next_u64() == first[10]);
  CHECK(c.next_u64() == first[11]);
  c.seek(33);
  CHECK(c.next_u64() == first[33]);
  c.seek(0);
  CHECK(c.next_u64() == first[0]);
}

TEST_CASE("distinct stream ids give distinct sequences") {
  const uint64_t seed = 42;
  std::set<uint64_t> firsts;
  for (uint32_t lvl = 0; lvl < 4; ++lvl)
    for (uint32_t chain = 0; chain < 8; ++chain)
      for (uint32_t state = 0; state < 4; ++state) {
        RngStream s(seed, {rng_domain::mmh, lvl, state, chain, 0});
        firsts.insert(s.next_u64());
      }
  CHECK(firsts.size() == 4u * 8u * 4u);

  RngStream s1(seed, {rng_domain::mc_sigma, 0, 0, 5, 0});
  RngStream s2(seed, {rng_domain::tau_draw, 0, 0, 5, 0});
  CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("u01 lies strictly inside (0,1) and fills the unit interval") {
  RngStream s(7, {rng_domain::synthetic, 0, 0, 0, 0});
  double mn = 1.0, mx = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_u01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  CHECK(mn < 1e-4);
  CHECK(mx > 1.0 - 1e-4);
  // mean of n uniforms: sd = 1/sqrt(12n); allow 5 sigma
  CHECK(std::fabs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("uniform_index is bias-free over its range") {
  RngStream s(3, {rng_domain::synthetic, 1, 0, 0, 0});
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const uint64_t k = uniform_index(s, 7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  // chi-square against uniform, 6 dof: 22.5 is the 0.1% critical value
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  CHECK(chi2 < 22.5);
  CHECK(uniform_index(s, 1) == 0);
}

TEST_CASE("random_permutation is a permutation and seed-stable") {
  RngStream a(9, {rng_domain::seed_perm, 2, 0, 0, 0});
  const auto p = random_permutation(a, 100);
  std::vector<bool> seen(100, false);
  for (uint32_t v : p) {
    REQUIRE(v < 100);
    CHECK_FALSE(seen[v]);
    seen[v] = true;
  }
  RngStream b(9, {rng_domain::seed_perm, 2, 0, 0, 0});
  CHECK(random_permutation(b, 100) == p);
  RngStream c(10, {rng_domain::seed_perm, 2, 0, 0, 0});
  CHECK(random_permutation(c, 100) != p);
}
