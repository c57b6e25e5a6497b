#include "strat/rng.hpp"

#include <utility>

#include "strat/dist.hpp"

namespace strat {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

}  // namespace

void philox4x32_10(const uint32_t ctr[4], const uint32_t key[2], uint32_t out[4]) {
  uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
  uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c0, hi0, lo0);
    mulhilo(kPhiloxM1, c2, hi1, lo1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  out[0] = c0;
  out[1] = c1;
  out[2] = c2;
  out[3] = c3;
}

RngStream::RngStream(uint64_t global_seed, StreamId id) {
  key_[0] = static_cast<uint32_t>(global_seed);
  key_[1] = static_cast<uint32_t>(global_seed >> 32);
  block_[0] = (static_cast<uint32_t>(id.domain) << 24) | ((id.level & 0xFFu) << 16) |
              (id.state & 0xFFFFu);
  block_[1] = id.chain;
  block_[2] = (id.component & 0xFFFFu) << 16;
}

void RngStream::refill() {
  // The draw counter occupies the low counter word; 2^32 u64 draws per
  // stream is far beyond any use here.
  uint32_t ctr[4] = {static_cast<uint32_t>(counter_), block_[0], block_[1], block_[2]};
  philox4x32_10(ctr, key_, buf_);
  ++counter_;
  have_ = 4;
}

uint64_t RngStream::next_u64() {
  if (have_ < 2) refill();
  uint64_t hi = buf_[have_ - 1];
  uint64_t lo = buf_[have_ - 2];
  have_ -= 2;
  return (hi << 32) | lo;
}

double RngStream::next_u01() {
  // 53 significant bits, centered: u = (k + 0.5) / 2^53 with k in [0, 2^53).
  uint64_t k = next_u64() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() { return normal_quantile(next_u01()); }

void RngStream::seek(uint64_t draw_index) {
  // Each Philox block feeds two u64 draws.
  counter_ = draw_index >> 1;
  have_ = 0;
  if (draw_index & 1) (void)next_u64();
}

uint64_t uniform_index(RngStream& stream, uint64_t n) {
  if (n == 0) return 0;
  const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n + 1) % n;
  uint64_t x;
  do {
    x = stream.next_u64();
  } while (x > limit);
  return x % n;
}

std::vector<uint32_t> random_permutation(RngStream& stream, uint32_t n) {
  std::vector<uint32_t> perm(n);
  for (uint32_t i = 0; i < n; ++i) perm[i] = i;
  for (uint32_t i = n; i > 1; --i) {
    const auto j = static_cast<uint32_t>(uniform_index(stream, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace strat
