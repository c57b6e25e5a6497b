// Kernel sweep tests: bit-identity between the serial reference and the
// OpenMP path at any worker count, sigma regeneration against the banked
// draws, slot-addressed tau streams, divergence flagging, and lowest-index
// error capture out of parallel regions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "strat/errors.hpp"
#include "strat/estimators.hpp"
#include "strat/kernels.hpp"
#include "strat/model.hpp"
#include "strat/phase1.hpp"

using namespace strat;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimal one-sigma / one-tau model with a transparent response, used where
// the test needs full control over what each evaluation returns.
ModelHandle unit_model() {
  ModelHandle m;
  m.name = "unit";
  m.inputs.sigma_spec = {DistributionSpec::uniform(0.0, 1.0)};
  m.inputs.tau_spec = {DistributionSpec::uniform(0.0, 1.0)};
  m.response_dim = 1;
  m.limit_states.push_back({"a", 0, 0.7});
  m.chi_fn = [](std::span<const double> sigma) { return sigma[0]; };
  m.response_fn = [](std::span<const double> sigma, std::span<const double>, std::span<double> out) {
    out[0] = sigma[0];
  };
  return m;
}

ChainSample banked(double sigma0, int chain_id = -1, int state_index = 0) {
  ChainSample s;
  s.sigma = {sigma0};
  s.chi = sigma0;
  s.chain_id = chain_id;
  s.state_index = state_index;
  return s;
}

}  // namespace

TEST_CASE("MC chi sweep is bit-identical across flavors and worker counts") {
  const ModelHandle toy = make_model("toy2d");
  const std::int64_t n = 5000;

  std::vector<double> serial(n), par1(n), par4(n);
  std::vector<std::vector<double>> bank;
  mc_chi_sweep(toy, 31, n, serial, &bank, 1, exec::serial);
  mc_chi_sweep(toy, 31, n, par1, nullptr, 1, exec::openmp);
  mc_chi_sweep(toy, 31, n, par4, nullptr, 4, exec::openmp);
  CHECK(serial == par1);
  CHECK(serial == par4);

  // The banked sigma vectors are exactly what regen_sigma reproduces.
  REQUIRE(bank.size() == static_cast<std::size_t>(n));
  for (std::int64_t i : {std::int64_t{0}, std::int64_t{1}, std::int64_t{777}, n - 1}) {
    REQUIRE(bank[i].size() == 1);
    double replay = 0.0;
    regen_sigma(toy, 31, i, std::span<double>(&replay, 1));
    CHECK(bank[i][0] == replay);
  }

  // Draws are indexed, not sequential: distinct indices and seeds differ.
  double a = 0.0, b = 0.0;
  regen_sigma(toy, 31, 5, std::span<double>(&a, 1));
  regen_sigma(toy, 31, 6, std::span<double>(&b, 1));
  CHECK(a != b);
  regen_sigma(toy, 32, 5, std::span<double>(&b, 1));
  CHECK(a != b);

  std::vector<double> wrong(n - 1);
  CHECK_THROWS_AS(mc_chi_sweep(toy, 31, n, wrong, nullptr, 1, exec::serial), std::invalid_argument);
}

TEST_CASE("level chains advance identically in serial and parallel") {
  const ModelHandle toy = make_model("toy2d");
  const std::vector<double> spread = default_proposal_spread(toy);
  const double threshold = 150.0;

  // Seeds: i.i.d. draws conditioned above the threshold.
  std::vector<double> chi(4000);
  std::vector<std::vector<double>> bank;
  mc_chi_sweep(toy, 8, 4000, chi, &bank, 1, exec::serial);
  std::vector<std::vector<ChainSample>> seeds;
  for (std::int64_t i = 0; i < 4000 && seeds.size() < 12; ++i) {
    if (chi[i] <= threshold) continue;
    ChainSample s;
    s.sigma = bank[i];
    s.chi = chi[i];
    s.chain_id = static_cast<int>(seeds.size());
    s.state_index = 0;
    s.level = 1;
    seeds.push_back({s});
  }
  REQUIRE(seeds.size() == 12);
  std::vector<std::int64_t> lengths;
  for (std::size_t j = 0; j < seeds.size(); ++j) lengths.push_back(6 + static_cast<std::int64_t>(j % 5));

  auto run = [&](int workers, exec policy) {
    std::vector<std::vector<ChainSample>> chains = seeds;
    advance_level_chains(toy, 8, spread, threshold, chains, lengths, workers, policy);
    return chains;
  };
  const auto ser = run(1, exec::serial);
  const auto par1 = run(1, exec::openmp);
  const auto par3 = run(3, exec::openmp);

  for (std::size_t j = 0; j < ser.size(); ++j) {
    REQUIRE(ser[j].size() == static_cast<std::size_t>(lengths[j]));
    for (std::size_t k = 0; k < ser[j].size(); ++k) {
      CHECK(ser[j][k].chi == par1[j][k].chi);
      CHECK(ser[j][k].chi == par3[j][k].chi);
      CHECK(ser[j][k].sigma == par3[j][k].sigma);
      CHECK(ser[j][k].state_index == static_cast<int>(k));
      CHECK(ser[j][k].chi > threshold);
    }
  }

  auto bad = seeds;
  CHECK_THROWS_AS(
      advance_level_chains(toy, 8, spread, threshold, bad, std::vector<std::int64_t>{3}, 1, exec::serial),
      std::invalid_argument);
}

TEST_CASE("response sweep is bit-identical across flavors and worker counts") {
  const ModelHandle toy = make_model("toy2d");
  const PhaseIResult p1 = run_phase1_sus(toy, 400, 3, 0.2, 17);
  const std::vector<std::int64_t> alloc(3, 50);
  const PhaseIISelection sel = select_phase2(p1, alloc, 23);

  std::vector<EvalItem> items;
  for (int i = 0; i < 3; ++i)
    for (std::int64_t s = 0; s < 50; ++s) items.push_back({&p1.samples[i][sel.ids[i][s]], i + 1, s});

  const EvalSweepResult ser = response_sweep(toy, 61, items, 1, exec::serial);
  const EvalSweepResult par1 = response_sweep(toy, 61, items, 1, exec::openmp);
  const EvalSweepResult par4 = response_sweep(toy, 61, items, 4, exec::openmp);
  CHECK(ser.responses == par1.responses);
  CHECK(ser.responses == par4.responses);
  CHECK(ser.indicators == par4.indicators);
  CHECK(ser.finite == par4.finite);
}

TEST_CASE("tau draws are addressed by stratum and slot, not by sample") {
  const ModelHandle toy = make_model("toy2d");
  const ChainSample s = banked(5.0);
  const std::vector<EvalItem> items{{&s, 1, 0}, {&s, 1, 0}, {&s, 1, 1}, {&s, 2, 0}};
  const EvalSweepResult sweep = response_sweep(toy, 91, items, 1, exec::serial);

  // Same (stratum, slot) replays the same tau; any other address draws
  // fresh, even for the identical sigma sample.
  CHECK(sweep.responses[0] == sweep.responses[1]);
  CHECK(sweep.responses[0] != sweep.responses[2]);
  CHECK(sweep.responses[0] != sweep.responses[3]);
}

TEST_CASE("response sweep regenerates MC sigma from the draw index") {
  const ModelHandle toy = make_model("toy2d");
  std::vector<double> chi(64);
  std::vector<std::vector<double>> bank;
  mc_chi_sweep(toy, 44, 64, chi, &bank, 1, exec::serial);

  // One banked copy, one bank-free record carrying only mc_index.
  ChainSample with_bank = banked(bank[7][0]);
  ChainSample lean;
  lean.mc_index = 7;
  lean.chi = chi[7];
  const std::vector<EvalItem> items{{&with_bank, 1, 4}, {&lean, 1, 4}};
  const EvalSweepResult sweep = response_sweep(toy, 44, items, 1, exec::serial);
  CHECK(sweep.responses[0] == sweep.responses[1]);
}

TEST_CASE("response sweep flags divergent evaluations") {
  ModelHandle m = unit_model();
  m.response_fn = [](std::span<const double> sigma, std::span<const double>, std::span<double> out) {
    out[0] = sigma[0] > 1.5 ? kInf : sigma[0];
  };
  const ChainSample ok = banked(0.5), at = banked(0.7), hot = banked(0.9), div = banked(2.0);
  const std::vector<EvalItem> items{{&ok, 1, 0}, {&at, 1, 1}, {&hot, 1, 2}, {&div, 1, 3}};
  const EvalSweepResult sweep = response_sweep(m, 7, items, 1, exec::serial);

  CHECK(sweep.finite == std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK(sweep.indicators[0] == 0);
  // Exceedance is strict: a response exactly at the threshold survives.
  CHECK(sweep.indicators[1] == 0);
  CHECK(sweep.indicators[2] == 1);
  // Divergence counts against every limit state.
  CHECK(sweep.indicators[3] == 1);
  CHECK(std::isinf(sweep.responses[3]));
}

TEST_CASE("parallel sweeps report the lowest failing sample") {
  ModelHandle m = unit_model();
  m.chi_fn = [](std::span<const double> sigma) {
    return sigma[0] >= 0.0 ? std::numeric_limits<double>::quiet_NaN() : sigma[0];
  };
  std::vector<double> chi(256);
  for (exec policy : {exec::serial, exec::openmp}) {
    try {
      mc_chi_sweep(m, 3, 256, chi, nullptr, 4, policy);
      FAIL("sweep accepted a non-finite chi");
    } catch (const model_evaluation_error& e) {
      CHECK(e.sample_id == 0);
    }
  }

  ModelHandle r = unit_model();
  r.response_fn = [](std::span<const double>, std::span<const double>, std::span<double>) {
    throw std::runtime_error("solver exploded");
  };
  const ChainSample s0 = banked(0.1), s1 = banked(0.2), s2 = banked(0.3);
  const std::vector<EvalItem> items{{&s0, 1, 0}, {&s1, 1, 1}, {&s2, 1, 2}};
  for (exec policy : {exec::serial, exec::openmp}) {
    try {
      response_sweep(r, 3, items, 2, policy);
      FAIL("sweep swallowed the model exception");
    } catch (const model_evaluation_error& e) {
      CHECK(e.sample_id == 0);
      CHECK(std::string(e.what()).find("solver exploded") != std::string::npos);
    }
  }
}
