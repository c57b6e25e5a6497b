// Allocation tests: the preliminary study against a by-hand replay of its
// selection prefix, the Neyman ratio on a two-stratum problem, floor / cap /
// cardinal behavior, the infeasible-target fallback, and a randomized audit
// of the greedy solver against exhaustive enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "strat/allocate.hpp"
#include "strat/errors.hpp"
#include "strat/estimators.hpp"
#include "strat/kernels.hpp"
#include "strat/model.hpp"
#include "strat/phase1.hpp"

using namespace strat;

namespace {

StratumSet make_strata(sampling_mode mode, std::vector<double> probs, std::vector<double> cov) {
  StratumSet s;
  s.mode = mode;
  s.m = static_cast<int>(probs.size());
  s.probs = std::move(probs);
  s.prob_cov = std::move(cov);
  return s;
}

UnitVarianceTable make_table(std::vector<std::vector<double>> pf, std::vector<std::vector<double>> psi) {
  UnitVarianceTable t;
  t.n_p = 25;
  const int H = static_cast<int>(pf.size());
  const int m = static_cast<int>(pf.front().size());
  for (int h = 0; h < H; ++h) t.limit_state_ids.push_back("ls" + std::to_string(h));
  t.pf = std::move(pf);
  t.psi = std::move(psi);
  t.cardinal.assign(H, std::vector<std::uint8_t>(m, 0));
  return t;
}

}  // namespace

TEST_CASE("preliminary study reproduces a by-hand replay of the selection prefix") {
  const ModelHandle toy = make_model("toy2d", {{"thresholds", "1500,2400"}});
  const PhaseIResult p1 = run_phase1_sus(toy, 1000, 3, 0.1, 13);
  const int m = p1.strata.m;
  const std::int64_t n_p = 40;

  const UnitVarianceTable table = preliminary_study(p1, toy, n_p, 55, 1);
  REQUIRE(table.limit_state_count() == 2);
  REQUIRE(table.stratum_count() == m);
  CHECK(table.n_p == n_p);
  CHECK(table.limit_state_ids == std::vector<std::string>{"g1500", "g2400"});

  // Replay: the study is exactly a Phase-II selection of n_p slots per
  // stratum under the same seed, one response sweep, and the per-stratum
  // estimator.
  const PhaseIISelection sel = select_phase2(p1, std::vector<std::int64_t>(m, n_p), 55);
  std::vector<EvalItem> items;
  for (int i = 0; i < m; ++i)
    for (std::int64_t s = 0; s < n_p; ++s) items.push_back({&p1.samples[i][sel.ids[i][s]], i + 1, s});
  const EvalSweepResult sweep = response_sweep(toy, 55, items, 1, exec::serial);

  for (int i = 0; i < m; ++i) {
    std::vector<SampleLineage> lin(n_p);
    for (std::int64_t s = 0; s < n_p; ++s) {
      const ChainSample& cs = *items[i * n_p + s].sample;
      lin[s] = {cs.chain_id, cs.state_index};
    }
    for (int h = 0; h < 2; ++h) {
      std::vector<std::uint8_t> col(n_p);
      for (std::int64_t s = 0; s < n_p; ++s) col[s] = sweep.indicators[(i * n_p + s) * 2 + h];
      const StratumEstimate est = conditional_failure_prob(col, lin, i == 0);
      CHECK(table.pf[h][i] == est.pf);
      CHECK(table.psi[h][i] == est.psi);
      CHECK(table.cardinal[h][i] == (est.cardinal ? 1 : 0));
    }
  }
}

TEST_CASE("preliminary study validates its sample budget") {
  const ModelHandle toy = make_model("toy2d");
  const PhaseIResult p1 = run_phase1_sus(toy, 400, 3, 0.2, 11);
  CHECK_THROWS_AS(preliminary_study(p1, toy, 1, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(preliminary_study(p1, toy, 321, 5, 1), std::invalid_argument);
}

TEST_CASE("allocation follows the Neyman ratio on a two-stratum problem") {
  // Unit standard deviations 0.1 and 0.4 under strata weights 0.9 and 0.1:
  // the continuous optimum splits evaluations 9:4. pf values are chosen so
  // pf (1 - pf) hits 0.01 and 0.16 exactly enough.
  const double pf_lo = (1.0 - std::sqrt(0.96)) / 2.0;  // pf (1-pf) = 0.01
  const UnitVarianceTable table = make_table({{pf_lo, 0.2}}, {{1.0, 1.0}});
  const StratumSet strata = make_strata(sampling_mode::sus, {0.9, 0.1}, {0.0, 0.0, 0.0, 0.0});
  const std::vector<std::int64_t> caps{100000, 100000};

  // Target pinned at the kappa of the exact Neyman point (900, 400).
  const std::vector<std::int64_t> neyman{900, 400};
  const double target = predicted_kappa(table, strata, 0, neyman, caps);
  const AllocationPlan plan =
      optimal_allocation(table, strata, std::vector<double>{target}, caps, 2, 1);

  CHECK(plan.all_feasible);
  CHECK(plan.kappa[0] <= target);
  // The integer solution can sit a sample or two off the continuous optimum
  // but not beyond: total within 1% of 1300, ratio within 10% of 9/4.
  CHECK(plan.total() >= 1300);
  CHECK(plan.total() <= 1313);
  const double ratio = static_cast<double>(plan.n[0]) / static_cast<double>(plan.n[1]);
  CHECK(std::fabs(ratio - 2.25) < 0.225);

  // Local-minimality certificate: no single decrement stays feasible.
  for (int i = 0; i < 2; ++i) {
    std::vector<std::int64_t> dec(plan.n.begin(), plan.n.end());
    dec[i] -= 1;
    CHECK(predicted_kappa(table, strata, 0, dec, caps) > target);
  }
}

TEST_CASE("slack targets stay at the floor") {
  const UnitVarianceTable table = make_table({{0.05, 0.3}}, {{1.0, 1.4}});
  const StratumSet strata = make_strata(sampling_mode::sus, {0.8, 0.2}, {0.0, 0.0, 0.0, 0.0});
  const std::vector<std::int64_t> caps{500, 500};
  const AllocationPlan plan =
      optimal_allocation(table, strata, std::vector<double>{5.0}, caps, 3, 1);
  CHECK(plan.n == std::vector<std::int64_t>{3, 3});
  CHECK(plan.all_feasible);
  CHECK(plan.kappa[0] <= 5.0);
  CHECK(plan.total() == 6);
}

TEST_CASE("infeasible targets are flagged and driven to the caps") {
  const UnitVarianceTable table = make_table({{0.05, 0.3}}, {{1.0, 1.4}});
  const StratumSet strata = make_strata(sampling_mode::sus, {0.8, 0.2}, {0.0, 0.0, 0.0, 0.0});
  const std::vector<std::int64_t> caps{60, 80};

  const std::vector<double> floor_k = feasibility_floor(table, strata, caps);
  REQUIRE(floor_k.size() == 1);
  const double impossible = floor_k[0] * 0.5;

  const AllocationPlan plan =
      optimal_allocation(table, strata, std::vector<double>{impossible}, caps, 2, 1);
  CHECK(!plan.all_feasible);
  CHECK(plan.feasible == std::vector<std::uint8_t>{0});
  CHECK(plan.no_failures == std::vector<std::uint8_t>{0});
  CHECK(plan.n == std::vector<std::int64_t>(caps.begin(), caps.end()));
  // At the caps the plan's kappa IS the floor value, bit for bit.
  CHECK(plan.kappa[0] == floor_k[0]);
  CHECK(plan.floor_kappa[0] == floor_k[0]);
  CHECK(plan.kappa[0] > impossible);
}

TEST_CASE("cardinal strata take no samples beyond the floor") {
  // Stratum 1 saw no failures in the study: zero observed unit variance
  // contributes nothing, so spending evaluations there cannot help.
  UnitVarianceTable table = make_table({{0.0, 0.3}}, {{1.0, 1.0}});
  table.cardinal[0][0] = 1;
  const StratumSet strata = make_strata(sampling_mode::sus, {0.7, 0.3}, {0.0, 0.0, 0.0, 0.0});
  const std::vector<std::int64_t> caps{400, 400};

  const std::vector<std::int64_t> mid{100, 100};
  const double target = predicted_kappa(table, strata, 0, mid, caps);
  const AllocationPlan plan =
      optimal_allocation(table, strata, std::vector<double>{target}, caps, 2, 1);
  CHECK(plan.cardinal_strata == std::vector<std::uint8_t>{1, 0});
  CHECK(plan.n[0] == 2);
  CHECK(plan.n[1] >= 100);
  CHECK(plan.all_feasible);
}

TEST_CASE("limit states with no preliminary failures are excluded but reported") {
  const UnitVarianceTable table = make_table({{0.0, 0.0}, {0.1, 0.25}}, {{1.0, 1.0}, {1.0, 1.2}});
  const StratumSet strata = make_strata(sampling_mode::sus, {0.85, 0.15}, {0.0, 0.0, 0.0, 0.0});
  const std::vector<std::int64_t> caps{300, 300};

  const std::vector<std::int64_t> mid{60, 60};
  const double target = predicted_kappa(table, strata, 1, mid, caps);
  const AllocationPlan plan =
      optimal_allocation(table, strata, std::vector<double>{0.1, target}, caps, 2, 1);

  CHECK(plan.no_failures == std::vector<std::uint8_t>{1, 0});
  CHECK(plan.feasible[0] == 0);
  CHECK(!plan.all_feasible);
  CHECK(std::isnan(plan.kappa[0]));
  CHECK(std::isnan(plan.floor_kappa[0]));
  // The solvable limit state is still solved.
  CHECK(plan.feasible[1] == 1);
  CHECK(plan.kappa[1] <= target);

  const std::vector<double> floor_k = feasibility_floor(table, strata, caps);
  CHECK(std::isnan(floor_k[0]));
  CHECK(floor_k[1] == predicted_kappa(table, strata, 1, caps, caps));
}

TEST_CASE("greedy allocation audits against exhaustive enumeration") {
  std::mt19937_64 gen(77);
  auto u01 = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  const std::int64_t floor = 2;

  int feasible_instances = 0, exact = 0;
  for (int t = 0; t < 30; ++t) {
    const int m = 2 + t % 3;
    const int H = 1 + t % 2;

    std::vector<double> cond(m - 1), delta(m - 1);
    for (auto& c : cond) c = 0.1 + 0.4 * u01();
    for (auto& d : delta) d = 0.02 + 0.15 * u01();
    std::vector<double> probs(m);
    double run = 1.0;
    for (int i = 0; i + 1 < m; ++i) {
      probs[i] = run * (1.0 - cond[i]);
      run *= cond[i];
    }
    probs[m - 1] = run;
    const StratumSet strata =
        make_strata(sampling_mode::sus, probs, oracle::sus_cov_matrix(cond, delta, 500));

    std::vector<std::vector<double>> pf(H, std::vector<double>(m));
    std::vector<std::vector<double>> psi(H, std::vector<double>(m));
    for (int h = 0; h < H; ++h)
      for (int i = 0; i < m; ++i) {
        pf[h][i] = 0.02 + 0.55 * u01();
        psi[h][i] = 1.0 + 1.5 * u01();
      }
    const UnitVarianceTable table = make_table(pf, psi);

    std::vector<std::int64_t> caps(m);
    for (auto& c : caps)
      c = (m == 4 ? 24 + static_cast<std::int64_t>(gen() % 12) : 30 + static_cast<std::int64_t>(gen() % 20));

    // Target kappas sampled at a random interior allocation and jittered, so
    // some instances land infeasible on purpose.
    std::vector<std::int64_t> mid(m);
    for (int i = 0; i < m; ++i) mid[i] = floor + static_cast<std::int64_t>(gen() % (caps[i] - floor + 1));
    std::vector<double> targets(H);
    for (int h = 0; h < H; ++h) targets[h] = predicted_kappa(table, strata, h, mid, caps) * (0.92 + 0.16 * u01());

    const AllocationPlan plan = optimal_allocation(table, strata, targets, caps, floor, 1);

    auto feasible = [&](const std::vector<std::int64_t>& n) {
      for (int h = 0; h < H; ++h)
        if (predicted_kappa(table, strata, h, n, caps) > targets[h]) return false;
      return true;
    };
    const std::vector<std::int64_t> best = oracle::exhaustive_min_allocation(feasible, floor, caps);

    if (best.empty()) {
      CHECK(!plan.all_feasible);
      CHECK(plan.n == std::vector<std::int64_t>(caps.begin(), caps.end()));
      continue;
    }
    ++feasible_instances;
    REQUIRE(plan.all_feasible);
    CHECK(feasible(plan.n));
    const std::int64_t best_total = std::accumulate(best.begin(), best.end(), std::int64_t{0});
    // Never more than 2% (or one sample) over the exhaustive optimum.
    CHECK(plan.total() <= best_total + std::max<std::int64_t>(1, best_total / 50));
    if (plan.total() == best_total) ++exact;

    // Certificate: single decrements of the greedy plan are infeasible.
    for (int i = 0; i < m; ++i) {
      if (plan.n[i] <= floor) continue;
      std::vector<std::int64_t> dec(plan.n.begin(), plan.n.end());
      dec[i] -= 1;
      CHECK(!feasible(dec));
    }
  }
  REQUIRE(feasible_instances >= 10);
  CHECK(exact >= (feasible_instances * 9) / 10);
}

TEST_CASE("predicted kappa is monotone in every stratum") {
  const UnitVarianceTable table =
      make_table({{0.05, 0.2, 0.45}, {0.01, 0.1, 0.3}}, {{1.0, 1.3, 1.8}, {1.0, 1.1, 2.2}});
  const std::vector<double> cond{0.25, 0.2};
  const std::vector<double> delta{0.08, 0.12};
  const std::vector<double> probs{0.75, 0.2, 0.05};
  const StratumSet strata = make_strata(sampling_mode::sus, probs, oracle::sus_cov_matrix(cond, delta, 400));
  const std::vector<std::int64_t> caps{200, 200, 200};

  std::vector<std::int64_t> n{17, 9, 32};
  for (int h = 0; h < 2; ++h) {
    const double k0 = predicted_kappa(table, strata, h, n, caps);
    REQUIRE(k0 > 0.0);
    for (int i = 0; i < 3; ++i) {
      std::vector<std::int64_t> inc(n.begin(), n.end());
      inc[i] += 1;
      CHECK(predicted_kappa(table, strata, h, inc, caps) <= k0);
    }
  }

  // Block-sized increments behave the same way and keep the certificate.
  const std::vector<std::int64_t> mid{40, 40, 40};
  const double target = predicted_kappa(table, strata, 0, mid, caps) * 1.01;
  const AllocationPlan plan =
      optimal_allocation(table, strata, std::vector<double>{target, 5.0}, caps, 2, 5);
  CHECK(plan.all_feasible);
  CHECK(plan.kappa[0] <= target);
  for (int i = 0; i < 3; ++i) {
    if (plan.n[i] <= 2) continue;
    std::vector<std::int64_t> dec(plan.n.begin(), plan.n.end());
    dec[i] -= 1;
    CHECK(predicted_kappa(table, strata, 0, dec, caps) > target);
  }
}

TEST_CASE("allocation validates its inputs") {
  const UnitVarianceTable table = make_table({{0.1, 0.2}}, {{1.0, 1.0}});
  const StratumSet strata = make_strata(sampling_mode::sus, {0.9, 0.1}, {0.0, 0.0, 0.0, 0.0});
  const std::vector<std::int64_t> caps{50, 50};

  CHECK_THROWS_AS(optimal_allocation(table, strata, std::vector<double>{0.1, 0.1}, caps, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimal_allocation(table, strata, std::vector<double>{0.1}, std::vector<std::int64_t>{50}, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimal_allocation(table, strata, std::vector<double>{0.1}, caps, 2, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimal_allocation(table, strata, std::vector<double>{0.0}, caps, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimal_allocation(table, strata, std::vector<double>{-0.2}, caps, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimal_allocation(table, strata, std::vector<double>{0.1}, std::vector<std::int64_t>{50, 1}, 2, 1),
                  std::invalid_argument);
}
