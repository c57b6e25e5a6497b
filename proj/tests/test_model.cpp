#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "strat/benchmarks.hpp"
#include "strat/errors.hpp"
#include "strat/model.hpp"

using namespace strat;

TEST_CASE("toy2d model surface") {
  const ModelHandle m = make_model("toy2d");
  CHECK(m.name == "toy2d");
  CHECK(m.sigma_dim() == 1);
  CHECK(m.tau_dim() == 1);
  CHECK(m.response_dim == 1);
  REQUIRE(m.limit_states.size() == 1);
  CHECK(m.limit_states[0].threshold == 1500.0);

  const double sigma[] = {2.0};
  CHECK(eval_chi(m, sigma) == doctest::Approx(8.0).epsilon(1e-15));

  // sigma = 10: 3 sigma^3 = 3000, beyond the threshold whatever tau does.
  const double sigma_hi[] = {10.0};
  const double tau[] = {1.0};
  double resp[1];
  std::uint8_t ind[1];
  CHECK(eval_indicators(m, sigma_hi, tau, resp, ind));
  CHECK(resp[0] == doctest::Approx(3000.0 + 200.0 * std::sin(1.0)).epsilon(1e-15));
  CHECK(ind[0] == 1);

  const ModelHandle multi = make_model("toy2d", {{"thresholds", "1500,2400"}});
  REQUIRE(multi.limit_states.size() == 2);
  CHECK(multi.limit_states[1].threshold == 2400.0);
}

TEST_CASE("unknown model name throws") {
  CHECK_THROWS_AS(make_model("nonesuch"), std::invalid_argument);
}

TEST_CASE("non-finite chi raises a model evaluation error") {
  ModelHandle m = make_model("toy2d");
  m.chi_fn = [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); };
  const double sigma[] = {1.0};
  CHECK_THROWS_AS(eval_chi(m, sigma), model_evaluation_error);
}

TEST_CASE("divergent response flags every limit state") {
  ModelHandle m = make_model("toy2d", {{"thresholds", "1500,2400"}});
  m.response_fn = [](std::span<const double>, std::span<const double>, std::span<double> out) {
    out[0] = std::numeric_limits<double>::infinity();
  };
  const double sigma[] = {5.0};
  const double tau[] = {1.0};
  double resp[1];
  std::uint8_t ind[2] = {0, 0};
  CHECK_FALSE(eval_indicators(m, sigma, tau, resp, ind));
  CHECK(ind[0] == 1);
  CHECK(ind[1] == 1);
}

TEST_CASE("chi tail closed form agrees with the reference") {
  for (double v : {1.0, 50.0, 125.0, 400.0, 733.0}) {
    CHECK(toy2d_chi_tail(v) == doctest::Approx(oracle::chi_tail(v)).epsilon(1e-14));
  }
}

TEST_CASE("toy failure probability: quadratures and frozen values agree") {
  // Library route (adaptive Simpson over tau) and test route (Gauss-Legendre
  // over tau) are independent numerics for the same integral.
  CHECK(toy_oracle(1500.0) == doctest::Approx(oracle::kToyPf1500).epsilon(1e-9));
  CHECK(oracle::toy_failure_prob(1500.0) == doctest::Approx(oracle::kToyPf1500).epsilon(1e-9));
  CHECK(toy_oracle(2400.0) == doctest::Approx(oracle::kToyPf2400).epsilon(1e-9));
  CHECK(oracle::toy_failure_prob(2400.0) == doctest::Approx(oracle::kToyPf2400).epsilon(1e-9));
}

TEST_CASE("conditional failure probabilities recompose the total") {
  // Sum over a 3-stratum partition of P(S_i) P(fail | S_i); third method
  // (sigma-side quadrature with the analytic tau measure) against the other
  // two.
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<std::pair<double, double>> strata = {{-inf, 393.0}, {393.0, 529.0}, {529.0, inf}};
  double total = 0.0;
  for (const auto& [lo, hi] : strata)
    total += oracle::stratum_prob(lo, hi) * oracle::toy_conditional_failure_prob(1500.0, lo, hi);
  CHECK(total == doctest::Approx(oracle::kToyPf1500).epsilon(1e-9));
}
