// Phase-II estimators: without-replacement sample selection, conditional and
// overall failure probabilities with chain-correlation-aware variances,
// AER / reliability-index conversion, hazard and response-AER curves, and
// lognormal fragility fitting.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "strat/phase1.hpp"

namespace strat {

struct PhaseIISelection {
  // Per stratum: banked-sample indices in selection order. The order is the
  // stratum's seeded permutation, so a selection of size n is always a prefix
  // of any larger selection with the same seed (preliminary-study reuse).
  std::vector<std::vector<std::int64_t>> ids;
  std::vector<std::int64_t> n;   // n_i
  std::vector<double> nu;        // n_i / n_hat_i
};

// Uniform without-replacement draw of allocation[i] samples from each
// stratum bank. allocation[i] must lie in [1, n_hat_i]; anything else raises
// infeasible_selection.
PhaseIISelection select_phase2(const PhaseIResult& phase1, std::span<const std::int64_t> allocation,
                               std::uint64_t seed);

struct SampleLineage {
  int chain_id = -1;
  int state_index = 0;
};

struct StratumEstimate {
  double pf = 0.0;    // conditional failure probability
  double psi = 1.0;   // correlation inflation factor
  double var = 0.0;   // variance of pf
  bool cardinal = false;  // pf landed on 0 or 1: zero observed unit variance
};

// Mean indicator, correlation factor, and variance for one stratum. psi comes
// from intra-chain indicator covariances over maximal consecutive
// state-index runs of the selection; iid strata (plain MC, stratum 1, or
// singleton chains) have psi = 1 by construction.
StratumEstimate conditional_failure_prob(std::span<const std::uint8_t> indicators,
                                         std::span<const SampleLineage> lineage, bool iid);

struct LimitStateEstimate {
  std::string id;
  std::vector<double> pf_strata;
  std::vector<double> psi;
  std::vector<double> var_strata;
  double pf = 0.0;
  double cov = 0.0;          // kappa_h; meaningful only when any_failure
  bool any_failure = false;  // false => "no failures observed" sentinel
  double aer = 0.0;
  double beta = 0.0;
  bool beta_infinite = false;
};

// Combine per-stratum estimates into the overall failure probability and its
// c.o.v. MC mode uses the double-sampling variance (sub-sampling fractions
// nu_i); SuS mode the strata-probability covariance composition.
LimitStateEstimate overall_estimate(const StratumSet& strata, std::span<const StratumEstimate> per_stratum,
                                    std::span<const std::int64_t> n, std::span<const std::int64_t> n_hat_i,
                                    std::int64_t n_hat);

// AER = lambda_event * pf; beta = Phi^-1((1 - AER)^horizon). AER >= 1 is a
// domain error; pf = 0 yields AER 0 with the infinite-beta flag set.
void attach_aer_beta(LimitStateEstimate& est, double lambda_event, double horizon_years);
std::pair<double, double> to_aer_beta(double pf, double lambda_event, double horizon_years);

struct CurvePoint {
  double x = 0.0;
  double rate = 0.0;
  double se = 0.0;
};

// lambda(v) = lambda_event * sum_i P(chi > v | S_i) P(S_i) from the Phase-I
// banks' empirical conditional exceedance (strict >). At a stratum boundary
// the inner fractions are exactly 0 or 1, so the curve reproduces the
// partial strata-probability sums bit for bit.
std::vector<CurvePoint> hazard_curve(const PhaseIResult& phase1, double lambda_event, std::span<const double> grid);

// Same construction thresholding a response over the Phase-II evaluations
// (values[i] = the selected samples' response values in stratum i+1). The
// standard-error column treats within-stratum values as independent.
std::vector<CurvePoint> response_aer_curve(const StratumSet& strata,
                                           const std::vector<std::vector<double>>& values, double lambda_event,
                                           std::span<const double> grid);

struct FragilityPoint {
  double intensity = 0.0;  // stratum abscissa (mean chi)
  double pf = 0.0;
  double n = 0.0;          // binomial weight
  double sd = 0.0;         // std. error of pf, sets the +-1.65 sd bound shift
};

struct FragilityFit {
  double median = 0.0;
  double dispersion = 0.0;
  double median_lo = 0.0, dispersion_lo = 0.0;  // fit to pf - 1.65 sd
  double median_hi = 0.0, dispersion_hi = 0.0;  // fit to pf + 1.65 sd
  double cdf(double x) const;
  double cdf_lo(double x) const;
  double cdf_hi(double x) const;
};

// Weighted binomial maximum-likelihood fit of a lognormal CDF through the
// per-stratum conditional probabilities; probabilities are clamped to
// [1e-6, 1 - 1e-6] before the likelihood. Throws fit_infeasible when the
// data cannot identify an increasing curve.
FragilityFit fragility_fit(std::span<const FragilityPoint> points);

}  // namespace strat
