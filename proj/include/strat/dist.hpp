// Univariate marginals and standard-normal kernels.
//
// All sampling is inverse-CDF on a (0,1) uniform so that a sample is a pure
// function of its stream draw -- the property the whole reproducibility story
// rests on. Four families cover every input in the built-in models.

#pragma once

#include "strat/rng.hpp"

namespace strat {

// Phi(x), via erfc. Absolute error ~1e-16 over the range used.
double normal_cdf(double x);

// Phi^-1(p) for p in (0,1). Wichura's AS 241 (PPND16) rational
// approximation, ~1e-16 relative; throws std::invalid_argument at p in {0,1}.
double normal_quantile(double p);

enum class dist_kind { uniform, normal, lognormal, trunc_exp };

struct DistributionSpec {
  dist_kind kind = dist_kind::normal;
  // Meaning by kind:
  //   uniform:   p0 = a, p1 = b
  //   normal:    p0 = mean, p1 = sd
  //   lognormal: p0 = logmean, p1 = logstd (canonical storage)
  //   trunc_exp: p0 = beta, p1 = lower, p2 = upper
  double p0 = 0.0, p1 = 1.0, p2 = 0.0;

  static DistributionSpec uniform(double a, double b);
  static DistributionSpec normal(double mean, double sd);
  static DistributionSpec lognormal_log(double logmean, double logstd);
  // Engineering parameterizations (median / mean with c.o.v.); converted on
  // construction to the canonical log-space storage.
  static DistributionSpec lognormal_median_cov(double median, double cov);
  static DistributionSpec lognormal_mean_cov(double mean, double cov);
  static DistributionSpec trunc_exp(double beta, double lower, double upper);

  // Throws std::invalid_argument naming the offending parameter.
  void validate() const;

  double quantile(double u) const;  // u in (0,1)
  double cdf(double x) const;
  double sample(RngStream& stream) const { return quantile(stream.next_u01()); }

  double mean() const;
  double stddev() const;

  // Standard-normal transform used by the MCMC kernel: u = Phi^-1(F(x)).
  double to_std_normal(double x) const;
  double from_std_normal(double u) const;
};

}  // namespace strat
