#include "strat/dist.hpp"

#include <cmath>
#include <stdexcept>

namespace strat {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// AS 241 PPND16 (Wichura 1988): minimax rational approximations on three
// regions of p. Coefficients transcribed from the published algorithm.
double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie strictly in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

DistributionSpec DistributionSpec::uniform(double a, double b) {
  DistributionSpec s;
  s.kind = dist_kind::uniform;
  s.p0 = a;
  s.p1 = b;
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::normal(double mean, double sd) {
  DistributionSpec s;
  s.kind = dist_kind::normal;
  s.p0 = mean;
  s.p1 = sd;
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::lognormal_log(double logmean, double logstd) {
  DistributionSpec s;
  s.kind = dist_kind::lognormal;
  s.p0 = logmean;
  s.p1 = logstd;
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::lognormal_median_cov(double median, double cov) {
  if (!(median > 0.0)) throw std::invalid_argument("lognormal: median must be > 0");
  if (!(cov > 0.0)) throw std::invalid_argument("lognormal: cov must be > 0");
  return lognormal_log(std::log(median), std::sqrt(std::log1p(cov * cov)));
}

DistributionSpec DistributionSpec::lognormal_mean_cov(double mean, double cov) {
  if (!(mean > 0.0)) throw std::invalid_argument("lognormal: mean must be > 0");
  if (!(cov > 0.0)) throw std::invalid_argument("lognormal: cov must be > 0");
  const double ls2 = std::log1p(cov * cov);
  return lognormal_log(std::log(mean) - 0.5 * ls2, std::sqrt(ls2));
}

DistributionSpec DistributionSpec::trunc_exp(double beta, double lower, double upper) {
  DistributionSpec s;
  s.kind = dist_kind::trunc_exp;
  s.p0 = beta;
  s.p1 = lower;
  s.p2 = upper;
  s.validate();
  return s;
}

void DistributionSpec::validate() const {
  switch (kind) {
    case dist_kind::uniform:
      if (!(p0 < p1)) throw std::invalid_argument("uniform: requires a < b");
      break;
    case dist_kind::normal:
      if (!(p1 > 0.0)) throw std::invalid_argument("normal: sd must be > 0");
      break;
    case dist_kind::lognormal:
      if (!(p1 > 0.0) || !std::isfinite(p0)) throw std::invalid_argument("lognormal: logstd must be > 0");
      break;
    case dist_kind::trunc_exp:
      if (!(p0 > 0.0)) throw std::invalid_argument("trunc_exp: beta must be > 0");
      if (!(p1 < p2)) throw std::invalid_argument("trunc_exp: requires lower < upper");
      break;
  }
}

double DistributionSpec::quantile(double u) const {
  switch (kind) {
    case dist_kind::uniform:
      return p0 + u * (p1 - p0);
    case dist_kind::normal:
      return p0 + p1 * normal_quantile(u);
    case dist_kind::lognormal:
      return std::exp(p0 + p1 * normal_quantile(u));
    case dist_kind::trunc_exp: {
      // F^-1 on [lower, upper] for density ~ beta*exp(-beta*(x-lower)).
      const double z = -std::expm1(-p0 * (p2 - p1));  // 1 - exp(-beta*span)
      return p1 - std::log1p(-u * z) / p0;
    }
  }
  return 0.0;  // unreachable
}

double DistributionSpec::cdf(double x) const {
  switch (kind) {
    case dist_kind::uniform:
      if (x <= p0) return 0.0;
      if (x >= p1) return 1.0;
      return (x - p0) / (p1 - p0);
    case dist_kind::normal:
      return normal_cdf((x - p0) / p1);
    case dist_kind::lognormal:
      if (x <= 0.0) return 0.0;
      return normal_cdf((std::log(x) - p0) / p1);
    case dist_kind::trunc_exp: {
      if (x <= p1) return 0.0;
      if (x >= p2) return 1.0;
      return std::expm1(-p0 * (x - p1)) / std::expm1(-p0 * (p2 - p1));
    }
  }
  return 0.0;  // unreachable
}

double DistributionSpec::mean() const {
  switch (kind) {
    case dist_kind::uniform:
      return 0.5 * (p0 + p1);
    case dist_kind::normal:
      return p0;
    case dist_kind::lognormal:
      return std::exp(p0 + 0.5 * p1 * p1);
    case dist_kind::trunc_exp: {
      const double span = p2 - p1;
      const double z = -std::expm1(-p0 * span);  // 1 - exp(-beta*span)
      return p1 + 1.0 / p0 - span * std::exp(-p0 * span) / z;
    }
  }
  return 0.0;  // unreachable
}

double DistributionSpec::stddev() const {
  switch (kind) {
    case dist_kind::uniform:
      return (p1 - p0) * 0.28867513459481288225;  // 1/sqrt(12)
    case dist_kind::normal:
      return p1;
    case dist_kind::lognormal: {
      const double m = std::exp(p0 + 0.5 * p1 * p1);
      return m * std::sqrt(std::expm1(p1 * p1));
    }
    case dist_kind::trunc_exp: {
      // Var = E[X^2] - E[X]^2 with X measured from `lower`.
      const double span = p2 - p1;
      const double b = p0;
      const double ez = std::exp(-b * span);
      const double z = 1.0 - ez;
      const double m1 = 1.0 / b - span * ez / z;
      const double m2 = 2.0 / (b * b) - span * (span + 2.0 / b) * ez / z;
      return std::sqrt(m2 - m1 * m1);
    }
  }
  return 0.0;  // unreachable
}

double DistributionSpec::to_std_normal(double x) const {
  if (kind == dist_kind::normal) return (x - p0) / p1;
  if (kind == dist_kind::lognormal) return (std::log(x) - p0) / p1;
  return normal_quantile(cdf(x));
}

double DistributionSpec::from_std_normal(double u) const {
  if (kind == dist_kind::normal) return p0 + p1 * u;
  if (kind == dist_kind::lognormal) return std::exp(p0 + p1 * u);
  return quantile(normal_cdf(u));
}

}  // namespace strat
