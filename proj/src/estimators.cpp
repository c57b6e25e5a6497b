#include "strat/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "strat/dist.hpp"
#include "strat/errors.hpp"

namespace strat {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kProbClamp = 1e-6;
}  // namespace

PhaseIISelection select_phase2(const PhaseIResult& phase1, std::span<const std::int64_t> allocation,
                               std::uint64_t seed) {
  const int m = phase1.strata.m;
  if (static_cast<int>(allocation.size()) != m)
    throw std::invalid_argument("select_phase2: allocation size does not match stratum count");
  PhaseIISelection sel;
  sel.ids.resize(m);
  sel.n.resize(m);
  sel.nu.resize(m);
  for (int i = 0; i < m; ++i) {
    const std::int64_t bank = phase1.stratum_size(i);
    const std::int64_t take = allocation[i];
    if (take < 1 || take > bank)
      throw infeasible_selection("select_phase2: stratum " + std::to_string(i + 1) + " asked for " +
                                 std::to_string(take) + " of " + std::to_string(bank) + " banked samples");
    RngStream stream(seed, {rng_domain::select_perm, static_cast<uint32_t>(i + 1), 0, 0, 0});
    const auto perm = random_permutation(stream, static_cast<uint32_t>(bank));
    sel.ids[i].assign(perm.begin(), perm.begin() + take);
    sel.n[i] = take;
    sel.nu[i] = static_cast<double>(take) / static_cast<double>(bank);
  }
  return sel;
}

StratumEstimate conditional_failure_prob(std::span<const std::uint8_t> indicators,
                                         std::span<const SampleLineage> lineage, bool iid) {
  const auto n = static_cast<std::int64_t>(indicators.size());
  if (n < 1) throw std::invalid_argument("conditional_failure_prob: empty selection");
  if (lineage.size() != indicators.size())
    throw std::invalid_argument("conditional_failure_prob: lineage size mismatch");

  StratumEstimate est;
  std::int64_t hits = 0;
  for (auto v : indicators) hits += v;
  est.pf = static_cast<double>(hits) / static_cast<double>(n);
  est.cardinal = hits == 0 || hits == n;
  const double R0 = est.pf * (1.0 - est.pf);
  if (iid || est.cardinal || n == 1) {
    est.psi = 1.0;
    est.var = R0 / static_cast<double>(n);
    return est;
  }

  // Pair indicators over maximal consecutive state-index runs within each
  // chain; the run decomposition keeps only pairs whose in-between states
  // were also selected.
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (lineage[a].chain_id != lineage[b].chain_id) return lineage[a].chain_id < lineage[b].chain_id;
    return lineage[a].state_index < lineage[b].state_index;
  });
  double cross = 0.0;
  const double pf2 = est.pf * est.pf;
  std::size_t run_begin = 0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    const bool continues = k < order.size() && lineage[order[k]].chain_id == lineage[order[k - 1]].chain_id &&
                           lineage[order[k]].chain_id >= 0 &&
                           lineage[order[k]].state_index == lineage[order[k - 1]].state_index + 1;
    if (!continues) {
      for (std::size_t a = run_begin; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b)
          cross += static_cast<double>(indicators[order[a]] & indicators[order[b]]) - pf2;
      }
      run_begin = k;
    }
  }
  est.psi = std::max(0.0, 1.0 + 2.0 * cross / (static_cast<double>(n) * R0));
  est.var = R0 * est.psi / static_cast<double>(n);
  return est;
}

LimitStateEstimate overall_estimate(const StratumSet& strata, std::span<const StratumEstimate> per_stratum,
                                    std::span<const std::int64_t> n, std::span<const std::int64_t> n_hat_i,
                                    std::int64_t n_hat) {
  const int m = strata.m;
  if (static_cast<int>(per_stratum.size()) != m || static_cast<int>(n.size()) != m ||
      static_cast<int>(n_hat_i.size()) != m)
    throw std::invalid_argument("overall_estimate: per-stratum input sizes must match the stratum count");

  LimitStateEstimate est;
  est.pf_strata.resize(m);
  est.psi.resize(m);
  est.var_strata.resize(m);
  double pf = 0.0;
  for (int i = 0; i < m; ++i) {
    est.pf_strata[i] = per_stratum[i].pf;
    est.psi[i] = per_stratum[i].psi;
    est.var_strata[i] = per_stratum[i].var;
    pf += per_stratum[i].pf * strata.probs[i];
  }
  est.pf = pf;
  est.any_failure = pf > 0.0;
  if (!est.any_failure) {
    est.cov = kNaN;
    return est;
  }

  double variance = 0.0;
  if (strata.mode == sampling_mode::mc) {
    variance = pf * (1.0 - pf) / static_cast<double>(n_hat);
    for (int i = 0; i < m; ++i) {
      const double nu = static_cast<double>(n[i]) / static_cast<double>(n_hat_i[i]);
      const double unit = per_stratum[i].pf * (1.0 - per_stratum[i].pf);
      variance += strata.probs[i] * unit * (1.0 / nu - 1.0) / static_cast<double>(n_hat);
    }
  } else {
    for (int i = 0; i < m; ++i)
      variance += per_stratum[i].var * (strata.cov(i, i) + strata.probs[i] * strata.probs[i]);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) variance += per_stratum[i].pf * per_stratum[j].pf * strata.cov(i, j);
    }
  }
  est.cov = std::sqrt(std::max(0.0, variance)) / pf;
  return est;
}

std::pair<double, double> to_aer_beta(double pf, double lambda_event, double horizon_years) {
  if (!(pf >= 0.0 && pf <= 1.0)) throw std::invalid_argument("to_aer_beta: pf outside [0,1]");
  if (lambda_event <= 0.0) throw std::invalid_argument("to_aer_beta: event rate must be positive");
  const double aer = lambda_event * pf;
  if (aer >= 1.0) throw std::domain_error("to_aer_beta: annual exceedance rate reached 1");
  if (aer == 0.0) return {0.0, kInf};
  const double survive = std::pow(1.0 - aer, horizon_years);
  if (survive >= 1.0) return {aer, kInf};
  return {aer, normal_quantile(survive)};
}

void attach_aer_beta(LimitStateEstimate& est, double lambda_event, double horizon_years) {
  const auto [aer, beta] = to_aer_beta(est.pf, lambda_event, horizon_years);
  est.aer = aer;
  est.beta = beta;
  est.beta_infinite = std::isinf(beta);
}

namespace {

// Exceedance fractions per stratum (strict >) against a sorted value list,
// then the total-probability sum accumulated in ascending stratum order so
// boundary cases telescope exactly.
std::vector<CurvePoint> exceedance_curve(const StratumSet& strata, const std::vector<std::vector<double>>& sorted,
                                         const std::vector<std::int64_t>& counts, double lambda_event,
                                         std::span<const double> grid) {
  const int m = strata.m;
  std::vector<CurvePoint> curve;
  curve.reserve(grid.size());
  std::vector<double> q(m);
  for (double v : grid) {
    CurvePoint pt;
    pt.x = v;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto above = sorted[i].end() - std::upper_bound(sorted[i].begin(), sorted[i].end(), v);
      q[i] = static_cast<double>(above) / static_cast<double>(counts[i]);
      total += strata.probs[i] * q[i];
    }
    pt.rate = lambda_event * total;
    double var = 0.0;
    for (int i = 0; i < m; ++i) {
      var += strata.probs[i] * strata.probs[i] * q[i] * (1.0 - q[i]) / static_cast<double>(counts[i]);
      for (int j = 0; j < m; ++j) var += q[i] * q[j] * strata.cov(i, j);
    }
    pt.se = lambda_event * std::sqrt(std::max(0.0, var));
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace

std::vector<CurvePoint> hazard_curve(const PhaseIResult& phase1, double lambda_event, std::span<const double> grid) {
  const int m = phase1.strata.m;
  std::vector<std::vector<double>> sorted(m);
  std::vector<std::int64_t> counts(m);
  for (int i = 0; i < m; ++i) {
    sorted[i].reserve(phase1.samples[i].size());
    for (const auto& s : phase1.samples[i]) sorted[i].push_back(s.chi);
    std::sort(sorted[i].begin(), sorted[i].end());
    counts[i] = static_cast<std::int64_t>(sorted[i].size());
  }
  return exceedance_curve(phase1.strata, sorted, counts, lambda_event, grid);
}

std::vector<CurvePoint> response_aer_curve(const StratumSet& strata, const std::vector<std::vector<double>>& values,
                                           double lambda_event, std::span<const double> grid) {
  if (static_cast<int>(values.size()) != strata.m)
    throw std::invalid_argument("response_aer_curve: need one value list per stratum");
  std::vector<std::vector<double>> sorted(values);
  std::vector<std::int64_t> counts(strata.m);
  for (int i = 0; i < strata.m; ++i) {
    if (sorted[i].empty()) throw std::invalid_argument("response_aer_curve: empty stratum value list");
    std::sort(sorted[i].begin(), sorted[i].end());
    counts[i] = static_cast<std::int64_t>(sorted[i].size());
  }
  return exceedance_curve(strata, sorted, counts, lambda_event, grid);
}

namespace {

double clamp_prob(double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); }

struct FitData {
  std::vector<double> log_a, p, w;
};

double neg_log_likelihood(const FitData& d, double mu, double log_beta) {
  const double beta = std::exp(log_beta);
  double nll = 0.0;
  for (std::size_t i = 0; i < d.p.size(); ++i) {
    const double z = (d.log_a[i] - mu) / beta;
    double cdf = normal_cdf(z);
    cdf = std::min(1.0 - 1e-15, std::max(1e-300, cdf));
    nll -= d.w[i] * (d.p[i] * std::log(cdf) + (1.0 - d.p[i]) * std::log1p(-cdf));
  }
  return nll;
}

// Weighted probit regression: Phi^-1(p) linear in log intensity. Gives the
// simplex start and is already exact on two-point data.
std::pair<double, double> probit_init(const FitData& d) {
  double sw = 0, sx = 0, sz = 0, sxx = 0, sxz = 0;
  for (std::size_t i = 0; i < d.p.size(); ++i) {
    const double x = d.log_a[i];
    const double z = normal_quantile(d.p[i]);
    const double w = d.w[i];
    sw += w;
    sx += w * x;
    sz += w * z;
    sxx += w * x * x;
    sxz += w * x * z;
  }
  const double varx = sxx - sx * sx / sw;
  const double covxz = sxz - sx * sz / sw;
  if (!(varx > 0.0) || !(covxz > 0.0))
    throw fit_infeasible("fragility_fit: probabilities do not increase with intensity");
  const double slope = covxz / varx;                      // 1 / beta
  const double intercept = (sz - slope * sx) / sw;        // -mu / beta
  return {-intercept / slope, -std::log(slope)};          // (mu, log beta)
}

std::pair<double, double> fit_one(const FitData& d) {
  auto [mu, lb] = probit_init(d);
  // Nelder-Mead on (mu, log beta); deterministic, tight tolerance so exact
  // two-point data reproduces the interpolant to ~1e-10.
  double px[3] = {mu, mu + 0.05, mu};
  double py[3] = {lb, lb, lb + 0.05};
  double f[3];
  auto eval = [&](double x, double y) { return neg_log_likelihood(d, x, y); };
  for (int i = 0; i < 3; ++i) f[i] = eval(px[i], py[i]);
  for (int iter = 0; iter < 2000; ++iter) {
    int lo = 0, hi = 0, mid;
    for (int i = 1; i < 3; ++i) {
      if (f[i] < f[lo]) lo = i;
      if (f[i] > f[hi]) hi = i;
    }
    mid = 3 - lo - hi;
    if (lo == hi) mid = (lo + 1) % 3;
    const double spread = std::fabs(f[hi] - f[lo]);
    const double size = std::fabs(px[hi] - px[lo]) + std::fabs(py[hi] - py[lo]) + std::fabs(px[mid] - px[lo]) +
                        std::fabs(py[mid] - py[lo]);
    if (spread < 1e-13 * (1.0 + std::fabs(f[lo])) && size < 1e-10) break;
    const double cx = (px[lo] + px[mid]) / 2.0;
    const double cy = (py[lo] + py[mid]) / 2.0;
    double rx = cx + (cx - px[hi]);
    double ry = cy + (cy - py[hi]);
    double fr = eval(rx, ry);
    if (fr < f[lo]) {
      const double ex = cx + 2.0 * (cx - px[hi]);
      const double ey = cy + 2.0 * (cy - py[hi]);
      const double fe = eval(ex, ey);
      if (fe < fr) {
        px[hi] = ex;
        py[hi] = ey;
        f[hi] = fe;
      } else {
        px[hi] = rx;
        py[hi] = ry;
        f[hi] = fr;
      }
    } else if (fr < f[mid]) {
      px[hi] = rx;
      py[hi] = ry;
      f[hi] = fr;
    } else {
      const double kx = cx + 0.5 * (px[hi] - cx);
      const double ky = cy + 0.5 * (py[hi] - cy);
      const double fk = eval(kx, ky);
      if (fk < f[hi]) {
        px[hi] = kx;
        py[hi] = ky;
        f[hi] = fk;
      } else {
        for (int i = 0; i < 3; ++i) {
          if (i == lo) continue;
          px[i] = px[lo] + 0.5 * (px[i] - px[lo]);
          py[i] = py[lo] + 0.5 * (py[i] - py[lo]);
          f[i] = eval(px[i], py[i]);
        }
      }
    }
  }
  int lo = 0;
  for (int i = 1; i < 3; ++i)
    if (f[i] < f[lo]) lo = i;
  return {px[lo], py[lo]};
}

double lognormal_cdf_at(double x, double median, double dispersion) {
  if (x <= 0.0) return 0.0;
  return normal_cdf((std::log(x) - std::log(median)) / dispersion);
}

}  // namespace

double FragilityFit::cdf(double x) const { return lognormal_cdf_at(x, median, dispersion); }
double FragilityFit::cdf_lo(double x) const { return lognormal_cdf_at(x, median_lo, dispersion_lo); }
double FragilityFit::cdf_hi(double x) const { return lognormal_cdf_at(x, median_hi, dispersion_hi); }

FragilityFit fragility_fit(std::span<const FragilityPoint> points) {
  if (points.size() < 2) throw fit_infeasible("fragility_fit: need at least two strata");
  bool any_below_one = false, any_above_zero = false;
  for (const auto& pt : points) {
    if (pt.intensity <= 0.0) throw std::invalid_argument("fragility_fit: non-positive intensity");
    if (pt.pf > 0.0) any_above_zero = true;
    if (pt.pf < 1.0) any_below_one = true;
  }
  if (!any_above_zero || !any_below_one)
    throw fit_infeasible("fragility_fit: degenerate data (every probability 0 or every probability 1)");

  auto build = [&](double shift) {
    FitData d;
    for (const auto& pt : points) {
      d.log_a.push_back(std::log(pt.intensity));
      d.p.push_back(clamp_prob(pt.pf + shift * 1.65 * pt.sd));
      d.w.push_back(pt.n);
    }
    return d;
  };

  FragilityFit fit;
  const auto [mu, lb] = fit_one(build(0.0));
  fit.median = std::exp(mu);
  fit.dispersion = std::exp(lb);
  // Bound curves refit the +-1.65 sd shifted probabilities; if a shifted set
  // degenerates the central fit stands in for that side.
  try {
    const auto [mu_lo, lb_lo] = fit_one(build(-1.0));
    fit.median_lo = std::exp(mu_lo);
    fit.dispersion_lo = std::exp(lb_lo);
  } catch (const fit_infeasible&) {
    fit.median_lo = fit.median;
    fit.dispersion_lo = fit.dispersion;
  }
  try {
    const auto [mu_hi, lb_hi] = fit_one(build(1.0));
    fit.median_hi = std::exp(mu_hi);
    fit.dispersion_hi = std::exp(lb_hi);
  } catch (const fit_infeasible&) {
    fit.median_hi = fit.median;
    fit.dispersion_hi = fit.dispersion;
  }
  return fit;
}

}  // namespace strat
