#include "strat/phase1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "strat/errors.hpp"
#include "strat/kernels.hpp"

namespace strat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_increasing(std::span<const double> thr, const char* who) {
  for (std::size_t i = 1; i < thr.size(); ++i)
    if (!(thr[i] > thr[i - 1])) throw std::invalid_argument(std::string(who) + ": thresholds must strictly increase");
}

// Sample count at or below the (1-q)-quantile: the k-th order statistic with
// k = ceil((1-q) N). q arrives as a parsed decimal, so (1-q)N can land a few
// ulp on either side of the intended integer (0.3 parses below 3/10, 0.1
// above 1/10); values within representation slack snap to the integer before
// the ceiling.
std::int64_t quantile_rank(std::int64_t N, long double q_above) {
  const long double x = (1.0L - q_above) * static_cast<long double>(N);
  const long double nearest = std::floor(x + 0.5L);
  if (std::fabs(x - nearest) < 1e-6L) return static_cast<std::int64_t>(nearest);
  return static_cast<std::int64_t>(std::ceil(x));
}

// Indices 0..n-1 ordered by (chi, position); the positional tie-break keeps
// the split deterministic when chains have duplicated states.
std::vector<std::int64_t> order_by_chi(std::span<const ChainSample> samples) {
  std::vector<std::int64_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (samples[a].chi != samples[b].chi) return samples[a].chi < samples[b].chi;
    return a < b;
  });
  return order;
}

std::vector<double> multinomial_cov(std::span<const double> probs, std::int64_t n_hat) {
  const int m = static_cast<int>(probs.size());
  std::vector<double> cov(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j)
      cov[static_cast<std::size_t>(i) * m + j] =
          (i == j ? probs[i] * (1.0 - probs[i]) : -probs[i] * probs[j]) / static_cast<double>(n_hat);
  }
  return cov;
}

}  // namespace

StrataSpec StrataSpec::explicit_bounds(std::vector<double> interior) {
  if (interior.empty()) throw std::invalid_argument("StrataSpec: explicit bounds need at least one threshold");
  require_increasing(interior, "StrataSpec");
  StrataSpec s;
  s.thresholds = std::move(interior);
  s.m = static_cast<int>(s.thresholds.size()) + 1;
  s.p = 0.0;
  return s;
}

std::vector<double> default_proposal_spread(const ModelHandle& model) {
  std::vector<double> spread;
  spread.reserve(model.sigma_dim());
  for (const auto& spec : model.inputs.sigma_spec)
    spread.push_back(spec.kind == dist_kind::uniform ? spec.stddev() : 1.0);
  return spread;
}

PhaseIResult run_phase1_mc(const ModelHandle& model, std::int64_t n_hat, const StrataSpec& strata, std::uint64_t seed,
                           int workers) {
  const int m = strata.stratum_count();
  if (m < 1) throw std::invalid_argument("run_phase1_mc: need at least one stratum");
  if (n_hat < m) throw std::invalid_argument("run_phase1_mc: sample count below stratum count");
  if (strata.is_adaptive() && (strata.p <= 0.0 || strata.p >= 1.0))
    throw std::invalid_argument("run_phase1_mc: p must lie in (0,1)");

  std::vector<double> chi(n_hat);
  mc_chi_sweep(model, seed, n_hat, chi, nullptr, workers, exec::openmp);

  PhaseIResult result;
  result.N = n_hat;
  result.n_hat = n_hat;
  result.seed = seed;
  StratumSet& ss = result.strata;
  ss.mode = sampling_mode::mc;
  ss.m = m;
  ss.p = strata.is_adaptive() ? strata.p : 0.0;
  ss.thresholds.assign(m + 1, 0.0);
  ss.thresholds.front() = model.chi_lower;
  ss.thresholds.back() = kInf;
  result.samples.assign(m, {});

  std::vector<std::int64_t> stratum_of(n_hat, 0);
  if (strata.is_adaptive()) {
    // Thresholds at the (1 - p^i) empirical quantiles; binning is by rank, so
    // the fraction above chi_i is p^i up to the ceiling.
    std::vector<std::int64_t> order;
    {
      std::vector<std::int64_t> idx(n_hat);
      std::iota(idx.begin(), idx.end(), std::int64_t{0});
      std::sort(idx.begin(), idx.end(), [&](std::int64_t a, std::int64_t b) {
        if (chi[a] != chi[b]) return chi[a] < chi[b];
        return a < b;
      });
      order = std::move(idx);
    }
    std::vector<std::int64_t> cuts(m + 1, 0);
    cuts[m] = n_hat;
    long double tail = 1.0L;
    for (int i = 1; i < m; ++i) {
      tail *= strata.p;
      cuts[i] = quantile_rank(n_hat, tail);
      if (cuts[i] <= cuts[i - 1] || cuts[i] >= n_hat)
        throw under_populated_stratum("run_phase1_mc: adaptive quantiles leave stratum " + std::to_string(i) +
                                          " empty; increase the sample count",
                                      i);
      ss.thresholds[i] = chi[order[cuts[i] - 1]];
    }
    for (int i = 1; i <= m; ++i)
      for (std::int64_t r = cuts[i - 1]; r < cuts[i]; ++r) stratum_of[order[r]] = i;
  } else {
    const auto& thr = strata.thresholds;
    ss.thresholds.assign(thr.begin(), thr.end());
    ss.thresholds.insert(ss.thresholds.begin(), model.chi_lower);
    ss.thresholds.push_back(kInf);
    for (std::int64_t i = 0; i < n_hat; ++i) {
      const auto it = std::lower_bound(thr.begin(), thr.end(), chi[i]);
      stratum_of[i] = 1 + (it - thr.begin());
    }
  }

  std::vector<std::int64_t> counts(m, 0);
  for (std::int64_t i = 0; i < n_hat; ++i) ++counts[stratum_of[i] - 1];
  for (int i = 0; i < m; ++i) {
    if (counts[i] == 0)
      throw under_populated_stratum("run_phase1_mc: no samples fell in stratum " + std::to_string(i + 1), i + 1);
    result.samples[i].reserve(counts[i]);
  }
  for (std::int64_t i = 0; i < n_hat; ++i) {
    ChainSample s;
    s.chi = chi[i];
    s.stratum = static_cast<int>(stratum_of[i]);
    s.chain_id = -1;
    s.state_index = 0;
    s.level = 0;
    s.mc_index = i;
    result.samples[stratum_of[i] - 1].push_back(std::move(s));
  }

  ss.probs.resize(m);
  for (int i = 0; i < m; ++i) ss.probs[i] = static_cast<double>(counts[i]) / static_cast<double>(n_hat);
  ss.prob_cov = multinomial_cov(ss.probs, n_hat);
  return result;
}

ChainSample mmh_step(const ModelHandle& model, const ChainSample& current, std::span<const double> proposal_spread,
                     double level_threshold, std::uint64_t seed) {
  const int dim = model.sigma_dim();
  if (static_cast<int>(current.sigma.size()) != dim)
    throw std::invalid_argument("mmh_step: current sample carries no sigma vector");
  if (static_cast<int>(proposal_spread.size()) != dim)
    throw std::invalid_argument("mmh_step: proposal spread dimension mismatch");

  ChainSample next = current;
  next.state_index = current.state_index + 1;
  next.stratum = 0;

  std::vector<double> candidate(dim);
  bool moved = false;
  for (int c = 0; c < dim; ++c) {
    RngStream stream(seed, {rng_domain::mmh, static_cast<uint32_t>(current.level), 0,
                            static_cast<uint32_t>(current.chain_id), static_cast<uint32_t>(c)});
    stream.seek(2 * static_cast<uint64_t>(current.state_index));
    const double u_prop = stream.next_u01();
    const double u_accept = stream.next_u01();
    const auto& spec = model.inputs.sigma_spec[c];
    const double x = current.sigma[c];
    bool accept;
    double x_new;
    if (spec.kind == dist_kind::uniform) {
      // Flat density: the ratio is 1 inside the support and 0 outside.
      x_new = x + proposal_spread[c] * (2.0 * u_prop - 1.0);
      accept = x_new >= spec.p0 && x_new <= spec.p1;
    } else {
      // Walk in standard-normal space, where the marginal is phi(u).
      const double u = spec.to_std_normal(x);
      const double u_new = u + proposal_spread[c] * (2.0 * u_prop - 1.0);
      accept = u_accept <= std::exp(0.5 * (u * u - u_new * u_new));
      x_new = accept ? spec.from_std_normal(u_new) : x;
    }
    candidate[c] = accept ? x_new : x;
    moved = moved || accept;
  }

  // All components rejected: the chain repeats without touching the model.
  if (!moved) return next;

  const double chi = eval_chi(model, candidate);
  if (chi > level_threshold) {
    next.sigma = std::move(candidate);
    next.chi = chi;
  }
  return next;
}

LevelStats estimate_level_stats(std::span<const ChainSample> level_samples, double next_threshold, std::int64_t N) {
  if (level_samples.empty()) throw std::invalid_argument("estimate_level_stats: empty level");
  LevelStats out;
  for (const auto& s : level_samples)
    if (s.chi > next_threshold) ++out.count_above;
  const double P = static_cast<double>(out.count_above) / static_cast<double>(N);
  out.cond_prob = P;

  const bool iid = level_samples.front().level == 0;
  if (!iid) {
    // Lag-weighted intra-chain autocorrelation of the exceedance indicator,
    // averaged over chains: gamma = 2 sum_l (pairs_l / N) * rho_l.
    std::vector<std::pair<std::size_t, std::size_t>> chains;  // [begin, end)
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= level_samples.size(); ++i) {
      if (i == level_samples.size() || level_samples[i].chain_id != level_samples[begin].chain_id) {
        chains.emplace_back(begin, i);
        begin = i;
      }
    }
    if (chains.size() < 2)
      throw gamma_undefined("estimate_level_stats: single-chain level " +
                            std::to_string(level_samples.front().level) + " has no correlation estimate");
    const double R0 = P * (1.0 - P);
    if (R0 > 0.0) {
      std::size_t max_len = 0;
      for (const auto& [b, e] : chains) max_len = std::max(max_len, e - b);
      std::vector<std::uint8_t> ind(level_samples.size());
      for (std::size_t i = 0; i < level_samples.size(); ++i) ind[i] = level_samples[i].chi > next_threshold ? 1 : 0;
      double gamma = 0.0;
      for (std::size_t lag = 1; lag < max_len; ++lag) {
        std::int64_t pairs = 0;
        std::int64_t hits = 0;
        for (const auto& [b, e] : chains) {
          if (e - b <= lag) continue;
          pairs += static_cast<std::int64_t>(e - b - lag);
          for (std::size_t k = b; k + lag < e; ++k) hits += ind[k] & ind[k + lag];
        }
        if (pairs == 0) break;
        const double R_l = static_cast<double>(hits) / static_cast<double>(pairs) - P * P;
        gamma += 2.0 * (static_cast<double>(pairs) / static_cast<double>(N)) * (R_l / R0);
      }
      out.gamma = gamma;
    }
  }
  out.delta = std::sqrt((1.0 - P) * std::max(0.0, 1.0 + out.gamma) / (static_cast<double>(N) * P));
  return out;
}

std::vector<double> strata_prob_cov(std::span<const double> delta, std::span<const double> cond_probs,
                                    std::int64_t N) {
  if (delta.size() != cond_probs.size()) throw std::invalid_argument("strata_prob_cov: size mismatch");
  const int m = static_cast<int>(delta.size()) + 1;
  std::vector<double> cov(static_cast<std::size_t>(m) * m, 0.0);
  if (m == 1) return cov;

  // PF[i] = P(F_i), cum[i] = sum_{k<=i} delta_k^2, both with PF[0] = 1,
  // cum[0] = 0; P(S_i) = PF[i-1](1 - P_i) for i < m and PF[m-1] for i = m.
  std::vector<double> PF(m, 1.0), cum(m, 0.0), PS(m + 1, 0.0);
  for (int i = 1; i < m; ++i) {
    PF[i] = PF[i - 1] * cond_probs[i - 1];
    cum[i] = cum[i - 1] + delta[i - 1] * delta[i - 1];
  }
  for (int i = 1; i < m; ++i) PS[i] = PF[i - 1] * (1.0 - cond_probs[i - 1]);
  PS[m] = PF[m - 1];

  auto at = [&](int i, int j) -> double& { return cov[static_cast<std::size_t>(i - 1) * m + (j - 1)]; };

  at(1, 1) = PF[1] * (1.0 - PF[1]) / static_cast<double>(N);
  for (int i = 2; i < m; ++i) {
    const double Pi = cond_probs[i - 1];
    // Algebraically PF[i-1]^2 (delta_sum (1 - P_i)^2 + P_i^2 delta_i^2) >= 0;
    // the grouped form avoids the cancellation in (1 - 2 P_i).
    at(i, i) = PF[i - 1] * PF[i - 1] *
               (cum[i - 1] * (1.0 - Pi) * (1.0 - Pi) + Pi * Pi * delta[i - 1] * delta[i - 1]);
  }
  if (m >= 2) at(m, m) = PF[m - 1] * PF[m - 1] * cum[m - 1];

  for (int i = 1; i < m; ++i) {
    const double Pi = cond_probs[i - 1];
    const double di2 = delta[i - 1] * delta[i - 1];
    const double xi_head = Pi - Pi * Pi * (di2 + 1.0);
    for (int j = i + 1; j <= m; ++j) {
      double xi = xi_head;
      for (int k = i + 1; k <= j - 1; ++k) xi *= cond_probs[k - 1];
      double c = xi * PF[i - 1] * PF[i - 1] * (1.0 + cum[i - 1]);
      if (j < m) c *= 1.0 - cond_probs[j - 1];
      const double value = c - PS[i] * PS[j];
      at(i, j) = value;
      at(j, i) = value;
    }
  }
  return cov;
}

PhaseIResult run_phase1_sus(const ModelHandle& model, std::int64_t N, int m, double p, std::uint64_t seed,
                            const std::vector<double>* fixed_thresholds, int workers) {
  if (m < 2) throw std::invalid_argument("run_phase1_sus: need at least two strata");
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("run_phase1_sus: p must lie in (0,1)");
  if (N < 2) throw std::invalid_argument("run_phase1_sus: per-level count too small");
  const std::int64_t rank = quantile_rank(N, p);
  if (!fixed_thresholds && N - rank < 2)
    throw std::invalid_argument("run_phase1_sus: p*N must provide at least two seeds per level");
  if (fixed_thresholds) {
    if (static_cast<int>(fixed_thresholds->size()) != m - 1)
      throw std::invalid_argument("run_phase1_sus: fixed thresholds must number m-1");
    require_increasing(*fixed_thresholds, "run_phase1_sus");
  }

  const std::vector<double> spread = default_proposal_spread(model);

  PhaseIResult result;
  result.N = N;
  result.seed = seed;
  result.samples.assign(m, {});
  StratumSet& ss = result.strata;
  ss.mode = sampling_mode::sus;
  ss.m = m;
  ss.p = p;
  ss.thresholds.assign(m + 1, 0.0);
  ss.thresholds.front() = model.chi_lower;
  ss.thresholds.back() = kInf;
  ss.delta.assign(m - 1, 0.0);
  ss.gamma.assign(m - 1, 0.0);
  ss.cond_probs.assign(m - 1, 0.0);

  // Level 0: plain MC with sigma banked (chain seeds need the vectors).
  std::vector<ChainSample> current(N);
  {
    std::vector<double> chi(N);
    std::vector<std::vector<double>> bank;
    mc_chi_sweep(model, seed, N, chi, &bank, workers, exec::openmp);
    for (std::int64_t i = 0; i < N; ++i) {
      current[i].sigma = std::move(bank[i]);
      current[i].chi = chi[i];
      current[i].chain_id = -1;
      current[i].state_index = 0;
      current[i].level = 0;
      current[i].mc_index = i;
    }
  }

  std::vector<long double> cond_ld(m - 1, 0.0L);

  for (int level = 0; level + 1 < m; ++level) {
    const int stratum = level + 1;
    double threshold;
    std::vector<std::int64_t> banked, seeds;
    if (!fixed_thresholds) {
      const auto order = order_by_chi(current);
      threshold = current[order[rank - 1]].chi;
      banked.assign(order.begin(), order.begin() + rank);
      seeds.assign(order.begin() + rank, order.end());
      std::sort(banked.begin(), banked.end());
    } else {
      threshold = (*fixed_thresholds)[level];
      for (std::int64_t i = 0; i < N; ++i)
        (current[i].chi <= threshold ? banked : seeds).push_back(i);
      if (seeds.empty())
        throw level_extinction("run_phase1_sus: no samples above fixed threshold " + std::to_string(threshold),
                               stratum);
      if (banked.empty())
        throw under_populated_stratum("run_phase1_sus: fixed threshold leaves stratum " + std::to_string(stratum) +
                                          " empty",
                                      stratum);
    }
    ss.thresholds[stratum] = threshold;

    LevelStats stats = estimate_level_stats(current, threshold, N);
    if (!fixed_thresholds) {
      // Adaptive splits are by rank: the conditional probability is the seed
      // fraction by construction, independent of duplicate states at the cut.
      stats.cond_prob = static_cast<double>(N - rank) / static_cast<double>(N);
      stats.delta = std::sqrt((1.0 - stats.cond_prob) * std::max(0.0, 1.0 + stats.gamma) /
                              (static_cast<double>(N) * stats.cond_prob));
      cond_ld[level] = static_cast<long double>(N - rank) / static_cast<long double>(N);
    } else {
      cond_ld[level] = static_cast<long double>(seeds.size()) / static_cast<long double>(N);
    }
    ss.cond_probs[level] = stats.cond_prob;
    ss.delta[level] = stats.delta;
    ss.gamma[level] = stats.gamma;

    result.samples[stratum - 1].reserve(banked.size());
    for (std::int64_t idx : banked) {
      current[idx].stratum = stratum;
      result.samples[stratum - 1].push_back(std::move(current[idx]));
    }

    // Seeds spawn the next level's chains; the shuffle decorrelates chain
    // length (N is not always divisible by the seed count) from chi rank.
    const auto n_seeds = static_cast<std::int64_t>(seeds.size());
    RngStream perm_stream(seed, {rng_domain::seed_perm, static_cast<uint32_t>(stratum), 0, 0, 0});
    const auto perm = random_permutation(perm_stream, static_cast<uint32_t>(n_seeds));
    std::vector<std::vector<ChainSample>> chains(n_seeds);
    std::vector<std::int64_t> lengths(n_seeds);
    const std::int64_t base = N / n_seeds;
    const std::int64_t rem = N % n_seeds;
    for (std::int64_t j = 0; j < n_seeds; ++j) {
      ChainSample s = std::move(current[seeds[perm[j]]]);
      s.level = stratum;
      s.chain_id = static_cast<int>(j);
      s.state_index = 0;
      s.stratum = 0;
      s.mc_index = -1;
      chains[j].push_back(std::move(s));
      lengths[j] = base + (j < rem ? 1 : 0);
    }
    advance_level_chains(model, seed, spread, threshold, chains, lengths, workers, exec::openmp);

    current.clear();
    current.reserve(N);
    for (auto& chain : chains)
      for (auto& s : chain) current.push_back(std::move(s));
  }

  for (auto& s : current) s.stratum = m;
  result.samples[m - 1] = std::move(current);

  // Strata probabilities as extended-precision products of per-level count
  // ratios, rounded to double once each.
  ss.probs.resize(m);
  long double pf = 1.0L;
  for (int i = 1; i < m; ++i) {
    ss.probs[i - 1] = static_cast<double>(pf * (1.0L - cond_ld[i - 1]));
    pf *= cond_ld[i - 1];
  }
  ss.probs[m - 1] = static_cast<double>(pf);

  ss.prob_cov = strata_prob_cov(ss.delta, ss.cond_probs, N);

  result.n_hat = 0;
  for (const auto& bank : result.samples) result.n_hat += static_cast<std::int64_t>(bank.size());
  return result;
}

}  // namespace strat
