#include "strat/allocate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "strat/errors.hpp"
#include "strat/kernels.hpp"

namespace strat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// kappa_h(n)^2 * pf_h^2 = base_h + sum_i slope_ih / n_i for both modes; the
// decomposition makes greedy probing O(1) per stratum.
struct KappaModel {
  std::vector<double> base;                 // [h]
  std::vector<std::vector<double>> slope;   // [h][i]
  std::vector<double> pf_overall;           // [h]

  double kappa(int h, std::span<const std::int64_t> n) const {
    double v = base[h];
    for (std::size_t i = 0; i < slope[h].size(); ++i) v += slope[h][i] / static_cast<double>(n[i]);
    return std::sqrt(std::max(0.0, v)) / pf_overall[h];
  }
};

KappaModel build_kappa_model(const UnitVarianceTable& table, const StratumSet& strata,
                             std::span<const std::int64_t> caps) {
  const int H = table.limit_state_count();
  const int m = strata.m;
  KappaModel km;
  km.base.assign(H, 0.0);
  km.slope.assign(H, std::vector<double>(m, 0.0));
  km.pf_overall.assign(H, 0.0);
  const std::int64_t n_hat = std::accumulate(caps.begin(), caps.end(), std::int64_t{0});
  for (int h = 0; h < H; ++h) {
    double pf_h = 0.0;
    for (int i = 0; i < m; ++i) pf_h += table.pf[h][i] * strata.probs[i];
    km.pf_overall[h] = pf_h;
    if (pf_h == 0.0) continue;
    if (strata.mode == sampling_mode::sus) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) km.base[h] += table.pf[h][i] * table.pf[h][j] * strata.cov(i, j);
        const double unit = table.pf[h][i] * (1.0 - table.pf[h][i]) * table.psi[h][i];
        km.slope[h][i] = unit * (strata.cov(i, i) + strata.probs[i] * strata.probs[i]);
      }
    } else {
      double base = pf_h * (1.0 - pf_h);
      for (int i = 0; i < m; ++i) {
        const double unit = table.pf[h][i] * (1.0 - table.pf[h][i]);
        base -= strata.probs[i] * unit;
        km.slope[h][i] =
            strata.probs[i] * unit * static_cast<double>(caps[i]) / static_cast<double>(n_hat);
      }
      km.base[h] = base / static_cast<double>(n_hat);
    }
  }
  return km;
}

}  // namespace

UnitVarianceTable preliminary_study(const PhaseIResult& phase1, const ModelHandle& model, std::int64_t n_p,
                                    std::uint64_t seed, int workers, EvalSweepResult* sweep_out) {
  if (n_p < 2) throw std::invalid_argument("preliminary_study: n_p must be at least 2");
  const int m = phase1.strata.m;
  for (int i = 0; i < m; ++i) {
    if (n_p > phase1.stratum_size(i))
      throw std::invalid_argument("preliminary_study: n_p exceeds the bank of stratum " + std::to_string(i + 1));
  }
  std::vector<std::int64_t> allocation(m, n_p);
  const PhaseIISelection sel = select_phase2(phase1, allocation, seed);

  std::vector<EvalItem> items;
  items.reserve(static_cast<std::size_t>(m) * n_p);
  for (int i = 0; i < m; ++i) {
    for (std::int64_t s = 0; s < n_p; ++s)
      items.push_back({&phase1.samples[i][sel.ids[i][s]], i + 1, s});
  }
  const EvalSweepResult sweep = response_sweep(model, seed, items, workers, exec::openmp);
  if (sweep_out) *sweep_out = sweep;

  const int H = sweep.limit_state_count;
  UnitVarianceTable table;
  table.n_p = n_p;
  for (const auto& ls : model.limit_states) table.limit_state_ids.push_back(ls.id);
  table.pf.assign(H, std::vector<double>(m, 0.0));
  table.psi.assign(H, std::vector<double>(m, 1.0));
  table.cardinal.assign(H, std::vector<std::uint8_t>(m, 0));

  std::vector<std::uint8_t> column(n_p);
  std::vector<SampleLineage> lineage(n_p);
  for (int i = 0; i < m; ++i) {
    const std::int64_t offset = static_cast<std::int64_t>(i) * n_p;
    for (std::int64_t s = 0; s < n_p; ++s) {
      const ChainSample& cs = *items[offset + s].sample;
      lineage[s] = {cs.chain_id, cs.state_index};
    }
    const bool iid = phase1.strata.mode == sampling_mode::mc || i == 0;
    for (int h = 0; h < H; ++h) {
      for (std::int64_t s = 0; s < n_p; ++s)
        column[s] = sweep.indicators[(offset + s) * H + h];
      const StratumEstimate est = conditional_failure_prob(column, lineage, iid);
      table.pf[h][i] = est.pf;
      table.psi[h][i] = est.psi;
      table.cardinal[h][i] = est.cardinal ? 1 : 0;
    }
  }
  return table;
}

std::int64_t AllocationPlan::total() const { return std::accumulate(n.begin(), n.end(), std::int64_t{0}); }

std::vector<double> feasibility_floor(const UnitVarianceTable& table, const StratumSet& strata,
                                      std::span<const std::int64_t> caps) {
  const KappaModel km = build_kappa_model(table, strata, caps);
  std::vector<double> floor_kappa(table.limit_state_count(), kNaN);
  for (int h = 0; h < table.limit_state_count(); ++h)
    if (km.pf_overall[h] > 0.0) floor_kappa[h] = km.kappa(h, caps);
  return floor_kappa;
}

double predicted_kappa(const UnitVarianceTable& table, const StratumSet& strata, int h,
                       std::span<const std::int64_t> n, std::span<const std::int64_t> caps) {
  const KappaModel km = build_kappa_model(table, strata, caps);
  if (km.pf_overall[h] == 0.0) return kNaN;
  return km.kappa(h, n);
}

AllocationPlan optimal_allocation(const UnitVarianceTable& table, const StratumSet& strata,
                                  std::span<const double> targets, std::span<const std::int64_t> caps,
                                  std::int64_t floor, std::int64_t block) {
  const int H = table.limit_state_count();
  const int m = strata.m;
  if (static_cast<int>(targets.size()) != H) throw std::invalid_argument("optimal_allocation: one target per limit state");
  if (static_cast<int>(caps.size()) != m) throw std::invalid_argument("optimal_allocation: one cap per stratum");
  if (block < 1) throw std::invalid_argument("optimal_allocation: block must be positive");
  for (double w : targets)
    if (!(w > 0.0)) throw std::invalid_argument("optimal_allocation: targets must be positive");
  for (int i = 0; i < m; ++i) {
    if (caps[i] < floor)
      throw std::invalid_argument("optimal_allocation: cap of stratum " + std::to_string(i + 1) +
                                  " lies below the floor");
  }

  const KappaModel km = build_kappa_model(table, strata, caps);

  AllocationPlan plan;
  plan.targets.assign(targets.begin(), targets.end());
  plan.n.assign(m, floor);
  plan.feasible.assign(H, 1);
  plan.no_failures.assign(H, 0);
  plan.floor_kappa.assign(H, kNaN);
  plan.cardinal_strata.assign(m, 0);
  for (int i = 0; i < m; ++i) {
    for (int h = 0; h < H; ++h)
      if (table.cardinal[h][i]) plan.cardinal_strata[i] = 1;
  }

  // Working targets: unattainable ones are replaced by the value reached at
  // the caps, so the solver still drives those constraints as far as the
  // bank allows instead of cycling.
  std::vector<double> work_targets(H, 0.0);
  std::vector<int> active;
  for (int h = 0; h < H; ++h) {
    if (km.pf_overall[h] == 0.0) {
      plan.no_failures[h] = 1;
      plan.feasible[h] = 0;
      plan.all_feasible = false;
      continue;
    }
    plan.floor_kappa[h] = km.kappa(h, caps);
    work_targets[h] = targets[h];
    if (plan.floor_kappa[h] > targets[h]) {
      plan.feasible[h] = 0;
      plan.all_feasible = false;
      work_targets[h] = plan.floor_kappa[h];
    }
    active.push_back(h);
  }

  auto violation = [&](std::span<const std::int64_t> n) {
    double v = 0.0;
    for (int h : active) {
      const double excess = km.kappa(h, n) - work_targets[h];
      if (excess > 0.0) v += excess * excess;
    }
    return v;
  };

  double current = violation(plan.n);
  std::vector<std::int64_t> probe(plan.n.begin(), plan.n.end());
  while (current > 0.0) {
    int best = -1;
    double best_drop = 0.0;
    for (int i = 0; i < m; ++i) {
      const std::int64_t next = std::min(plan.n[i] + block, caps[i]);
      if (next == plan.n[i]) continue;
      probe[i] = next;
      const double drop = current - violation(probe);
      probe[i] = plan.n[i];
      if (best < 0 || drop > best_drop) {
        best = i;
        best_drop = drop;
      }
    }
    if (best < 0) break;  // every stratum at its cap
    plan.n[best] = std::min(plan.n[best] + block, caps[best]);
    probe[best] = plan.n[best];
    current = violation(plan.n);
  }

  // Trim to the single-decrement certificate: no n_i can lose a sample
  // without violating a working target or the floor.
  bool trimmed = true;
  while (trimmed) {
    trimmed = false;
    for (int i = 0; i < m; ++i) {
      while (plan.n[i] > floor) {
        probe[i] = plan.n[i] - 1;
        if (violation(probe) > 0.0) {
          probe[i] = plan.n[i];
          break;
        }
        plan.n[i] -= 1;
        trimmed = true;
      }
      probe[i] = plan.n[i];
    }
  }

  plan.kappa.assign(H, kNaN);
  for (int h = 0; h < H; ++h)
    if (!plan.no_failures[h]) plan.kappa[h] = km.kappa(h, plan.n);
  return plan;
}

}  // namespace strat
