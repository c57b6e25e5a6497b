#include "strat/kernels.hpp"

#include <omp.h>

#include <stdexcept>
#include <string>

#include "strat/errors.hpp"

namespace strat {

namespace {

// Exceptions cannot cross an OpenMP region; sweeps record the first failure
// (lowest sample index) and rethrow it after the loop.
struct ErrorCapture {
  bool failed = false;
  std::int64_t index = -1;
  std::string what;

  void record(std::int64_t i, const std::exception& e) {
#pragma omp critical(strat_kernel_error)
    {
      if (!failed || i < index) {
        failed = true;
        index = i;
        what = e.what();
      }
    }
  }
  void rethrow() const {
    if (failed) throw model_evaluation_error(what + " (sample " + std::to_string(index) + ")", index);
  }
};

int resolve_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

}  // namespace

void regen_sigma(const ModelHandle& model, std::uint64_t seed, std::int64_t mc_index, std::span<double> out) {
  const auto& specs = model.inputs.sigma_spec;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    RngStream stream(seed, {rng_domain::mc_sigma, 0, 0, static_cast<uint32_t>(mc_index), static_cast<uint32_t>(c)});
    out[c] = specs[c].sample(stream);
  }
}

void mc_chi_sweep(const ModelHandle& model, std::uint64_t seed, std::int64_t n, std::span<double> chi_out,
                  std::vector<std::vector<double>>* sigma_bank, int workers, exec policy) {
  if (static_cast<std::int64_t>(chi_out.size()) != n) throw std::invalid_argument("mc_chi_sweep: bad output size");
  if (sigma_bank) sigma_bank->assign(n, {});
  const int dim = model.sigma_dim();
  ErrorCapture err;

  auto body = [&](std::int64_t i) {
    try {
      std::vector<double> sigma(dim);
      regen_sigma(model, seed, i, sigma);
      chi_out[i] = eval_chi(model, sigma);
      if (sigma_bank) (*sigma_bank)[i] = std::move(sigma);
    } catch (const std::exception& e) {
      err.record(i, e);
    }
  };

  if (policy == exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }
  err.rethrow();
}

void advance_level_chains(const ModelHandle& model, std::uint64_t seed, std::span<const double> proposal_spread,
                          double level_threshold, std::vector<std::vector<ChainSample>>& chains,
                          std::span<const std::int64_t> lengths, int workers, exec policy) {
  if (chains.size() != lengths.size()) throw std::invalid_argument("advance_level_chains: length list mismatch");
  const auto n_chains = static_cast<std::int64_t>(chains.size());
  ErrorCapture err;

  auto body = [&](std::int64_t j) {
    try {
      auto& chain = chains[j];
      chain.reserve(lengths[j]);
      while (static_cast<std::int64_t>(chain.size()) < lengths[j])
        chain.push_back(mmh_step(model, chain.back(), proposal_spread, level_threshold, seed));
    } catch (const std::exception& e) {
      err.record(j, e);
    }
  };

  if (policy == exec::serial) {
    for (std::int64_t j = 0; j < n_chains; ++j) body(j);
  } else {
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
    for (std::int64_t j = 0; j < n_chains; ++j) body(j);
  }
  err.rethrow();
}

EvalSweepResult response_sweep(const ModelHandle& model, std::uint64_t seed, std::span<const EvalItem> items,
                               int workers, exec policy) {
  EvalSweepResult out;
  out.count = static_cast<std::int64_t>(items.size());
  out.response_dim = model.response_dim;
  out.limit_state_count = static_cast<int>(model.limit_states.size());
  out.responses.assign(out.count * out.response_dim, 0.0);
  out.indicators.assign(out.count * out.limit_state_count, 0);
  out.finite.assign(out.count, 1);
  const int sdim = model.sigma_dim();
  const int tdim = model.tau_dim();
  ErrorCapture err;

  auto body = [&](std::int64_t i) {
    try {
      const EvalItem& item = items[i];
      std::vector<double> sigma_store;
      std::span<const double> sigma;
      if (!item.sample->sigma.empty()) {
        sigma = item.sample->sigma;
      } else {
        sigma_store.resize(sdim);
        regen_sigma(model, seed, item.sample->mc_index, sigma_store);
        sigma = sigma_store;
      }
      std::vector<double> tau(tdim);
      for (int c = 0; c < tdim; ++c) {
        RngStream stream(seed, {rng_domain::tau_draw, static_cast<uint32_t>(item.stratum), 0,
                                static_cast<uint32_t>(item.slot), static_cast<uint32_t>(c)});
        tau[c] = model.inputs.tau_spec[c].sample(stream);
      }
      std::span<double> resp(out.responses.data() + i * out.response_dim, out.response_dim);
      std::span<std::uint8_t> ind(out.indicators.data() + i * out.limit_state_count, out.limit_state_count);
      if (!eval_indicators(model, sigma, tau, resp, ind)) out.finite[i] = 0;
    } catch (const std::exception& e) {
      err.record(i, e);
    }
  };

  if (policy == exec::serial) {
    for (std::int64_t i = 0; i < out.count; ++i) body(i);
  } else {
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
    for (std::int64_t i = 0; i < out.count; ++i) body(i);
  }
  err.rethrow();
  return out;
}

}  // namespace strat
