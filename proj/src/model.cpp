#include "strat/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "strat/benchmarks.hpp"
#include "strat/errors.hpp"

namespace strat {

double eval_chi(const ModelHandle& model, std::span<const double> sigma) {
  if (static_cast<int>(sigma.size()) != model.sigma_dim())
    throw std::invalid_argument("eval_chi: sigma dimension mismatch for model " + model.name);
  const double chi = model.chi_fn(sigma);
  if (!std::isfinite(chi)) throw model_evaluation_error("eval_chi: non-finite chi from model " + model.name);
  return chi;
}

bool eval_indicators(const ModelHandle& model, std::span<const double> sigma, std::span<const double> tau,
                     std::span<double> responses, std::span<uint8_t> indicators) {
  if (static_cast<int>(sigma.size()) != model.sigma_dim() || static_cast<int>(tau.size()) != model.tau_dim())
    throw std::invalid_argument("eval_indicators: input dimension mismatch for model " + model.name);
  if (model.limit_states.empty()) throw std::invalid_argument("eval_indicators: model has no limit states");
  model.response_fn(sigma, tau, responses);
  bool finite = true;
  for (double r : responses)
    if (!std::isfinite(r)) finite = false;
  for (std::size_t h = 0; h < model.limit_states.size(); ++h) {
    const auto& ls = model.limit_states[h];
    indicators[h] = finite ? (responses[ls.response_index] > ls.threshold ? 1 : 0) : 1;
  }
  return finite;
}

ModelHandle make_model(const std::string& name, const std::map<std::string, std::string>& params) {
  if (name == "toy2d") return make_toy2d(params);
  if (name == "gm-sdof") return make_gm_sdof(params);
  throw std::invalid_argument("unknown model '" + name + "' (available: toy2d, gm-sdof)");
}

}  // namespace strat
