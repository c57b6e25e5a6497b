// Two-dimensional illustration model: chi = sigma^3 with sigma ~ N(5,1),
// response g = 200 sin(tau) + 3 sigma^3 with tau ~ U(0,10). Failure when g
// exceeds a threshold (1500 by default). The analytic tail of chi and a
// quadrature oracle for the failure probability make this the workhorse of
// the statistical test suite.

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "strat/benchmarks.hpp"

namespace strat {

namespace {

std::vector<double> parse_thresholds(const std::map<std::string, std::string>& params) {
  auto it = params.find("thresholds");
  if (it == params.end()) return {1500.0};
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw std::invalid_argument("toy2d: empty thresholds list");
  return out;
}

}  // namespace

ModelHandle make_toy2d(const std::map<std::string, std::string>& params) {
  ModelHandle m;
  m.name = "toy2d";
  m.inputs.sigma_spec = {DistributionSpec::normal(5.0, 1.0)};
  m.inputs.tau_spec = {DistributionSpec::uniform(0.0, 10.0)};
  m.response_dim = 1;
  m.cost_chi_hint = 5e-9;
  m.cost_response_hint = 2e-8;
  m.chi_fn = [](std::span<const double> sigma) {
    const double s = sigma[0];
    return s * s * s;
  };
  m.response_fn = [](std::span<const double> sigma, std::span<const double> tau, std::span<double> out) {
    const double s = sigma[0];
    out[0] = 200.0 * std::sin(tau[0]) + 3.0 * s * s * s;
  };
  for (double thr : parse_thresholds(params)) {
    std::ostringstream id;
    id << "g" << thr;
    m.limit_states.push_back({id.str(), 0, thr});
  }
  return m;
}

// Analytic tail of the stratification variable: P(chi > v) with chi = sigma^3.
double toy2d_chi_tail(double v) {
  const double c = std::cbrt(v);
  return 0.5 * std::erfc((c - 5.0) * 0.7071067811865475244);
}

namespace {

// P(g > thr | tau): sigma^3 must exceed (thr - 200 sin tau) / 3.
double tail_given_tau(double tau, double thr) {
  return toy2d_chi_tail((thr - 200.0 * std::sin(tau)) / 3.0);
}

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(double a, double fa, double m, double fm, double b, double fb, double whole, double tol, double thr,
             int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = tail_given_tau(lm, thr);
  const double frm = tail_given_tau(rm, thr);
  const double left = simpson(a, fa, flm, m, fm);
  const double right = simpson(m, fm, frm, b, fb);
  const double err = left + right - whole;
  if (depth <= 0 || std::fabs(err) < 15.0 * tol) return left + right + err / 15.0;
  return adapt(a, fa, lm, flm, m, fm, left, 0.5 * tol, thr, depth - 1) +
         adapt(m, fm, rm, frm, b, fb, right, 0.5 * tol, thr, depth - 1);
}

}  // namespace

double toy_oracle(double threshold) {
  // Average P(g > thr | tau) over tau ~ U(0, 10), one panel per unit of tau
  // so the sinusoid can't alias through the initial Simpson estimate.
  double total = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double a = k;
    const double b = k + 1.0;
    const double m = 0.5 * (a + b);
    const double fa = tail_given_tau(a, threshold);
    const double fm = tail_given_tau(m, threshold);
    const double fb = tail_given_tau(b, threshold);
    total += adapt(a, fa, m, fm, b, fb, simpson(a, fa, fm, b, fb), 1e-13, threshold, 40);
  }
  return total / 10.0;
}

}  // namespace strat
