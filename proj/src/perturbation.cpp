#include "pmp/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmp/errors.hpp"

namespace pmp {

namespace {

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1], got " + std::to_string(rho));
}

}  // namespace

double gumbel_inverse_cdf(double u) { return -kEulerGamma - std::log(-std::log(u)); }

double gumbel_cdf(double x) { return std::exp(-std::exp(-(x + kEulerGamma))); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double gumbel_from_normal(double z) {
  // -log(Phi(z)), evaluated through the upper tail when Phi(z) is close to 1.
  double neg_log_u;
  if (z < 0.0) {
    const double u = std::max(normal_cdf(z), 1e-300);
    neg_log_u = -std::log(u);
  } else {
    const double q = std::max(0.5 * std::erfc(z / std::sqrt(2.0)), 1e-16);
    neg_log_u = -std::log1p(-q);
  }
  return -kEulerGamma - std::log(neg_log_u);
}

void draw_gumbel_into(std::span<double> out, Rng& rng) {
  for (auto& e : out) e = gumbel_inverse_cdf(rng.uniform());
}

std::vector<double> draw_gumbel(std::size_t count, Rng& rng) {
  std::vector<double> eps(count);
  draw_gumbel_into(eps, rng);
  return eps;
}

std::vector<double> perturb(std::span<const double> unaries, std::span<const double> eps) {
  if (unaries.size() != eps.size())
    throw StructuralError("perturbation has " + std::to_string(eps.size()) + " entries, unaries have " +
                          std::to_string(unaries.size()));
  std::vector<double> out(unaries.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = unaries[k] + eps[k];
  return out;
}

PersistentPerturbationState PersistentPerturbationState::init(std::size_t count, double rho, Rng& rng) {
  check_rho(rho);
  PersistentPerturbationState s;
  s.rho = rho;
  s.gamma.resize(count);
  for (auto& g : s.gamma) g = rng.normal();
  return s;
}

std::vector<double> persistent_step(PersistentPerturbationState& state, Rng& rng) {
  check_rho(state.rho);
  const double keep = std::sqrt(state.rho);
  const double fresh = std::sqrt(1.0 - state.rho);
  std::vector<double> eps(state.gamma.size());
  for (std::size_t k = 0; k < eps.size(); ++k) {
    // Draw delta even when rho == 1 so streams stay aligned across rho values.
    const double delta = rng.normal();
    state.gamma[k] = keep * state.gamma[k] + fresh * delta;
    eps[k] = gumbel_from_normal(state.gamma[k]);
  }
  return eps;
}

}  // namespace pmp
