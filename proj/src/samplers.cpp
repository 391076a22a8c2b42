#include "pmp/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pmp/errors.hpp"
#include "pmp/parallel.hpp"
#include "pmp/perturbation.hpp"

namespace pmp {

void SamplerSpec::validate() const {
  if (sweeps == 0) throw ParameterError("sampler needs at least one sweep");
  if (chains == 0) throw ParameterError("sampler needs at least one chain");
  check_damping(damping);
}

Assignment PmpSampler::sample(std::span<const double> unaries, std::span<const double> eps,
                              const PmpOptions& options) const {
  const auto perturbed = perturb(unaries, eps);
  auto state = zero_messages(mg_);
  run_sweeps(mg_, perturbed, state, {options.damping, options.sweeps});
  return decode(mg_, state, perturbed);
}

Assignment PmpSampler::sample(std::span<const double> unaries, const PmpOptions& options, Rng& rng) const {
  const auto eps = draw_gumbel(unaries.size(), rng);
  return sample(unaries, eps, options);
}

Assignment pmp_sample(const FactorGraph& g, std::size_t sweeps, Rng& rng, double damping) {
  PmpSampler sampler(g);
  return sampler.sample(g.unaries(), {sweeps, damping}, rng);
}

Assignment pmp_posterior_sample(const FactorGraph& g, const Evidence& evidence, std::size_t sweeps, Rng& rng,
                                double damping) {
  const FactorGraph clamped = clamp(g, evidence);
  Assignment x = pmp_sample(clamped, sweeps, rng, damping);
  for (const auto& obs : evidence) x[obs.var] = obs.state;
  return x;
}

SampleSet pmp_sample_chains(const FactorGraph& g, std::size_t chains, const PmpOptions& options, std::uint64_t seed,
                            std::uint64_t step) {
  PmpSampler sampler(g);
  SampleSet out(g.num_variables(), "pmp");
  out.resize(chains);
  parallel_for(chains, [&](std::size_t k) {
    Rng rng(seed, {k, step});
    const auto x = sampler.sample(g.unaries(), options, rng);
    std::copy(x.begin(), x.end(), out.row(k).begin());
  });
  return out;
}

std::int32_t sample_categorical(std::span<const double> log_weights, Rng& rng) {
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - mx);
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= std::exp(log_weights[k] - mx);
    if (u <= 0.0) return static_cast<std::int32_t>(k);
  }
  // Rounding: return the last state with non-negligible mass.
  for (std::size_t k = log_weights.size(); k-- > 0;)
    if (log_weights[k] - mx > -700.0) return static_cast<std::int32_t>(k);
  return 0;
}

void conditional_log_weights(const FactorGraph& g, std::span<const std::int32_t> x, std::size_t var,
                             std::vector<double>& out) {
  const auto card = g.cardinality(var);
  const auto u = g.unary(var);
  out.assign(u.begin(), u.end());
  std::vector<std::int32_t> states;
  std::vector<std::int32_t> cards;
  for (const auto& [f, slot] : g.adjacent(var)) {
    const auto& fac = g.factor(f);
    states.resize(fac.vars.size());
    cards.resize(fac.vars.size());
    for (std::size_t k = 0; k < fac.vars.size(); ++k) {
      states[k] = x[fac.vars[k]];
      cards[k] = g.cardinality(fac.vars[k]);
    }
    for (std::int32_t c = 0; c < card; ++c) {
      states[slot] = c;
      out[static_cast<std::size_t>(c)] += factor_log_potential(fac, states, cards);
    }
  }
}

void gibbs_sweep_inplace(const FactorGraph& g, std::span<std::int32_t> x, Rng& rng, ScanOrder order) {
  const std::size_t n = g.num_variables();
  std::vector<double> logw;
  if (order == ScanOrder::Fixed) {
    for (std::size_t i = 0; i < n; ++i) {
      conditional_log_weights(g, x, i, logw);
      x[i] = sample_categorical(logw, rng);
    }
    return;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = n; k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
  for (auto i : perm) {
    conditional_log_weights(g, x, i, logw);
    x[i] = sample_categorical(logw, rng);
  }
}

Assignment gibbs_sweep(const FactorGraph& g, Assignment x, Rng& rng, ScanOrder order) {
  validate_assignment(g, x);
  gibbs_sweep_inplace(g, x, rng, order);
  return x;
}

Assignment uniform_assignment(const FactorGraph& g, Rng& rng) {
  Assignment x(g.num_variables());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(g.cardinality(i))));
  return x;
}

SampleSet gibbs_sample_chains(const FactorGraph& g, std::size_t chains, std::size_t sweeps, std::uint64_t seed,
                              std::uint64_t step) {
  SampleSet out(g.num_variables(), "gibbs");
  out.resize(chains);
  parallel_for(chains, [&](std::size_t k) {
    Rng rng(seed, {k, step});
    auto x = uniform_assignment(g, rng);
    for (std::size_t t = 0; t < sweeps; ++t) gibbs_sweep_inplace(g, x, rng);
    std::copy(x.begin(), x.end(), out.row(k).begin());
  });
  return out;
}

}  // namespace pmp
