#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "pmp/factor_graph.hpp"
#include "pmp/max_product.hpp"
#include "pmp/rng.hpp"
#include "pmp/sample_set.hpp"

namespace pmp {

struct PmpOptions {
  std::size_t sweeps = 100;
  double damping = 0.5;
};

enum class SamplerKind { Pmp, Gibbs, BlockGibbsRbm };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::Pmp;
  std::size_t sweeps = 100;
  double damping = 0.5;
  bool persistent = false;
  std::size_t chains = 100;

  /// Throws ParameterError on sweeps == 0, chains == 0 or damping outside (0, 1].
  void validate() const;
};

/// Perturb-and-max-product sampler for a fixed graph structure. Each call
/// zero-initializes the messages, runs the damped sweeps and decodes.
class PmpSampler {
 public:
  explicit PmpSampler(const FactorGraph& g) : mg_(g) {}

  /// Picks up new factor potentials (same structure).
  void refresh(const FactorGraph& g) { mg_.refresh(g); }

  /// MAP decode of the model whose unaries are unaries + eps.
  Assignment sample(std::span<const double> unaries, std::span<const double> eps, const PmpOptions& options) const;
  /// Draws eps ~ Gumbel(-c, 1) from rng and samples.
  Assignment sample(std::span<const double> unaries, const PmpOptions& options, Rng& rng) const;

  const MessageGraph& message_graph() const noexcept { return mg_; }

 private:
  MessageGraph mg_;
};

Assignment pmp_sample(const FactorGraph& g, std::size_t sweeps, Rng& rng, double damping = 0.5);

/// pmp_sample on clamp(g, evidence); evidence variables always carry their observed state.
Assignment pmp_posterior_sample(const FactorGraph& g, const Evidence& evidence, std::size_t sweeps, Rng& rng,
                                double damping = 0.5);

/// Independent chains; chain k uses the stream (seed, {k, step}).
SampleSet pmp_sample_chains(const FactorGraph& g, std::size_t chains, const PmpOptions& options, std::uint64_t seed,
                            std::uint64_t step = 0);

enum class ScanOrder { Fixed, Random };

/// Index drawn with probability proportional to exp(log_weights).
std::int32_t sample_categorical(std::span<const double> log_weights, Rng& rng);

/// Log conditional of every state of `var` given the rest of x.
void conditional_log_weights(const FactorGraph& g, std::span<const std::int32_t> x, std::size_t var,
                             std::vector<double>& out);

/// One full sweep of single-site Gibbs updates, in place.
void gibbs_sweep_inplace(const FactorGraph& g, std::span<std::int32_t> x, Rng& rng,
                         ScanOrder order = ScanOrder::Fixed);
Assignment gibbs_sweep(const FactorGraph& g, Assignment x, Rng& rng, ScanOrder order = ScanOrder::Fixed);

Assignment uniform_assignment(const FactorGraph& g, Rng& rng);

/// Chains started uniformly at random, each run for `sweeps` Gibbs sweeps.
SampleSet gibbs_sample_chains(const FactorGraph& g, std::size_t chains, std::size_t sweeps, std::uint64_t seed,
                              std::uint64_t step = 0);

}  // namespace pmp
