#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pmp/factor_graph.hpp"
#include "pmp/models.hpp"
#include "pmp/rng.hpp"
#include "pmp/sample_set.hpp"
#include "pmp/samplers.hpp"

namespace pmp {

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch = 100;
  std::size_t sweeps = 100;
  std::size_t iterations = 200;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Soft-threshold strength applied to pairwise weights after each step.
  double l1 = 0.0;
  double damping = 0.5;
  /// Standard deviation of the initial parameters.
  double init_std = 0.01;
  /// Wall-clock cap in seconds; 0 disables it.
  double budget_secs = 0.0;

  /// Throws ParameterError unless learning_rate > 0 and batch, sweeps >= 1.
  void validate() const;
};

struct TrainState {
  std::vector<double> theta;
  std::vector<double> m;
  std::vector<double> v;
  std::size_t iteration = 0;
  bool stopped_early = false;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

using MetricsSink = std::function<void(const IterationMetrics&)>;

/// Initial state with theta ~ N(0, init_std^2) and zero moments.
TrainState init_train_state(std::size_t size, const TrainConfig& config, Rng& rng);

/// theta += learning_rate * gradient, then l1 shrinkage on penalized entries.
void sgd_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config,
              std::span<const std::uint8_t> penalized = {});
/// Adam ascent step with bias-corrected moments, then l1 shrinkage.
void adam_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config,
               std::span<const std::uint8_t> penalized = {});
void optimizer_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config,
                    std::span<const std::uint8_t> penalized = {});

/// Maps the parameters of a graph onto learned coordinates. index[k] is the
/// learned coordinate of graph parameter k, or -1 when it stays fixed. Several
/// graph parameters may share a coordinate.
struct ParameterTying {
  std::vector<std::int64_t> index;
  std::size_t num_free = 0;

  /// Every graph parameter learned independently.
  static ParameterTying identity(const FactorGraph& g);
  /// Factor parameters learned, unaries fixed.
  static ParameterTying factors_only(const FactorGraph& g);
  /// All factor parameters share one coordinate, unaries fixed.
  static ParameterTying shared_factors(const FactorGraph& g);

  /// Sums graph-layout entries into learned coordinates.
  std::vector<double> reduce(std::span<const double> graph_values) const;
  /// Writes learned coordinates into a graph parameter vector.
  void expand(std::span<const double> learned, std::span<double> graph_values) const;
};

/// Training data over a subset of variables; rows hold the states of `visible`
/// in order. When visible lists every variable the data is fully observed.
struct Dataset {
  std::vector<std::uint32_t> visible;
  SampleSet rows;

  bool fully_observed(const FactorGraph& g) const;
  static Dataset full(SampleSet rows);
};

/// (1/S) sum Phi(y+) - (1/S) sum Phi(y-) with y+ a PMP posterior sample given a
/// uniformly drawn datum (the datum itself when fully observed) and y- an
/// independent PMP sample. Pair s uses streams (seed, {iteration, s, 0|1}).
std::vector<double> grad_estimate(const FactorGraph& g, const Dataset& data, std::size_t batch, const PmpOptions& options,
                                  std::uint64_t seed, std::uint64_t iteration = 0);

/// Mean statistics of `batch` independent PMP samples of g.
std::vector<double> pmp_moments(const FactorGraph& g, std::size_t batch, const PmpOptions& options, std::uint64_t seed,
                                std::uint64_t iteration = 0);

/// The PMP learning loop. Learned coordinates start from N(0, init_std^2);
/// fixed parameters keep their values in g. On return g holds the final parameters.
TrainState train(FactorGraph& g, const Dataset& data, const TrainConfig& config, std::uint64_t seed,
                 const ParameterTying& tying, const MetricsSink& sink = {});

/// As train, but the positive phase is the supplied vector of expected
/// statistics (graph layout) instead of posterior samples.
TrainState exact_moment_train(FactorGraph& g, std::span<const double> data_moments, const TrainConfig& config,
                              std::uint64_t seed, const ParameterTying& tying, const MetricsSink& sink = {});

enum class SamplingMethod { Pmp, Gibbs, GibbsReset, Pcd };

/// Fully visible Ising model learned from binary rows. Gibbs keeps persistent
/// chains, GibbsReset restarts them uniformly at random every iteration; both
/// run config.sweeps sweeps per iteration.
TrainState train_ising(IsingModel& model, const SampleSet& data, const TrainConfig& config, SamplingMethod method,
                       std::uint64_t seed, const MetricsSink& sink = {});

/// Binary RBM learned from visible rows. Pmp follows the PMP learning loop;
/// GibbsReset restarts block Gibbs chains from random visibles each
/// iteration; Pcd keeps persistent chains. Gibbs methods use the exact
/// conditional expectation of the hidden units in the positive phase.
TrainState train_rbm(RbmModel& model, const SampleSet& data, const TrainConfig& config, SamplingMethod method,
                     std::uint64_t seed, const MetricsSink& sink = {});

/// Samples of a trained Ising model: PMP, or Gibbs chains from uniform starts.
SampleSet sample_ising(const IsingModel& model, std::size_t count, SamplingMethod method, const PmpOptions& options,
                       std::uint64_t seed);
/// Visible samples of an RBM: PMP, or block Gibbs chains from uniform starts.
SampleSet sample_rbm(const RbmModel& model, std::size_t count, SamplingMethod method, const PmpOptions& options,
                     std::uint64_t seed);

}  // namespace pmp
