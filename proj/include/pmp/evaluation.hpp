#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pmp/factor_graph.hpp"
#include "pmp/sample_set.hpp"

namespace pmp {

/// Default limit on the number of joint states an enumeration may visit.
inline constexpr std::size_t kEnumerationBudget = std::size_t{1} << 24;

/// exp(-(1/D) * number of differing coordinates).
double hamming_kernel(std::span<const std::uint16_t> x, std::span<const std::uint16_t> y);
double hamming_kernel(std::span<const std::int32_t> x, std::span<const std::int32_t> y);

/// Biased estimator mean k(X, X) + mean k(Y, Y) - 2 mean k(X, Y).
double mmd2(const SampleSet& X, const SampleSet& Y);
/// log(mmd2), with mmd2 floored at 1e-300.
double log_mmd2(const SampleSet& X, const SampleSet& Y);

/// Number of joint states of g; throws CapacityError above budget.
std::size_t joint_state_count(const FactorGraph& g, std::size_t budget = kEnumerationBudget);

/// Calls visit(x, log_score(g, x)) for every joint state, the last variable
/// varying fastest. Scores are updated incrementally.
void enumerate_states(const FactorGraph& g, const std::function<void(std::span<const std::int32_t>, double)>& visit,
                      std::size_t budget = kEnumerationBudget);

double exact_log_partition(const FactorGraph& g, std::size_t budget = kEnumerationBudget);

/// p(x) for every joint state in enumeration order.
std::vector<double> exact_distribution(const FactorGraph& g, std::size_t budget = kEnumerationBudget);

/// E[Phi(x)] in the parameter layout of g.
std::vector<double> exact_expected_stats(const FactorGraph& g, std::size_t budget = kEnumerationBudget);

/// Per-(variable, state) marginals, laid out like g.unaries().
std::vector<double> exact_marginals(const FactorGraph& g, std::size_t budget = kEnumerationBudget);

/// First joint state (enumeration order) with maximal log score.
Assignment brute_force_map(const FactorGraph& g, std::size_t budget = kEnumerationBudget);

/// Position of x in enumeration order.
std::size_t joint_index(std::span<const std::int32_t> cards, std::span<const std::uint16_t> x);

/// Empirical distribution over joint states with `pseudocount` added to every state.
std::vector<double> empirical_distribution(const SampleSet& samples, std::span<const std::int32_t> cards,
                                           double pseudocount = 0.5);

/// KL(p || q) = sum p log(p / q); +infinity when q(x) = 0 < p(x).
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Total-variation distance 1/2 sum |p - q|.
double tv_distance(std::span<const double> p, std::span<const double> q);

enum class MapSolver { Pmp, Exact };

struct BoundEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::vector<double> draws;
};

/// Mean over draws of max_x [log_score of g with unaries + eps]. The maximum is
/// the PMP decode (sweeps, damping) or the exact enumeration maximum. Draw d
/// uses the stream (seed, {d}).
BoundEstimate pmap_logZ_upper_bound(const FactorGraph& g, std::size_t draws, MapSolver solver, std::uint64_t seed,
                                    std::size_t sweeps = 200, double damping = 0.5,
                                    std::size_t budget = kEnumerationBudget);

/// Root-mean-square difference over all entries.
double rmse_params(std::span<const double> truth, std::span<const double> estimate);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov test.
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sided Student t test of H1: mean > 0.
TestResult t_test_positive_mean(std::span<const double> values);

}  // namespace pmp
