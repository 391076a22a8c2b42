#include "pmp/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "pmp/errors.hpp"
#include "pmp/parallel.hpp"
#include "pmp/perturbation.hpp"
#include "pmp/samplers.hpp"

namespace pmp {

namespace {

template <class T>
double hamming_kernel_impl(std::span<const T> x, std::span<const T> y) {
  if (x.size() != y.size()) throw StructuralError("kernel arguments differ in dimension");
  if (x.empty()) return 1.0;
  std::size_t d = 0;
  for (std::size_t k = 0; k < x.size(); ++k) d += x[k] != y[k];
  return std::exp(-static_cast<double>(d) / static_cast<double>(x.size()));
}

// Rows packed into 64-bit words for binary data.
struct PackedRows {
  std::size_t words = 0;
  std::vector<std::uint64_t> bits;
};

PackedRows pack(const SampleSet& s) {
  PackedRows p;
  p.words = (s.num_vars + 63) / 64;
  p.bits.assign(p.words * s.size(), 0);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const auto row = s.row(r);
    std::uint64_t* out = p.bits.data() + r * p.words;
    for (std::size_t k = 0; k < row.size(); ++k)
      if (row[k]) out[k / 64] |= std::uint64_t{1} << (k % 64);
  }
  return p;
}

bool is_binary(const SampleSet& s) {
  return std::all_of(s.values.begin(), s.values.end(), [](std::uint16_t v) { return v <= 1; });
}

// Mean kernel value between all rows of a and all rows of b.
double mean_kernel(const SampleSet& a, const SampleSet& b, bool binary, const PackedRows& pa, const PackedRows& pb,
                   const std::vector<double>& kernel_of_distance) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  std::vector<double> row_sums(na, 0.0);
  parallel_for(na, [&](std::size_t r) {
    double acc = 0.0;
    if (binary) {
      const std::uint64_t* x = pa.bits.data() + r * pa.words;
      for (std::size_t q = 0; q < nb; ++q) {
        const std::uint64_t* y = pb.bits.data() + q * pb.words;
        std::size_t d = 0;
        for (std::size_t w = 0; w < pa.words; ++w) d += static_cast<std::size_t>(std::popcount(x[w] ^ y[w]));
        acc += kernel_of_distance[d];
      }
    } else {
      const auto x = a.row(r);
      for (std::size_t q = 0; q < nb; ++q) {
        const auto y = b.row(q);
        std::size_t d = 0;
        for (std::size_t k = 0; k < x.size(); ++k) d += x[k] != y[k];
        acc += kernel_of_distance[d];
      }
    }
    row_sums[r] = acc;
  });
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total / (static_cast<double>(na) * static_cast<double>(nb));
}

// Log score contribution of one factor at the current assignment.
double factor_term(const Factor& f, std::span<const std::int32_t> cards, std::span<const std::int32_t> x,
                   std::vector<std::int32_t>& states, std::vector<std::int32_t>& slot_cards) {
  states.resize(f.vars.size());
  slot_cards.resize(f.vars.size());
  for (std::size_t k = 0; k < f.vars.size(); ++k) {
    states[k] = x[f.vars[k]];
    slot_cards[k] = cards[f.vars[k]];
  }
  return factor_log_potential(f, states, slot_cards);
}

}  // namespace

double hamming_kernel(std::span<const std::uint16_t> x, std::span<const std::uint16_t> y) {
  return hamming_kernel_impl(x, y);
}

double hamming_kernel(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  return hamming_kernel_impl(x, y);
}

double mmd2(const SampleSet& X, const SampleSet& Y) {
  if (X.empty() || Y.empty()) throw StructuralError("MMD needs non-empty sample sets");
  if (X.num_vars != Y.num_vars) throw StructuralError("sample sets differ in dimension");
  const std::size_t D = X.num_vars;
  std::vector<double> kernel(D + 1);
  for (std::size_t d = 0; d <= D; ++d) kernel[d] = D ? std::exp(-static_cast<double>(d) / static_cast<double>(D)) : 1.0;
  const bool binary = is_binary(X) && is_binary(Y);
  PackedRows px, py;
  if (binary) {
    px = pack(X);
    py = pack(Y);
  }
  const double kxx = mean_kernel(X, X, binary, px, px, kernel);
  const double kyy = mean_kernel(Y, Y, binary, py, py, kernel);
  const double kxy = mean_kernel(X, Y, binary, px, py, kernel);
  return kxx + kyy - 2.0 * kxy;
}

double log_mmd2(const SampleSet& X, const SampleSet& Y) { return std::log(std::max(mmd2(X, Y), 1e-300)); }

std::size_t joint_state_count(const FactorGraph& g, std::size_t budget) {
  std::size_t total = 1;
  for (auto c : g.cardinalities()) {
    if (total > budget / static_cast<std::size_t>(c))
      throw CapacityError("joint state space exceeds the enumeration budget of " + std::to_string(budget));
    total *= static_cast<std::size_t>(c);
  }
  return total;
}

void enumerate_states(const FactorGraph& g, const std::function<void(std::span<const std::int32_t>, double)>& visit,
                      std::size_t budget) {
  const std::size_t total = joint_state_count(g, budget);
  const std::size_t n = g.num_variables();
  const auto& cards = g.cardinalities();
  const auto unaries = g.unaries();
  std::vector<std::int32_t> x(n, 0);
  std::vector<double> terms(g.num_factors());
  std::vector<std::int32_t> states, slot_cards;
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) score += unaries[g.unary_offset(i)];
  for (std::size_t f = 0; f < g.num_factors(); ++f) {
    terms[f] = factor_term(g.factor(f), cards, x, states, slot_cards);
    score += terms[f];
  }
  for (std::size_t idx = 0; idx < total; ++idx) {
    visit(x, score);
    if (idx + 1 == total) break;
    // Odometer increment; every changed variable refreshes its factors.
    for (std::size_t i = n; i-- > 0;) {
      const std::int32_t old = x[i];
      x[i] = old + 1 < cards[i] ? old + 1 : 0;
      score += unaries[g.unary_offset(i) + static_cast<std::size_t>(x[i])] -
               unaries[g.unary_offset(i) + static_cast<std::size_t>(old)];
      for (const auto& [f, slot] : g.adjacent(i)) {
        const double t = factor_term(g.factor(f), cards, x, states, slot_cards);
        score += t - terms[f];
        terms[f] = t;
      }
      if (x[i] != 0) break;
    }
    // Avoid drift from long chains of incremental updates.
    if ((idx & 0xffff) == 0xffff) {
      score = 0.0;
      for (std::size_t i = 0; i < n; ++i) score += unaries[g.unary_offset(i) + static_cast<std::size_t>(x[i])];
      for (double t : terms) score += t;
    }
  }
}

double exact_log_partition(const FactorGraph& g, std::size_t budget) {
  double mx = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  enumerate_states(
      g,
      [&](std::span<const std::int32_t>, double s) {
        if (s > mx) {
          sum = sum * std::exp(mx - s) + 1.0;
          mx = s;
        } else {
          sum += std::exp(s - mx);
        }
      },
      budget);
  return mx + std::log(sum);
}

std::vector<double> exact_distribution(const FactorGraph& g, std::size_t budget) {
  std::vector<double> logp;
  logp.reserve(joint_state_count(g, budget));
  enumerate_states(g, [&](std::span<const std::int32_t>, double s) { logp.push_back(s); }, budget);
  const double mx = *std::max_element(logp.begin(), logp.end());
  double sum = 0.0;
  for (double& v : logp) sum += (v = std::exp(v - mx));
  for (double& v : logp) v /= sum;
  return logp;
}

std::vector<double> exact_expected_stats(const FactorGraph& g, std::size_t budget) {
  const auto p = exact_distribution(g, budget);
  std::vector<double> out(g.num_parameters(), 0.0);
  std::size_t idx = 0;
  enumerate_states(
      g,
      [&](std::span<const std::int32_t> x, double) {
        const double w = p[idx++];
        if (w == 0.0) return;
        const auto phi = sufficient_stats(g, x);
        for (std::size_t k = 0; k < phi.size(); ++k) out[k] += w * phi[k];
      },
      budget);
  return out;
}

std::vector<double> exact_marginals(const FactorGraph& g, std::size_t budget) {
  const auto p = exact_distribution(g, budget);
  std::vector<double> out(g.total_states(), 0.0);
  std::size_t idx = 0;
  enumerate_states(
      g,
      [&](std::span<const std::int32_t> x, double) {
        const double w = p[idx++];
        for (std::size_t i = 0; i < x.size(); ++i) out[g.unary_offset(i) + static_cast<std::size_t>(x[i])] += w;
      },
      budget);
  return out;
}

Assignment brute_force_map(const FactorGraph& g, std::size_t budget) {
  Assignment best;
  double best_score = -std::numeric_limits<double>::infinity();
  enumerate_states(
      g,
      [&](std::span<const std::int32_t> x, double s) {
        if (best.empty() || s > best_score) {
          best.assign(x.begin(), x.end());
          best_score = s;
        }
      },
      budget);
  return best;
}

std::size_t joint_index(std::span<const std::int32_t> cards, std::span<const std::uint16_t> x) {
  if (cards.size() != x.size()) throw StructuralError("sample length does not match variable count");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] >= cards[k]) throw StructuralError("sample state out of range");
    idx = idx * static_cast<std::size_t>(cards[k]) + x[k];
  }
  return idx;
}

std::vector<double> empirical_distribution(const SampleSet& samples, std::span<const std::int32_t> cards,
                                           double pseudocount) {
  std::size_t total = 1;
  for (auto c : cards) {
    if (total > kEnumerationBudget / static_cast<std::size_t>(c))
      throw CapacityError("joint state space exceeds the enumeration budget");
    total *= static_cast<std::size_t>(c);
  }
  std::vector<double> p(total, pseudocount);
  for (std::size_t r = 0; r < samples.size(); ++r) p[joint_index(cards, samples.row(r))] += 1.0;
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= sum;
  return p;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw StructuralError("distributions differ in support size");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    if (q[k] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[k] * std::log(p[k] / q[k]);
  }
  return kl;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw StructuralError("distributions differ in support size");
  double tv = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - q[k]);
  return 0.5 * tv;
}

BoundEstimate pmap_logZ_upper_bound(const FactorGraph& g, std::size_t draws, MapSolver solver, std::uint64_t seed,
                                    std::size_t sweeps, double damping, std::size_t budget) {
  if (draws == 0) throw ParameterError("bound estimate needs at least one draw");
  check_damping(damping);
  if (solver == MapSolver::Exact) joint_state_count(g, budget);
  BoundEstimate out;
  out.draws.assign(draws, 0.0);
  const PmpSampler sampler(g);
  parallel_for(draws, [&](std::size_t d) {
    Rng rng(seed, {d});
    const auto eps = draw_gumbel(g.total_states(), rng);
    FactorGraph perturbed = g;
    for (std::size_t i = 0; i < g.num_variables(); ++i) {
      auto u = g.unary(i);
      std::vector<double> v(u.begin(), u.end());
      for (std::size_t c = 0; c < v.size(); ++c) v[c] += eps[g.unary_offset(i) + c];
      perturbed.set_unary(i, v);
    }
    const Assignment x = solver == MapSolver::Exact ? brute_force_map(perturbed, budget)
                                                    : sampler.sample(g.unaries(), eps, {sweeps, damping});
    out.draws[d] = log_score(perturbed, x);
  });
  const double n = static_cast<double>(draws);
  out.mean = std::accumulate(out.draws.begin(), out.draws.end(), 0.0) / n;
  if (draws > 1) {
    double ss = 0.0;
    for (double v : out.draws) ss += (v - out.mean) * (v - out.mean);
    out.std_err = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

double rmse_params(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw StructuralError("parameter arrays differ in shape");
  if (truth.empty()) return 0.0;
  double ss = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) ss += (truth[k] - estimate[k]) * (truth[k] - estimate[k]);
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ParameterError("KS test needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf(samples[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("KS test needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

TestResult t_test_positive_mean(std::span<const double> values) {
  if (values.size() < 2) throw ParameterError("t test needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) return {mean > 0 ? std::numeric_limits<double>::infinity() : 0.0, mean > 0 ? 0.0 : 1.0};
  const double t = mean / se;
  const boost::math::students_t dist(n - 1.0);
  return {t, boost::math::cdf(boost::math::complement(dist, t))};
}

}  // namespace pmp
