#pragma once

// Brute-force reference computations written directly from the model
// definitions, independent of the library's enumeration and scoring code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "pmp/factor_graph.hpp"
#include "pmp/rng.hpp"

namespace oracle {

using pmp::FactorGraph;

inline double factor_value(const pmp::Factor& f, const std::vector<int>& x, const FactorGraph& g) {
  if (const auto* t = std::get_if<pmp::DenseTable>(&f.kind)) {
    std::size_t idx = 0;
    for (auto v : f.vars) idx = idx * static_cast<std::size_t>(g.cardinality(v)) + static_cast<std::size_t>(x[v]);
    return t->log_potentials[idx];
  }
  if (const auto* e = std::get_if<pmp::IsingEdge>(&f.kind))
    return e->weight * (2 * x[f.vars[0]] - 1) * (2 * x[f.vars[1]] - 1);
  if (const auto* r = std::get_if<pmp::RbmBlock>(&f.kind)) {
    double s = 0.0;
    for (std::size_t i = 0; i < r->n_hidden; ++i)
      for (std::size_t j = 0; j < r->n_visible; ++j)
        s += r->weights[i * r->n_visible + j] * x[f.vars[i]] * x[f.vars[r->n_hidden + j]];
    return s;
  }
  const int bottom = x[f.vars.back()];
  int agg = std::holds_alternative<pmp::OrFactor>(f.kind) ? 0 : 1;
  for (std::size_t k = 0; k + 1 < f.vars.size(); ++k) {
    if (std::holds_alternative<pmp::OrFactor>(f.kind))
      agg |= x[f.vars[k]];
    else
      agg &= x[f.vars[k]];
  }
  return agg == bottom ? 0.0 : pmp::kClampScore;
}

inline double score(const FactorGraph& g, const std::vector<int>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.num_variables(); ++i) s += g.unary(i)[static_cast<std::size_t>(x[i])];
  for (const auto& f : g.factors()) s += factor_value(f, x, g);
  return s;
}

/// Visits every joint state, last variable fastest.
inline void for_each_state(const std::vector<std::int32_t>& cards, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> x(cards.size(), 0);
  while (true) {
    fn(x);
    std::size_t k = cards.size();
    while (k > 0) {
      --k;
      if (++x[k] < cards[k]) break;
      x[k] = 0;
      if (k == 0) return;
    }
    if (cards.empty()) return;
  }
}

inline std::vector<int> map_state(const FactorGraph& g) {
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for_each_state(g.cardinalities(), [&](const std::vector<int>& x) {
    const double s = score(g, x);
    if (s > best_score) {
      best_score = s;
      best = x;
    }
  });
  return best;
}

inline double log_partition(const FactorGraph& g) {
  std::vector<double> scores;
  for_each_state(g.cardinalities(), [&](const std::vector<int>& x) { scores.push_back(score(g, x)); });
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) m = std::max(m, s);
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  return m + std::log(z);
}

/// Probability of every joint state in enumeration order.
inline std::vector<double> distribution(const FactorGraph& g) {
  const double lz = log_partition(g);
  std::vector<double> p;
  for_each_state(g.cardinalities(), [&](const std::vector<int>& x) { p.push_back(std::exp(score(g, x) - lz)); });
  return p;
}

/// Per-variable marginals p(x_i = c), laid out like the unaries.
inline std::vector<double> marginals(const FactorGraph& g) {
  const double lz = log_partition(g);
  std::vector<double> m(g.total_states(), 0.0);
  for_each_state(g.cardinalities(), [&](const std::vector<int>& x) {
    const double p = std::exp(score(g, x) - lz);
    for (std::size_t i = 0; i < x.size(); ++i) m[g.unary_offset(i) + static_cast<std::size_t>(x[i])] += p;
  });
  return m;
}

inline double uniform(pmp::Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Random graph of dense pairwise and triple factors over variables of
/// cardinality 2..max_card.
inline FactorGraph random_dense_graph(std::size_t n, std::int32_t max_card, std::size_t n_factors, pmp::Rng& rng) {
  FactorGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    const auto card = 2 + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(max_card - 1)));
    std::vector<double> u(static_cast<std::size_t>(card));
    for (auto& v : u) v = rng.normal();
    g.add_variable(u);
  }
  for (std::size_t f = 0; f < n_factors; ++f) {
    const std::size_t arity = n >= 3 && rng.below(3) == 0 ? 3 : 2;
    std::vector<std::uint32_t> vars;
    while (vars.size() < arity) {
      const auto v = static_cast<std::uint32_t>(rng.below(n));
      if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
    }
    std::size_t states = 1;
    for (auto v : vars) states *= static_cast<std::size_t>(g.cardinality(v));
    std::vector<double> t(states);
    for (auto& v : t) v = rng.normal();
    g.add_factor(vars, pmp::DenseTable{t});
  }
  return g;
}

}  // namespace oracle
