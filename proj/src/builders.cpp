#include "pmp/builders.hpp"

#include <algorithm>
#include <queue>

#include "pmp/errors.hpp"

namespace pmp {

namespace {

double uniform_in(Rng& rng, double half_width) { return (2.0 * rng.uniform() - 1.0) * half_width; }

void add_spin_fields(FactorGraph& g, std::size_t n, double b_max, Rng* rng) {
  for (std::size_t i = 0; i < n; ++i) {
    const double h = rng ? uniform_in(*rng, b_max) : 0.0;
    g.add_variable(std::vector<double>{-h, h});
  }
}

}  // namespace

FactorGraph complete_spin_graph(std::size_t n, double theta) {
  FactorGraph g;
  add_spin_fields(g, n, 0.0, nullptr);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) g.add_factor({i, j}, IsingEdge{theta});
  return g;
}

FactorGraph lattice_graph(std::size_t side, double theta, bool cyclic) {
  if (side == 0 || (cyclic && side < 3)) throw StructuralError("lattice side too small");
  FactorGraph g;
  add_spin_fields(g, side * side, 0.0, nullptr);
  auto id = [side](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * side + c); };
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) {
      if (c + 1 < side || cyclic) g.add_factor({id(r, c), id(r, (c + 1) % side)}, IsingEdge{theta});
      if (r + 1 < side || cyclic) g.add_factor({id(r, c), id((r + 1) % side, c)}, IsingEdge{theta});
    }
  return g;
}

FactorGraph random_spin_glass(std::size_t n, double w_max, double b_max, Rng& rng) {
  FactorGraph g;
  add_spin_fields(g, n, b_max, &rng);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) g.add_factor({i, j}, IsingEdge{uniform_in(rng, w_max)});
  return g;
}

FactorGraph random_spin_tree(std::size_t n, double w_max, double b_max, Rng& rng) {
  FactorGraph g;
  add_spin_fields(g, n, b_max, &rng);
  for (std::uint32_t i = 1; i < n; ++i) {
    const auto parent = static_cast<std::uint32_t>(rng.below(i));
    g.add_factor({parent, i}, IsingEdge{uniform_in(rng, w_max)});
  }
  return g;
}

std::size_t graph_diameter(const FactorGraph& g) {
  const std::size_t n = g.num_variables();
  std::vector<std::vector<std::uint32_t>> nbr(n);
  for (const auto& f : g.factors()) {
    if (f.vars.size() != 2) throw StructuralError("diameter needs a pairwise graph");
    nbr[f.vars[0]].push_back(f.vars[1]);
    nbr[f.vars[1]].push_back(f.vars[0]);
  }
  std::size_t best = 0;
  std::vector<std::size_t> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), SIZE_MAX);
    std::queue<std::size_t> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      best = std::max(best, dist[u]);
      for (auto v : nbr[u])
        if (dist[v] == SIZE_MAX) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
    }
  }
  return best;
}

}  // namespace pmp
