#pragma once

// Small model families used by the experiments and tests.

#include <cstddef>

#include "pmp/factor_graph.hpp"
#include "pmp/rng.hpp"

namespace pmp {

/// Fully connected spins with every coupling equal to theta, zero unaries.
FactorGraph complete_spin_graph(std::size_t n, double theta);

/// side x side grid of spins with coupling theta on every edge; cyclic adds
/// the wrap-around edges (side must then be at least 3).
FactorGraph lattice_graph(std::size_t side, double theta, bool cyclic = true);

/// Fully connected spins with couplings uniform in [-w_max, w_max] and spin
/// fields uniform in [-b_max, b_max].
FactorGraph random_spin_glass(std::size_t n, double w_max, double b_max, Rng& rng);

/// Random recursive tree over n spins (parent of i uniform in [0, i)) with
/// couplings uniform in [-w_max, w_max] and fields uniform in [-b_max, b_max].
FactorGraph random_spin_tree(std::size_t n, double w_max, double b_max, Rng& rng);

/// Longest path length, in edges, of a forest given by pairwise factors.
std::size_t graph_diameter(const FactorGraph& g);

}  // namespace pmp
