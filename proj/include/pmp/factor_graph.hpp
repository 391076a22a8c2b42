#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace pmp {

/// Log-potential given to excluded states (clamped-away values, violated
/// logical factors). Finite so message arithmetic never produces NaN.
inline constexpr double kClampScore = -1e30;

/// Log-potentials or log-odds at or beyond this magnitude are treated as
/// infinite by the scalar kernels.
inline constexpr double kInfiniteThreshold = 1e29;

/// One state index per variable.
using Assignment = std::vector<std::int32_t>;

struct Observation {
  std::uint32_t var;
  std::int32_t state;
};

/// A partial assignment: the observed variables and their states.
using Evidence = std::vector<Observation>;

struct VariableSpec {
  std::uint32_t id;
  std::int32_t cardinality;
};

/// Log-potential table over the joint states of the neighbors, row-major with
/// the last neighbor varying fastest.
struct DenseTable {
  std::vector<double> log_potentials;
};

/// Binary pairwise term weight * s_i * s_j with spins s = 2x - 1.
struct IsingEdge {
  double weight = 0.0;
};

/// Bipartite block sum_ij weights[i * n_visible + j] * h_i * v_j over {0,1}
/// variables. Neighbors list the hidden group first, then the visible group.
/// Max-product treats the block edge by edge.
struct RbmBlock {
  std::uint32_t n_hidden = 0;
  std::uint32_t n_visible = 0;
  std::vector<double> weights;
};

/// bottom = OR(tops). Neighbors: tops..., bottom.
struct OrFactor {};

/// bottom = AND(top1, top2). Neighbors: top1, top2, bottom.
struct AndFactor {};

using FactorKind = std::variant<DenseTable, IsingEdge, RbmBlock, OrFactor, AndFactor>;

struct Factor {
  std::vector<std::uint32_t> vars;
  FactorKind kind;
};

/// A neighbor slot of a factor, as seen from a variable.
struct FactorSlot {
  std::uint32_t factor;
  std::uint32_t slot;
};

/// Discrete energy-based model E(x) = -sum_a phi_a(x_a) - sum_i theta_i(x_i).
///
/// Parameter / statistics layout (shared by parameters(), set_parameters() and
/// sufficient_stats()): all unary blocks in variable order, then one block per
/// factor in factor order. DenseTable blocks hold one indicator per joint
/// state, IsingEdge a single spin product, RbmBlock the h_i v_j products.
/// Logical factors carry no parameters.
class FactorGraph {
 public:
  std::uint32_t add_variable(std::int32_t cardinality);
  std::uint32_t add_variable(std::vector<double> unary);
  std::size_t add_factor(std::vector<std::uint32_t> vars, FactorKind kind);

  std::size_t num_variables() const noexcept { return cards_.size(); }
  std::size_t num_factors() const noexcept { return factors_.size(); }
  std::int32_t cardinality(std::size_t var) const { return cards_.at(var); }
  const std::vector<std::int32_t>& cardinalities() const noexcept { return cards_; }
  std::vector<VariableSpec> variables() const;

  std::span<const double> unary(std::size_t var) const;
  void set_unary(std::size_t var, std::span<const double> values);
  /// All unary entries, concatenated in variable order.
  std::span<const double> unaries() const noexcept { return unaries_; }
  std::size_t unary_offset(std::size_t var) const { return unary_offsets_.at(var); }
  /// Sum of cardinalities.
  std::size_t total_states() const noexcept { return unaries_.size(); }

  const std::vector<Factor>& factors() const noexcept { return factors_; }
  const Factor& factor(std::size_t f) const { return factors_.at(f); }
  std::span<const FactorSlot> adjacent(std::size_t var) const { return adjacency_.at(var); }

  std::size_t num_parameters() const noexcept { return num_params_; }
  std::size_t factor_parameter_offset(std::size_t f) const { return param_offsets_.at(f); }
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);

  bool operator==(const FactorGraph& other) const;

 private:
  std::vector<std::int32_t> cards_;
  std::vector<std::size_t> unary_offsets_;
  std::vector<double> unaries_;
  std::vector<Factor> factors_;
  std::vector<std::size_t> param_offsets_;
  std::vector<std::vector<FactorSlot>> adjacency_;
  std::size_t num_params_ = 0;
};

/// Number of parameters carried by a factor kind.
std::size_t parameter_count(const FactorKind& kind);

/// Row-major joint index of neighbor states (last slot fastest).
std::size_t dense_index(std::span<const std::int32_t> slot_cards, std::span<const std::int32_t> states);

/// Log-potential of one factor given the states of its neighbors, both in slot
/// order. slot_cards is only consulted for DenseTable.
double factor_log_potential(const Factor& factor, std::span<const std::int32_t> states,
                            std::span<const std::int32_t> slot_cards);

/// Explicit table equivalent of any factor with at most 2^20 joint states.
DenseTable to_dense_table(const Factor& factor, std::span<const std::int32_t> slot_cards);

/// Throws StructuralError unless x is a valid assignment for g.
void validate_assignment(const FactorGraph& g, std::span<const std::int32_t> x);

/// Theta^T Phi(x) plus any logical-factor penalties; equals -energy(g, x).
double log_score(const FactorGraph& g, std::span<const std::int32_t> x);
double energy(const FactorGraph& g, std::span<const std::int32_t> x);

/// Phi(x) in the parameter layout of g.
std::vector<double> sufficient_stats(const FactorGraph& g, std::span<const std::int32_t> x);

/// Copy of g whose evidence variables have unary 0 at the observed state and
/// kClampScore elsewhere.
FactorGraph clamp(const FactorGraph& g, const Evidence& evidence);

/// Evidence fixing every listed variable to its value in x.
Evidence evidence_from(std::span<const std::uint32_t> vars, std::span<const std::int32_t> x);

}  // namespace pmp
