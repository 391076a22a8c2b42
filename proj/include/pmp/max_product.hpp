#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmp/factor_graph.hpp"

namespace pmp {

/// Largest joint state space a dense factor may have.
inline constexpr std::size_t kMaxTableStates = std::size_t{1} << 20;

/// Flattened message-passing view of a FactorGraph.
///
/// Every factor becomes one or more elements: RbmBlock factors expand into one
/// pairwise element per (hidden, visible) edge, every other factor maps to a
/// single element. Each element slot owns a message of length equal to the
/// cardinality of its variable in both directions.
class MessageGraph {
 public:
  enum class Kind : std::uint8_t { Table, Pair, Or, And };

  explicit MessageGraph(const FactorGraph& g);

  /// Re-reads factor potentials from a graph with identical structure.
  void refresh(const FactorGraph& g);

  std::size_t num_variables() const noexcept { return cards_.size(); }
  std::size_t num_elements() const noexcept { return kinds_.size(); }
  std::size_t num_slots() const noexcept { return slot_var_.size(); }
  std::size_t message_size() const noexcept { return message_size_; }
  std::int32_t cardinality(std::size_t var) const { return cards_[var]; }
  std::size_t unary_offset(std::size_t var) const { return unary_offsets_[var]; }
  std::size_t total_states() const noexcept { return total_states_; }

  Kind kind(std::size_t e) const { return kinds_[e]; }
  /// First element generated by factor f of the source graph.
  std::size_t first_element(std::size_t f) const { return factor_first_element_.at(f); }
  /// Global slot id of slot s of element e.
  std::size_t slot(std::size_t e, std::size_t s) const { return slot_begin_[e] + s; }
  std::size_t arity(std::size_t e) const { return slot_begin_[e + 1] - slot_begin_[e]; }
  std::uint32_t slot_variable(std::size_t slot) const { return slot_var_[slot]; }
  /// Offset of a slot's message in MessageState buffers.
  std::size_t message_offset(std::size_t slot) const { return msg_offset_[slot]; }
  /// Global slot ids attached to a variable.
  std::span<const std::uint32_t> variable_slots(std::size_t var) const {
    return std::span<const std::uint32_t>(var_slots_).subspan(var_slot_begin_[var],
                                                              var_slot_begin_[var + 1] - var_slot_begin_[var]);
  }
  /// Log-potential table of a Table or Pair element.
  std::span<const double> table(std::size_t e) const;
  std::size_t max_degree() const noexcept { return max_degree_; }

 private:

  void add_element(Kind kind, std::span<const std::uint32_t> vars, std::span<const double> table);

  std::vector<std::int32_t> cards_;
  std::vector<std::size_t> unary_offsets_;
  std::size_t total_states_ = 0;

  std::vector<Kind> kinds_;
  std::vector<std::size_t> slot_begin_{0};
  std::vector<std::size_t> table_offset_;
  std::vector<double> tables_;
  std::vector<std::size_t> factor_first_element_;

  std::vector<std::uint32_t> slot_var_;
  std::vector<std::size_t> msg_offset_;
  std::size_t message_size_ = 0;

  // Per-variable slot lists (CSR).
  std::vector<std::size_t> var_slot_begin_;
  std::vector<std::uint32_t> var_slots_;
  std::size_t max_degree_ = 0;
};

/// Log-space messages for every (element, slot) pair.
struct MessageState {
  std::vector<double> var_to_factor;
  std::vector<double> factor_to_var;
  std::size_t iteration = 0;
};

struct SweepConfig {
  double damping = 0.5;
  std::size_t iterations = 100;
};

MessageState zero_messages(const MessageGraph& mg);

/// m_{i->a}(x) = unary_i(x) + sum_{b != a} m_{b->i}(x) for every slot at once,
/// reading only factor_to_var. Results are shifted to max 0.
void var_to_factor_update(const MessageGraph& mg, std::span<const double> perturbed_unaries, MessageState& state);

/// Fresh factor->variable messages from var_to_factor, blended as
/// (1 - damping) * old + damping * fresh and shifted to max 0.
/// Returns the largest absolute change of a finite message entry.
double factor_to_var_update(const MessageGraph& mg, MessageState& state, double damping);

/// One parallel sweep: var_to_factor_update then factor_to_var_update.
double damped_sweep(const MessageGraph& mg, std::span<const double> perturbed_unaries, MessageState& state,
                    double damping);

/// Runs config.iterations sweeps. When deltas is non-null, the per-sweep
/// maximum message change is appended to it.
void run_sweeps(const MessageGraph& mg, std::span<const double> perturbed_unaries, MessageState& state,
                const SweepConfig& config, std::vector<double>* deltas = nullptr);

/// x_i = argmax_c unary_i(c) + sum_b m_{b->i}(c); ties go to the lowest state.
Assignment decode(const MessageGraph& mg, const MessageState& state, std::span<const double> perturbed_unaries);

/// Max-marginal messages out of a single dense factor, each shifted to max 0.
/// incoming[k] is the message from the k-th neighbor into the factor.
std::vector<std::vector<double>> dense_factor_messages(std::span<const double> table,
                                                       std::span<const std::int32_t> slot_cards,
                                                       const std::vector<std::vector<double>>& incoming);

/// Throws ParameterError unless 0 < damping <= 1.
void check_damping(double damping);

}  // namespace pmp
