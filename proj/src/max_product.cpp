#include "pmp/max_product.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pmp/errors.hpp"

namespace pmp {

namespace {

inline bool is_hard(double x) { return x <= -kInfiniteThreshold; }

// Sum that keeps excluded (hard) terms out of the floating-point accumulator so
// that leave-one-out sums never subtract a sentinel.
struct HardSum {
  double finite = 0.0;
  std::size_t hard = 0;

  void add(double x) {
    if (is_hard(x))
      ++hard;
    else
      finite += x;
  }
  double total() const { return hard ? kClampScore : finite; }
  double without(double x) const {
    if (is_hard(x)) return hard > 1 ? kClampScore : finite;
    return hard ? kClampScore : finite - x;
  }
};

void normalize(double* m, std::size_t n) {
  const double mx = *std::max_element(m, m + n);
  for (std::size_t k = 0; k < n; ++k) m[k] = std::max(m[k] - mx, kClampScore);
}

// Max-marginals of a table factor. in[k] points at the incoming message of
// slot k, out[k] receives the (unnormalized) outgoing message.
void table_messages(std::span<const double> table, std::span<const std::int32_t> cards,
                    std::span<const double* const> in, std::span<double* const> out, std::vector<std::int32_t>& states,
                    std::vector<double>& prefix) {
  const std::size_t a = cards.size();
  for (std::size_t k = 0; k < a; ++k) std::fill(out[k], out[k] + cards[k], -std::numeric_limits<double>::infinity());
  states.assign(a, 0);
  prefix.resize(a + 1);
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    prefix[0] = table[idx];
    for (std::size_t k = 0; k < a; ++k) prefix[k + 1] = prefix[k] + in[k][states[k]];
    double suffix = 0.0;
    for (std::size_t k = a; k-- > 0;) {
      double& o = out[k][states[k]];
      o = std::max(o, prefix[k] + suffix);
      suffix += in[k][states[k]];
    }
    for (std::size_t k = a; k-- > 0;) {
      if (++states[k] < cards[k]) break;
      states[k] = 0;
    }
  }
}

}  // namespace

void check_damping(double damping) {
  if (!(damping > 0.0 && damping <= 1.0))
    throw ParameterError("damping must lie in (0, 1], got " + std::to_string(damping));
}

MessageGraph::MessageGraph(const FactorGraph& g) {
  cards_ = g.cardinalities();
  unary_offsets_.resize(cards_.size());
  for (std::size_t i = 0; i < cards_.size(); ++i) unary_offsets_[i] = g.unary_offset(i);
  total_states_ = g.total_states();

  factor_first_element_.reserve(g.num_factors());
  for (const auto& f : g.factors()) {
    factor_first_element_.push_back(kinds_.size());
    if (const auto* t = std::get_if<DenseTable>(&f.kind)) {
      if (t->log_potentials.size() > kMaxTableStates)
        throw CapacityError("dense factor with " + std::to_string(t->log_potentials.size()) +
                            " joint states exceeds the enumeration budget of " + std::to_string(kMaxTableStates));
      const bool pair = f.vars.size() == 2 && cards_[f.vars[0]] == 2 && cards_[f.vars[1]] == 2;
      add_element(pair ? Kind::Pair : Kind::Table, f.vars, t->log_potentials);
    } else if (const auto* e = std::get_if<IsingEdge>(&f.kind)) {
      const double w = e->weight;
      const double table[4] = {w, -w, -w, w};
      add_element(Kind::Pair, f.vars, table);
    } else if (const auto* b = std::get_if<RbmBlock>(&f.kind)) {
      for (std::uint32_t i = 0; i < b->n_hidden; ++i) {
        for (std::uint32_t j = 0; j < b->n_visible; ++j) {
          const std::uint32_t vars[2] = {f.vars[i], f.vars[b->n_hidden + j]};
          const double table[4] = {0.0, 0.0, 0.0, b->weights[std::size_t{i} * b->n_visible + j]};
          add_element(Kind::Pair, vars, table);
        }
      }
    } else if (std::holds_alternative<OrFactor>(f.kind)) {
      add_element(Kind::Or, f.vars, {});
    } else {
      add_element(Kind::And, f.vars, {});
    }
  }

  std::vector<std::size_t> degree(cards_.size() + 1, 0);
  for (auto v : slot_var_) ++degree[v + 1];
  var_slot_begin_.assign(cards_.size() + 1, 0);
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    var_slot_begin_[i + 1] = var_slot_begin_[i] + degree[i + 1];
    max_degree_ = std::max(max_degree_, degree[i + 1]);
  }
  var_slots_.resize(slot_var_.size());
  std::vector<std::size_t> fill(var_slot_begin_.begin(), var_slot_begin_.end() - 1);
  for (std::size_t s = 0; s < slot_var_.size(); ++s) var_slots_[fill[slot_var_[s]]++] = static_cast<std::uint32_t>(s);
}

void MessageGraph::add_element(Kind kind, std::span<const std::uint32_t> vars, std::span<const double> table) {
  kinds_.push_back(kind);
  table_offset_.push_back(tables_.size());
  tables_.insert(tables_.end(), table.begin(), table.end());
  for (auto v : vars) {
    slot_var_.push_back(v);
    msg_offset_.push_back(message_size_);
    message_size_ += static_cast<std::size_t>(cards_[v]);
  }
  slot_begin_.push_back(slot_var_.size());
}

void MessageGraph::refresh(const FactorGraph& g) {
  if (g.num_factors() != factor_first_element_.size() || g.cardinalities() != cards_)
    throw StructuralError("refresh requires a graph with the same structure");
  for (std::size_t f = 0; f < g.num_factors(); ++f) {
    const auto& fac = g.factor(f);
    const std::size_t e0 = factor_first_element_[f];
    double* dst = tables_.data() + table_offset_[e0];
    if (const auto* t = std::get_if<DenseTable>(&fac.kind)) {
      std::copy(t->log_potentials.begin(), t->log_potentials.end(), dst);
    } else if (const auto* e = std::get_if<IsingEdge>(&fac.kind)) {
      dst[0] = dst[3] = e->weight;
      dst[1] = dst[2] = -e->weight;
    } else if (const auto* b = std::get_if<RbmBlock>(&fac.kind)) {
      for (std::size_t k = 0; k < b->weights.size(); ++k) tables_[table_offset_[e0 + k] + 3] = b->weights[k];
    }
  }
  total_states_ = g.total_states();
}

std::span<const double> MessageGraph::table(std::size_t e) const {
  const std::size_t end = e + 1 < table_offset_.size() ? table_offset_[e + 1] : tables_.size();
  return std::span<const double>(tables_).subspan(table_offset_[e], end - table_offset_[e]);
}

MessageState zero_messages(const MessageGraph& mg) {
  MessageState s;
  s.var_to_factor.assign(mg.message_size(), 0.0);
  s.factor_to_var.assign(mg.message_size(), 0.0);
  return s;
}

void var_to_factor_update(const MessageGraph& mg, std::span<const double> perturbed_unaries, MessageState& state) {
  if (perturbed_unaries.size() != mg.total_states())
    throw StructuralError("perturbed unaries do not match the graph's state count");
  std::vector<double> acc;
  std::vector<double> prefix;
  for (std::size_t i = 0; i < mg.num_variables(); ++i) {
    const auto slots = mg.variable_slots(i);
    const auto card = static_cast<std::size_t>(mg.cardinality(i));
    const double* u = perturbed_unaries.data() + mg.unary_offset(i);
    prefix.resize(slots.size() * card);
    acc.assign(u, u + card);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const double* in = state.factor_to_var.data() + mg.message_offset(slots[k]);
      std::copy(acc.begin(), acc.end(), prefix.begin() + static_cast<std::ptrdiff_t>(k * card));
      for (std::size_t c = 0; c < card; ++c) acc[c] += in[c];
    }
    acc.assign(card, 0.0);
    for (std::size_t k = slots.size(); k-- > 0;) {
      const std::size_t off = mg.message_offset(slots[k]);
      double* out = state.var_to_factor.data() + off;
      const double* in = state.factor_to_var.data() + off;
      for (std::size_t c = 0; c < card; ++c) {
        out[c] = prefix[k * card + c] + acc[c];
        acc[c] += in[c];
      }
      normalize(out, card);
    }
  }
}

double factor_to_var_update(const MessageGraph& mg, MessageState& state, double damping) {
  check_damping(damping);
  const double keep = 1.0 - damping;
  double max_delta = 0.0;
  std::vector<double> fresh;
  std::vector<const double*> in;
  std::vector<double*> out;
  std::vector<std::int32_t> cards;
  std::vector<std::int32_t> states;
  std::vector<double> prefix;
  std::vector<double> dk;

  const double* v2f = state.var_to_factor.data();
  for (std::size_t e = 0; e < mg.num_elements(); ++e) {
    const std::size_t a = mg.arity(e);
    const std::size_t s0 = mg.slot(e, 0);
    const std::size_t base = mg.message_offset(s0);
    const std::size_t len = mg.message_offset(s0 + a - 1) + static_cast<std::size_t>(mg.cardinality(mg.slot_variable(s0 + a - 1))) - base;
    fresh.assign(len, 0.0);
    const double* vin = v2f + base;
    double* f = fresh.data();

    switch (mg.kind(e)) {
      case MessageGraph::Kind::Pair: {
        const auto t = mg.table(e);
        const double* m0 = vin;      // into factor from slot 0
        const double* m1 = vin + 2;  // from slot 1
        f[0] = std::max(t[0] + m1[0], t[1] + m1[1]);
        f[1] = std::max(t[2] + m1[0], t[3] + m1[1]);
        f[2] = std::max(t[0] + m0[0], t[2] + m0[1]);
        f[3] = std::max(t[1] + m0[0], t[3] + m0[1]);
        break;
      }
      case MessageGraph::Kind::Table: {
        in.resize(a);
        out.resize(a);
        cards.resize(a);
        for (std::size_t k = 0; k < a; ++k) {
          const std::size_t off = mg.message_offset(s0 + k) - base;
          in[k] = vin + off;
          out[k] = f + off;
          cards[k] = mg.cardinality(mg.slot_variable(s0 + k));
        }
        table_messages(mg.table(e), cards, in, out, states, prefix);
        break;
      }
      case MessageGraph::Kind::And: {
        const double* t1 = vin;
        const double* t2 = vin + 2;
        const double* b = vin + 4;
        f[0] = b[0] + std::max(t2[0], t2[1]);
        f[1] = std::max(t2[0] + b[0], t2[1] + b[1]);
        f[2] = b[0] + std::max(t1[0], t1[1]);
        f[3] = std::max(t1[0] + b[0], t1[1] + b[1]);
        f[4] = std::max({t1[0] + t2[0], t1[0] + t2[1], t1[1] + t2[0]});
        f[5] = t1[1] + t2[1];
        break;
      }
      case MessageGraph::Kind::Or: {
        const std::size_t n = a - 1;
        const double* b = vin + 2 * n;
        HardSum off_sum;   // sum_j t_j(0)
        HardSum best_sum;  // sum_j max(t_j(0), t_j(1))
        dk.resize(n);
        double d1 = -std::numeric_limits<double>::infinity();
        double d2 = d1;
        std::size_t arg1 = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double t0 = vin[2 * j];
          const double t1v = vin[2 * j + 1];
          const double m = std::max(t0, t1v);
          off_sum.add(t0);
          best_sum.add(m);
          // Gain of switching top j on relative to its best state.
          dk[j] = is_hard(t1v) ? kClampScore : t1v - m;
          if (dk[j] > d1) {
            d2 = d1;
            d1 = dk[j];
            arg1 = j;
          } else if (dk[j] > d2) {
            d2 = dk[j];
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double t0 = vin[2 * i];
          const double m = std::max(t0, vin[2 * i + 1]);
          const double rest_best = best_sum.without(m);
          const double other_gain = (i == arg1) ? d2 : d1;
          f[2 * i + 1] = b[1] + rest_best;
          f[2 * i] = std::max(b[0] + off_sum.without(t0), b[1] + rest_best + other_gain);
        }
        f[2 * n] = off_sum.total();
        f[2 * n + 1] = best_sum.total() + d1;
        break;
      }
    }

    double* old = state.factor_to_var.data() + base;
    for (std::size_t k = 0; k < a; ++k) {
      const std::size_t off = mg.message_offset(s0 + k) - base;
      const auto card = static_cast<std::size_t>(mg.cardinality(mg.slot_variable(s0 + k)));
      double* fr = f + off;
      normalize(fr, card);
      double* o = old + off;
      for (std::size_t c = 0; c < card; ++c) fr[c] = keep * o[c] + damping * fr[c];
      normalize(fr, card);
      for (std::size_t c = 0; c < card; ++c) {
        if (!is_hard(fr[c]) && !is_hard(o[c])) max_delta = std::max(max_delta, std::abs(fr[c] - o[c]));
        o[c] = fr[c];
      }
    }
  }
  ++state.iteration;
  return max_delta;
}

double damped_sweep(const MessageGraph& mg, std::span<const double> perturbed_unaries, MessageState& state,
                    double damping) {
  var_to_factor_update(mg, perturbed_unaries, state);
  return factor_to_var_update(mg, state, damping);
}

void run_sweeps(const MessageGraph& mg, std::span<const double> perturbed_unaries, MessageState& state,
                const SweepConfig& config, std::vector<double>* deltas) {
  check_damping(config.damping);
  for (std::size_t t = 0; t < config.iterations; ++t) {
    const double d = damped_sweep(mg, perturbed_unaries, state, config.damping);
    if (deltas) deltas->push_back(d);
  }
}

Assignment decode(const MessageGraph& mg, const MessageState& state, std::span<const double> perturbed_unaries) {
  if (perturbed_unaries.size() != mg.total_states())
    throw StructuralError("perturbed unaries do not match the graph's state count");
  Assignment x(mg.num_variables(), 0);
  std::vector<double> belief;
  for (std::size_t i = 0; i < mg.num_variables(); ++i) {
    const auto card = static_cast<std::size_t>(mg.cardinality(i));
    const double* u = perturbed_unaries.data() + mg.unary_offset(i);
    belief.assign(u, u + card);
    for (auto s : mg.variable_slots(i)) {
      const double* in = state.factor_to_var.data() + mg.message_offset(s);
      for (std::size_t c = 0; c < card; ++c) belief[c] += in[c];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < card; ++c)
      if (belief[c] > belief[best]) best = c;
    x[i] = static_cast<std::int32_t>(best);
  }
  return x;
}

std::vector<std::vector<double>> dense_factor_messages(std::span<const double> table,
                                                       std::span<const std::int32_t> slot_cards,
                                                       const std::vector<std::vector<double>>& incoming) {
  std::size_t size = 1;
  for (auto c : slot_cards) size *= static_cast<std::size_t>(c);
  if (size != table.size() || incoming.size() != slot_cards.size())
    throw StructuralError("dense factor inputs have inconsistent shapes");
  if (size > kMaxTableStates) throw CapacityError("dense factor exceeds the enumeration budget");
  std::vector<std::vector<double>> out(slot_cards.size());
  std::vector<const double*> in(slot_cards.size());
  std::vector<double*> outp(slot_cards.size());
  for (std::size_t k = 0; k < slot_cards.size(); ++k) {
    if (incoming[k].size() != static_cast<std::size_t>(slot_cards[k]))
      throw StructuralError("incoming message length does not match cardinality");
    out[k].resize(static_cast<std::size_t>(slot_cards[k]));
    in[k] = incoming[k].data();
    outp[k] = out[k].data();
  }
  std::vector<std::int32_t> states;
  std::vector<double> prefix;
  table_messages(table, slot_cards, in, outp, states, prefix);
  for (auto& m : out) normalize(m.data(), m.size());
  return out;
}

}  // namespace pmp
