#include "pmp/factor_graph.hpp"

#include <algorithm>
#include <string>


#include "pmp/errors.hpp"

namespace pmp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_binary(const std::vector<std::int32_t>& cards, std::span<const std::uint32_t> vars,
                    const char* kind) {
  for (auto v : vars) {
    if (cards[v] != 2) throw StructuralError(std::string(kind) + " factor requires binary variables");
  }
}

}  // namespace

std::uint32_t FactorGraph::add_variable(std::int32_t cardinality) {
  if (cardinality < 2) throw StructuralError("variable cardinality must be at least 2");
  return add_variable(std::vector<double>(static_cast<std::size_t>(cardinality), 0.0));
}

std::uint32_t FactorGraph::add_variable(std::vector<double> unary) {
  if (unary.size() < 2) throw StructuralError("variable cardinality must be at least 2");
  const auto id = static_cast<std::uint32_t>(cards_.size());
  cards_.push_back(static_cast<std::int32_t>(unary.size()));
  unary_offsets_.push_back(unaries_.size());
  unaries_.insert(unaries_.end(), unary.begin(), unary.end());
  adjacency_.emplace_back();
  num_params_ += unary.size();
  for (auto& off : param_offsets_) off += unary.size();
  return id;
}

std::size_t FactorGraph::add_factor(std::vector<std::uint32_t> vars, FactorKind kind) {
  if (vars.empty()) throw StructuralError("factor needs at least one neighbor");
  for (auto v : vars) {
    if (v >= cards_.size()) throw StructuralError("factor neighbor " + std::to_string(v) + " is not a variable");
  }
  {
    auto sorted = vars;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw StructuralError("factor neighbors must be distinct");
  }
  std::visit(Overloaded{
                 [&](const DenseTable& t) {
                   std::size_t size = 1;
                   for (auto v : vars) size *= static_cast<std::size_t>(cards_[v]);
                   if (t.log_potentials.size() != size)
                     throw StructuralError("dense table size " + std::to_string(t.log_potentials.size()) +
                                           " does not match joint state count " + std::to_string(size));
                 },
                 [&](const IsingEdge&) {
                   if (vars.size() != 2) throw StructuralError("Ising edge needs exactly two neighbors");
                   require_binary(cards_, vars, "Ising");
                 },
                 [&](const RbmBlock& b) {
                   if (b.n_hidden == 0 || b.n_visible == 0 || b.n_hidden + b.n_visible != vars.size())
                     throw StructuralError("RBM block group sizes do not match its neighbors");
                   if (b.weights.size() != std::size_t{b.n_hidden} * b.n_visible)
                     throw StructuralError("RBM block weight matrix has the wrong size");
                   require_binary(cards_, vars, "RBM");
                 },
                 [&](const OrFactor&) {
                   if (vars.size() < 2) throw StructuralError("OR factor needs at least one top and a bottom");
                   require_binary(cards_, vars, "OR");
                 },
                 [&](const AndFactor&) {
                   if (vars.size() != 3) throw StructuralError("AND factor needs exactly two tops and a bottom");
                   require_binary(cards_, vars, "AND");
                 },
             },
             kind);
  const std::size_t f = factors_.size();
  for (std::size_t s = 0; s < vars.size(); ++s)
    adjacency_[vars[s]].push_back({static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(s)});
  param_offsets_.push_back(num_params_);
  num_params_ += parameter_count(kind);
  factors_.push_back({std::move(vars), std::move(kind)});
  return f;
}

std::vector<VariableSpec> FactorGraph::variables() const {
  std::vector<VariableSpec> out;
  out.reserve(cards_.size());
  for (std::size_t i = 0; i < cards_.size(); ++i) out.push_back({static_cast<std::uint32_t>(i), cards_[i]});
  return out;
}

std::span<const double> FactorGraph::unary(std::size_t var) const {
  return std::span<const double>(unaries_).subspan(unary_offsets_.at(var), static_cast<std::size_t>(cards_[var]));
}

void FactorGraph::set_unary(std::size_t var, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(cardinality(var)))
    throw StructuralError("unary length does not match cardinality");
  std::copy(values.begin(), values.end(), unaries_.begin() + static_cast<std::ptrdiff_t>(unary_offsets_[var]));
}

std::vector<double> FactorGraph::parameters() const {
  std::vector<double> theta(unaries_);
  theta.reserve(num_params_);
  for (const auto& f : factors_) {
    std::visit(Overloaded{
                   [&](const DenseTable& t) { theta.insert(theta.end(), t.log_potentials.begin(), t.log_potentials.end()); },
                   [&](const IsingEdge& e) { theta.push_back(e.weight); },
                   [&](const RbmBlock& b) { theta.insert(theta.end(), b.weights.begin(), b.weights.end()); },
                   [](const auto&) {},
               },
               f.kind);
  }
  return theta;
}

void FactorGraph::set_parameters(std::span<const double> theta) {
  if (theta.size() != num_params_)
    throw StructuralError("parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(num_params_));
  std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(unaries_.size()), unaries_.begin());
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const auto* p = theta.data() + param_offsets_[f];
    std::visit(Overloaded{
                   [&](DenseTable& t) { std::copy(p, p + t.log_potentials.size(), t.log_potentials.begin()); },
                   [&](IsingEdge& e) { e.weight = *p; },
                   [&](RbmBlock& b) { std::copy(p, p + b.weights.size(), b.weights.begin()); },
                   [](auto&) {},
               },
               factors_[f].kind);
  }
}

bool FactorGraph::operator==(const FactorGraph& other) const {
  if (cards_ != other.cards_ || unaries_ != other.unaries_ || factors_.size() != other.factors_.size()) return false;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const auto& a = factors_[f];
    const auto& b = other.factors_[f];
    if (a.vars != b.vars || a.kind.index() != b.kind.index()) return false;
  }
  return parameters() == other.parameters();
}

std::size_t parameter_count(const FactorKind& kind) {
  return std::visit(Overloaded{
                        [](const DenseTable& t) { return t.log_potentials.size(); },
                        [](const IsingEdge&) { return std::size_t{1}; },
                        [](const RbmBlock& b) { return b.weights.size(); },
                        [](const auto&) { return std::size_t{0}; },
                    },
                    kind);
}

std::size_t dense_index(std::span<const std::int32_t> slot_cards, std::span<const std::int32_t> states) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < states.size(); ++k) idx = idx * static_cast<std::size_t>(slot_cards[k]) + states[k];
  return idx;
}

double factor_log_potential(const Factor& factor, std::span<const std::int32_t> states,
                            std::span<const std::int32_t> slot_cards) {
  return std::visit(
      Overloaded{
          [&](const DenseTable& t) { return t.log_potentials[dense_index(slot_cards, states)]; },
          [&](const IsingEdge& e) { return e.weight * (2.0 * states[0] - 1.0) * (2.0 * states[1] - 1.0); },
          [&](const RbmBlock& b) {
            double s = 0.0;
            for (std::uint32_t i = 0; i < b.n_hidden; ++i) {
              if (!states[i]) continue;
              const double* row = b.weights.data() + std::size_t{i} * b.n_visible;
              for (std::uint32_t j = 0; j < b.n_visible; ++j)
                if (states[b.n_hidden + j]) s += row[j];
            }
            return s;
          },
          [&](const OrFactor&) {
            const std::size_t n = states.size() - 1;
            bool any = false;
            for (std::size_t k = 0; k < n; ++k) any = any || states[k] != 0;
            return (any == (states[n] != 0)) ? 0.0 : kClampScore;
          },
          [&](const AndFactor&) {
            const bool both = states[0] != 0 && states[1] != 0;
            return (both == (states[2] != 0)) ? 0.0 : kClampScore;
          },
      },
      factor.kind);
}

namespace {

std::size_t graph_dense_index(std::span<const std::uint32_t> vars, std::span<const std::int32_t> cards,
                              std::span<const std::int32_t> states) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < vars.size(); ++k) idx = idx * static_cast<std::size_t>(cards[vars[k]]) + states[k];
  return idx;
}

double factor_score(const Factor& f, std::span<const std::int32_t> cards, std::span<const std::int32_t> x,
                    std::vector<std::int32_t>& scratch) {
  scratch.resize(f.vars.size());
  for (std::size_t k = 0; k < f.vars.size(); ++k) scratch[k] = x[f.vars[k]];
  if (const auto* t = std::get_if<DenseTable>(&f.kind))
    return t->log_potentials[graph_dense_index(f.vars, cards, scratch)];
  return factor_log_potential(f, scratch, {});
}

}  // namespace

DenseTable to_dense_table(const Factor& factor, std::span<const std::int32_t> cards) {
  if (const auto* t = std::get_if<DenseTable>(&factor.kind)) return *t;
  std::size_t size = 1;
  for (std::size_t k = 0; k < factor.vars.size(); ++k) {
    size *= static_cast<std::size_t>(cards[k]);
    if (size > (std::size_t{1} << 20)) throw CapacityError("factor has too many joint states for a dense table");
  }
  DenseTable table{std::vector<double>(size)};
  std::vector<std::int32_t> states(factor.vars.size(), 0);
  for (std::size_t idx = 0; idx < size; ++idx) {
    table.log_potentials[idx] = factor_log_potential(factor, states, cards);
    for (std::size_t k = states.size(); k-- > 0;) {
      if (++states[k] < cards[k]) break;
      states[k] = 0;
    }
  }
  return table;
}

void validate_assignment(const FactorGraph& g, std::span<const std::int32_t> x) {
  if (x.size() != g.num_variables())
    throw StructuralError("assignment has " + std::to_string(x.size()) + " entries, graph has " +
                          std::to_string(g.num_variables()) + " variables");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || x[i] >= g.cardinality(i))
      throw StructuralError("state " + std::to_string(x[i]) + " out of range for variable " + std::to_string(i));
  }
}

double log_score(const FactorGraph& g, std::span<const std::int32_t> x) {
  validate_assignment(g, x);
  double s = 0.0;
  const auto u = g.unaries();
  for (std::size_t i = 0; i < x.size(); ++i) s += u[g.unary_offset(i) + static_cast<std::size_t>(x[i])];
  std::vector<std::int32_t> scratch;
  for (const auto& f : g.factors()) s += factor_score(f, g.cardinalities(), x, scratch);
  return s;
}

double energy(const FactorGraph& g, std::span<const std::int32_t> x) { return -log_score(g, x); }

std::vector<double> sufficient_stats(const FactorGraph& g, std::span<const std::int32_t> x) {
  validate_assignment(g, x);
  std::vector<double> phi(g.num_parameters(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) phi[g.unary_offset(i) + static_cast<std::size_t>(x[i])] = 1.0;
  std::vector<std::int32_t> states;
  for (std::size_t f = 0; f < g.num_factors(); ++f) {
    const auto& fac = g.factor(f);
    double* out = phi.data() + g.factor_parameter_offset(f);
    states.resize(fac.vars.size());
    for (std::size_t k = 0; k < fac.vars.size(); ++k) states[k] = x[fac.vars[k]];
    std::visit(Overloaded{
                   [&](const DenseTable&) { out[graph_dense_index(fac.vars, g.cardinalities(), states)] = 1.0; },
                   [&](const IsingEdge&) { out[0] = (2.0 * states[0] - 1.0) * (2.0 * states[1] - 1.0); },
                   [&](const RbmBlock& b) {
                     for (std::uint32_t i = 0; i < b.n_hidden; ++i)
                       for (std::uint32_t j = 0; j < b.n_visible; ++j)
                         out[std::size_t{i} * b.n_visible + j] = states[i] * states[b.n_hidden + j];
                   },
                   [](const auto&) {},
               },
               fac.kind);
  }
  return phi;
}

FactorGraph clamp(const FactorGraph& g, const Evidence& evidence) {
  FactorGraph out = g;
  std::vector<double> unary;
  for (const auto& obs : evidence) {
    if (obs.var >= g.num_variables()) throw StructuralError("evidence names an unknown variable");
    const auto card = g.cardinality(obs.var);
    if (obs.state < 0 || obs.state >= card)
      throw StructuralError("evidence state " + std::to_string(obs.state) + " out of range for variable " +
                            std::to_string(obs.var));
    unary.assign(static_cast<std::size_t>(card), kClampScore);
    unary[static_cast<std::size_t>(obs.state)] = 0.0;
    out.set_unary(obs.var, unary);
  }
  return out;
}

Evidence evidence_from(std::span<const std::uint32_t> vars, std::span<const std::int32_t> x) {
  Evidence ev;
  ev.reserve(vars.size());
  for (auto v : vars) ev.push_back({v, x[v]});
  return ev;
}

}  // namespace pmp
