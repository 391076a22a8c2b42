#include "pmp/models.hpp"

#include <algorithm>
#include <cmath>

#include "pmp/errors.hpp"
#include "pmp/max_product.hpp"
#include "pmp/perturbation.hpp"

namespace pmp {

namespace {

double clamp_bias(std::int32_t observed) { return observed ? -kClampScore : kClampScore; }

void blend(std::vector<double>& old, const std::vector<double>& fresh, double damping) {
  if (damping == 1.0) {
    std::copy(fresh.begin(), fresh.end(), old.begin());
    return;
  }
  const double keep = 1.0 - damping;
  for (std::size_t k = 0; k < old.size(); ++k) old[k] = keep * old[k] + damping * fresh[k];
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

IsingModel IsingModel::zeros(std::size_t n) { return {n, std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0)}; }

IsingModel IsingModel::from_spins(std::span<const double> J, std::span<const double> h) {
  const std::size_t n = h.size();
  if (J.size() != n * n) throw StructuralError("coupling matrix must be n x n");
  IsingModel m = zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (J[i * n + j] != J[j * n + i]) throw StructuralError("coupling matrix must be symmetric");
      m.W[i * n + j] = 4.0 * J[i * n + j];
      row += J[i * n + j];
    }
    m.b[i] = 2.0 * h[i] - 2.0 * row;
  }
  return m;
}

void IsingModel::validate() const {
  check_ising_weights(W, n);
  if (b.size() != n) throw StructuralError("Ising bias length must equal n");
}

double IsingModel::log_score(std::span<const std::int32_t> x) const {
  if (x.size() != n) throw StructuralError("assignment length does not match Ising model");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!x[i]) continue;
    s += b[i];
    for (std::size_t j = i + 1; j < n; ++j)
      if (x[j]) s += W[i * n + j];
  }
  return s;
}

FactorGraph IsingModel::to_factor_graph(bool keep_zero_edges) const {
  validate();
  FactorGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_variable(std::vector<double>{0.0, b[i]});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = W[i * n + j];
      if (w == 0.0 && !keep_zero_edges) continue;
      g.add_factor({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)}, DenseTable{{0.0, 0.0, 0.0, w}});
    }
  return g;
}

std::vector<double> IsingModel::parameters() const {
  std::vector<double> theta;
  theta.reserve(num_parameters());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) theta.push_back(W[i * n + j]);
  theta.insert(theta.end(), b.begin(), b.end());
  return theta;
}

void IsingModel::set_parameters(std::span<const double> theta) {
  if (theta.size() != num_parameters()) throw StructuralError("Ising parameter vector has the wrong length");
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++k) W[i * n + j] = W[j * n + i] = theta[k];
  std::copy(theta.begin() + static_cast<std::ptrdiff_t>(k), theta.end(), b.begin());
}

std::vector<std::int32_t> IsingPmpSampler::sample(const IsingModel& model, std::span<const double> eps,
                                                  const PmpOptions& options, std::span<const std::int32_t> clamp) {
  const std::size_t n = model.n;
  if (eps.size() != 2 * n) throw StructuralError("Ising perturbation must hold two entries per variable");
  if (!clamp.empty() && clamp.size() != n) throw StructuralError("clamp vector length does not match Ising model");
  check_damping(options.damping);
  bias_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    bias_[i] = model.b[i] + eps[2 * i + 1] - eps[2 * i];
    if (!clamp.empty() && clamp[i] >= 0) bias_[i] = clamp_bias(clamp[i]);
  }
  N_.assign(n * n, 0.0);
  fresh_.resize(n * n);
  for (std::size_t t = 0; t < options.sweeps; ++t) {
    ising_sweep_into(n, N_.data(), model.W.data(), bias_.data(), fresh_.data(), scratch_);
    blend(N_, fresh_, options.damping);
  }
  std::vector<std::int32_t> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = bias_[i];
    for (std::size_t k = 0; k < n; ++k) s += N_[k * n + i];
    x[i] = s > 0.0 ? 1 : 0;
    if (!clamp.empty() && clamp[i] >= 0) x[i] = clamp[i];
  }
  return x;
}

std::vector<std::int32_t> IsingPmpSampler::sample(const IsingModel& model, const PmpOptions& options, Rng& rng,
                                                  std::span<const std::int32_t> clamp) {
  const auto eps = draw_gumbel(2 * model.n, rng);
  return sample(model, eps, options, clamp);
}

void ising_gibbs_sweep(const IsingModel& model, std::span<std::int32_t> x, Rng& rng) {
  const std::size_t n = model.n;
  for (std::size_t i = 0; i < n; ++i) {
    double z = model.b[i];
    const double* w = model.W.data() + i * n;
    for (std::size_t j = 0; j < n; ++j)
      if (x[j]) z += w[j];
    x[i] = rng.uniform() < logistic(z) ? 1 : 0;
  }
}

RbmModel RbmModel::zeros(std::size_t m, std::size_t n) {
  return {m, n, std::vector<double>(m * n, 0.0), std::vector<double>(m, 0.0), std::vector<double>(n, 0.0)};
}

void RbmModel::validate() const {
  if (W.size() != n_hidden * n_visible || b.size() != n_hidden || c.size() != n_visible)
    throw StructuralError("RBM parameter shapes do not match");
}

double RbmModel::log_score(std::span<const std::int32_t> h, std::span<const std::int32_t> v) const {
  if (h.size() != n_hidden || v.size() != n_visible) throw StructuralError("RBM state shapes do not match");
  double s = 0.0;
  for (std::size_t i = 0; i < n_hidden; ++i) {
    if (!h[i]) continue;
    s += b[i];
    for (std::size_t j = 0; j < n_visible; ++j)
      if (v[j]) s += W[i * n_visible + j];
  }
  for (std::size_t j = 0; j < n_visible; ++j)
    if (v[j]) s += c[j];
  return s;
}

double RbmModel::free_log_score(std::span<const std::int32_t> v) const {
  if (v.size() != n_visible) throw StructuralError("visible state length does not match RBM");
  double s = 0.0;
  for (std::size_t j = 0; j < n_visible; ++j)
    if (v[j]) s += c[j];
  for (std::size_t i = 0; i < n_hidden; ++i) {
    double z = b[i];
    for (std::size_t j = 0; j < n_visible; ++j)
      if (v[j]) z += W[i * n_visible + j];
    s += softplus(z);
  }
  return s;
}

FactorGraph RbmModel::to_factor_graph() const {
  validate();
  FactorGraph g;
  std::vector<std::uint32_t> vars;
  for (std::size_t i = 0; i < n_hidden; ++i) vars.push_back(g.add_variable(std::vector<double>{0.0, b[i]}));
  for (std::size_t j = 0; j < n_visible; ++j) vars.push_back(g.add_variable(std::vector<double>{0.0, c[j]}));
  g.add_factor(std::move(vars), RbmBlock{static_cast<std::uint32_t>(n_hidden), static_cast<std::uint32_t>(n_visible), W});
  return g;
}

std::vector<double> RbmModel::parameters() const {
  std::vector<double> theta(W);
  theta.insert(theta.end(), b.begin(), b.end());
  theta.insert(theta.end(), c.begin(), c.end());
  return theta;
}

void RbmModel::set_parameters(std::span<const double> theta) {
  if (theta.size() != num_parameters()) throw StructuralError("RBM parameter vector has the wrong length");
  const auto mn = static_cast<std::ptrdiff_t>(W.size());
  const auto m = static_cast<std::ptrdiff_t>(n_hidden);
  std::copy(theta.begin(), theta.begin() + mn, W.begin());
  std::copy(theta.begin() + mn, theta.begin() + mn + m, b.begin());
  std::copy(theta.begin() + mn + m, theta.end(), c.begin());
}

RbmState RbmPmpSampler::sample(const RbmModel& model, std::span<const double> eps_h, std::span<const double> eps_v,
                               const PmpOptions& options, std::span<const std::int32_t> clamp_visible) {
  const std::size_t m = model.n_hidden;
  const std::size_t n = model.n_visible;
  if (eps_h.size() != 2 * m || eps_v.size() != 2 * n)
    throw StructuralError("RBM perturbation must hold two entries per unit");
  if (!clamp_visible.empty() && clamp_visible.size() != n)
    throw StructuralError("visible clamp length does not match RBM");
  check_damping(options.damping);
  bh_.resize(m);
  cv_.resize(n);
  for (std::size_t i = 0; i < m; ++i) bh_[i] = model.b[i] + eps_h[2 * i + 1] - eps_h[2 * i];
  for (std::size_t j = 0; j < n; ++j)
    cv_[j] = clamp_visible.empty() ? model.c[j] + eps_v[2 * j + 1] - eps_v[2 * j] : clamp_bias(clamp_visible[j]);

  if (messages_.n_hidden != m || messages_.n_visible != n) {
    messages_ = RbmMessages::zeros(m, n);
    fresh_ = RbmMessages::zeros(m, n);
  } else {
    std::fill(messages_.hidden_to_visible.begin(), messages_.hidden_to_visible.end(), 0.0);
    std::fill(messages_.visible_to_hidden.begin(), messages_.visible_to_hidden.end(), 0.0);
  }
  for (std::size_t t = 0; t < options.sweeps; ++t) {
    rbm_sweep_into(messages_, model.W.data(), bh_.data(), cv_.data(), fresh_, totals_);
    blend(messages_.hidden_to_visible, fresh_.hidden_to_visible, options.damping);
    blend(messages_.visible_to_hidden, fresh_.visible_to_hidden, options.damping);
  }

  RbmState out{std::vector<std::int32_t>(m), std::vector<std::int32_t>(n)};
  for (std::size_t i = 0; i < m; ++i) {
    double s = bh_[i];
    const double* row = messages_.visible_to_hidden.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) s += row[j];
    out.h[i] = s > 0.0 ? 1 : 0;
  }
  std::vector<double>& col = totals_;
  col.assign(cv_.begin(), cv_.end());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = messages_.hidden_to_visible.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) col[j] += row[j];
  }
  for (std::size_t j = 0; j < n; ++j)
    out.v[j] = clamp_visible.empty() ? (col[j] > 0.0 ? 1 : 0) : clamp_visible[j];
  return out;
}

RbmState RbmPmpSampler::sample(const RbmModel& model, const PmpOptions& options, Rng& rng,
                               std::span<const std::int32_t> clamp_visible) {
  const auto eps_h = draw_gumbel(2 * model.n_hidden, rng);
  const auto eps_v = draw_gumbel(2 * model.n_visible, rng);
  return sample(model, eps_h, eps_v, options, clamp_visible);
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void sample_hidden(const RbmModel& model, std::span<const std::int32_t> v, std::span<std::int32_t> h, Rng& rng) {
  const std::size_t n = model.n_visible;
  for (std::size_t i = 0; i < model.n_hidden; ++i) {
    double z = model.b[i];
    const double* w = model.W.data() + i * n;
    for (std::size_t j = 0; j < n; ++j)
      if (v[j]) z += w[j];
    h[i] = rng.uniform() < logistic(z) ? 1 : 0;
  }
}

void sample_visible(const RbmModel& model, std::span<const std::int32_t> h, std::span<std::int32_t> v, Rng& rng) {
  const std::size_t n = model.n_visible;
  std::vector<double> z(model.c);
  for (std::size_t i = 0; i < model.n_hidden; ++i) {
    if (!h[i]) continue;
    const double* w = model.W.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) z[j] += w[j];
  }
  for (std::size_t j = 0; j < n; ++j) v[j] = rng.uniform() < logistic(z[j]) ? 1 : 0;
}

void block_gibbs_rbm_sweep(const RbmModel& model, RbmState& state, Rng& rng) {
  if (state.h.size() != model.n_hidden || state.v.size() != model.n_visible)
    throw StructuralError("RBM state shapes do not match");
  sample_hidden(model, state.v, state.h, rng);
  sample_visible(model, state.h, state.v, rng);
}

IsingModel ising_from_graph(const FactorGraph& g) {
  const std::size_t n = g.num_variables();
  auto model = IsingModel::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.cardinality(i) != 2) throw StructuralError("Ising conversion needs binary variables");
    const auto u = g.unary(i);
    model.b[i] += u[1] - u[0];
  }
  const std::int32_t cards[2] = {2, 2};
  for (const auto& f : g.factors()) {
    if (f.vars.size() != 2 || !(std::holds_alternative<DenseTable>(f.kind) || std::holds_alternative<IsingEdge>(f.kind)))
      throw StructuralError("Ising conversion needs pairwise factors");
    const auto t = to_dense_table(f, cards).log_potentials;
    const std::size_t i = f.vars[0], j = f.vars[1];
    if (i == j) throw StructuralError("Ising conversion needs distinct endpoints");
    const double w = t[0] - t[1] - t[2] + t[3];
    model.W[i * n + j] += w;
    model.W[j * n + i] += w;
    model.b[i] += t[2] - t[0];
    model.b[j] += t[1] - t[0];
  }
  return model;
}

RbmModel rbm_from_graph(const FactorGraph& g) {
  if (g.num_factors() != 1) throw StructuralError("RBM conversion needs a single bipartite block");
  const auto& f = g.factors()[0];
  const auto* block = std::get_if<RbmBlock>(&f.kind);
  if (!block) throw StructuralError("RBM conversion needs a single bipartite block");
  const std::size_t m = block->n_hidden, n = block->n_visible;
  if (g.num_variables() != m + n) throw StructuralError("RBM conversion needs every variable in the block");
  auto model = RbmModel::zeros(m, n);
  model.W = block->weights;
  for (std::size_t k = 0; k < m + n; ++k) {
    const std::size_t var = f.vars[k];
    if (g.cardinality(var) != 2) throw StructuralError("RBM conversion needs binary variables");
    const auto u = g.unary(var);
    (k < m ? model.b[k] : model.c[k - m]) = u[1] - u[0];
  }
  return model;
}

}  // namespace pmp
