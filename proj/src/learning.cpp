#include "pmp/learning.hpp"

#include <algorithm>
#include <cmath>

#include "pmp/errors.hpp"
#include "pmp/parallel.hpp"

namespace pmp {

namespace {

using Clock = std::chrono::steady_clock;

double norm2(std::span<const double> g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

void shrink(TrainState& state, const TrainConfig& config, std::span<const std::uint8_t> penalized) {
  if (config.l1 <= 0.0 || penalized.empty()) return;
  const double t = config.learning_rate * config.l1;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    if (!penalized[k]) continue;
    double& w = state.theta[k];
    w = w > t ? w - t : (w < -t ? w + t : 0.0);
  }
}

// Outer loop shared by every training path; grad_fn fills the ascent
// direction of one iteration.
class Loop {
 public:
  Loop(const TrainConfig& config, const MetricsSink& sink) : config_(config), sink_(sink), start_(Clock::now()) {}

  template <class GradFn>
  void run(TrainState& state, std::span<const std::uint8_t> penalized, GradFn&& grad_fn) {
    std::vector<double> grad(state.theta.size());
    while (state.iteration < config_.iterations) {
      if (config_.budget_secs > 0.0 && elapsed_ms() > 1000.0 * config_.budget_secs) {
        state.stopped_early = true;
        return;
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      grad_fn(state, grad);
      optimizer_step(state, grad, config_, penalized);
      ++state.iteration;
      if (sink_) sink_({state.iteration, norm2(grad), elapsed_ms()});
    }
  }

 private:
  double elapsed_ms() const { return std::chrono::duration<double, std::milli>(Clock::now() - start_).count(); }

  const TrainConfig& config_;
  const MetricsSink& sink_;
  Clock::time_point start_;
};

std::vector<std::uint8_t> factor_mask(const FactorGraph& g, const ParameterTying& tying) {
  std::vector<std::uint8_t> mask(tying.num_free, 0);
  const std::size_t unary_params = g.total_states();
  for (std::size_t k = unary_params; k < tying.index.size(); ++k)
    if (tying.index[k] >= 0) mask[static_cast<std::size_t>(tying.index[k])] = 1;
  return mask;
}

void check_tying(const FactorGraph& g, const ParameterTying& tying) {
  if (tying.index.size() != g.num_parameters()) throw StructuralError("parameter tying does not match the graph");
}

std::vector<double> graph_theta(const FactorGraph& g, const ParameterTying& tying, std::span<const double> learned) {
  auto theta = g.parameters();
  tying.expand(learned, theta);
  return theta;
}

void check_binary_rows(const SampleSet& data, std::size_t n) {
  if (data.empty()) throw ParameterError("training data is empty");
  if (data.num_vars != n) throw StructuralError("data width does not match the model");
  for (auto v : data.values)
    if (v > 1) throw StructuralError("training data must be binary");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (batch == 0) throw ParameterError("minibatch size must be at least 1");
  if (sweeps == 0) throw ParameterError("sampling needs at least one sweep");
  if (l1 < 0.0) throw ParameterError("l1 strength must be non-negative");
  if (init_std < 0.0) throw ParameterError("initial standard deviation must be non-negative");
  if (optimizer == Optimizer::Adam && (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0))
    throw ParameterError("Adam betas must lie in [0, 1)");
  check_damping(damping);
}

TrainState init_train_state(std::size_t size, const TrainConfig& config, Rng& rng) {
  TrainState s;
  s.theta.resize(size);
  for (double& t : s.theta) t = config.init_std * rng.normal();
  s.m.assign(size, 0.0);
  s.v.assign(size, 0.0);
  return s;
}

void sgd_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config,
              std::span<const std::uint8_t> penalized) {
  if (gradient.size() != state.theta.size()) throw StructuralError("gradient length does not match parameters");
  for (std::size_t k = 0; k < gradient.size(); ++k) state.theta[k] += config.learning_rate * gradient[k];
  shrink(state, config, penalized);
}

void adam_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config,
               std::span<const std::uint8_t> penalized) {
  const std::size_t n = state.theta.size();
  if (gradient.size() != n) throw StructuralError("gradient length does not match parameters");
  state.m.resize(n, 0.0);
  state.v.resize(n, 0.0);
  const double t = static_cast<double>(state.iteration + 1);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < n; ++k) {
    state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * gradient[k];
    state.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * gradient[k] * gradient[k];
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    state.theta[k] += config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
  shrink(state, config, penalized);
}

void optimizer_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config,
                    std::span<const std::uint8_t> penalized) {
  if (config.optimizer == Optimizer::Adam)
    adam_step(state, gradient, config, penalized);
  else
    sgd_step(state, gradient, config, penalized);
}

ParameterTying ParameterTying::identity(const FactorGraph& g) {
  ParameterTying t;
  t.index.resize(g.num_parameters());
  for (std::size_t k = 0; k < t.index.size(); ++k) t.index[k] = static_cast<std::int64_t>(k);
  t.num_free = t.index.size();
  return t;
}

ParameterTying ParameterTying::factors_only(const FactorGraph& g) {
  ParameterTying t;
  t.index.assign(g.num_parameters(), -1);
  for (std::size_t k = g.total_states(); k < t.index.size(); ++k)
    t.index[k] = static_cast<std::int64_t>(t.num_free++);
  return t;
}

ParameterTying ParameterTying::shared_factors(const FactorGraph& g) {
  ParameterTying t;
  t.index.assign(g.num_parameters(), -1);
  for (std::size_t k = g.total_states(); k < t.index.size(); ++k) t.index[k] = 0;
  t.num_free = g.num_parameters() > g.total_states() ? 1 : 0;
  return t;
}

std::vector<double> ParameterTying::reduce(std::span<const double> graph_values) const {
  if (graph_values.size() != index.size()) throw StructuralError("vector does not match the tying layout");
  std::vector<double> out(num_free, 0.0);
  for (std::size_t k = 0; k < index.size(); ++k)
    if (index[k] >= 0) out[static_cast<std::size_t>(index[k])] += graph_values[k];
  return out;
}

void ParameterTying::expand(std::span<const double> learned, std::span<double> graph_values) const {
  if (learned.size() != num_free || graph_values.size() != index.size())
    throw StructuralError("vector does not match the tying layout");
  for (std::size_t k = 0; k < index.size(); ++k)
    if (index[k] >= 0) graph_values[k] = learned[static_cast<std::size_t>(index[k])];
}

bool Dataset::fully_observed(const FactorGraph& g) const {
  if (visible.size() != g.num_variables()) return false;
  for (std::size_t k = 0; k < visible.size(); ++k)
    if (visible[k] != k) return false;
  return true;
}

Dataset Dataset::full(SampleSet rows) {
  Dataset d;
  d.visible.resize(rows.num_vars);
  for (std::size_t k = 0; k < d.visible.size(); ++k) d.visible[k] = static_cast<std::uint32_t>(k);
  d.rows = std::move(rows);
  return d;
}

std::vector<double> grad_estimate(const FactorGraph& g, const Dataset& data, std::size_t batch,
                                  const PmpOptions& options, std::uint64_t seed, std::uint64_t iteration) {
  if (batch == 0 || data.rows.empty()) throw ParameterError("gradient estimate needs data and a non-empty minibatch");
  if (data.rows.num_vars != data.visible.size()) throw StructuralError("dataset rows do not match its visible list");
  const bool full = data.fully_observed(g);
  const PmpSampler sampler(g);
  std::vector<std::vector<double>> partial(batch);
  parallel_for(batch, [&](std::size_t s) {
    Rng pick(seed, {iteration, s, 0});
    const auto row = data.rows.row(pick.below(data.rows.size()));
    Assignment pos;
    if (full) {
      pos.assign(row.begin(), row.end());
    } else {
      Evidence ev;
      for (std::size_t k = 0; k < row.size(); ++k) ev.push_back({data.visible[k], static_cast<std::int32_t>(row[k])});
      pos = pmp_posterior_sample(g, ev, options.sweeps, pick, options.damping);
    }
    Rng neg_rng(seed, {iteration, s, 1});
    const Assignment neg = sampler.sample(g.unaries(), options, neg_rng);
    auto phi = sufficient_stats(g, pos);
    const auto phi_neg = sufficient_stats(g, neg);
    for (std::size_t k = 0; k < phi.size(); ++k) phi[k] -= phi_neg[k];
    partial[s] = std::move(phi);
  });
  std::vector<double> grad(g.num_parameters(), 0.0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += p[k];
  for (double& v : grad) v /= static_cast<double>(batch);
  return grad;
}

std::vector<double> pmp_moments(const FactorGraph& g, std::size_t batch, const PmpOptions& options, std::uint64_t seed,
                                std::uint64_t iteration) {
  if (batch == 0) throw ParameterError("moment estimate needs a non-empty batch");
  const PmpSampler sampler(g);
  std::vector<std::vector<double>> partial(batch);
  parallel_for(batch, [&](std::size_t s) {
    Rng rng(seed, {iteration, s, 1});
    partial[s] = sufficient_stats(g, sampler.sample(g.unaries(), options, rng));
  });
  std::vector<double> out(g.num_parameters(), 0.0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += p[k];
  for (double& v : out) v /= static_cast<double>(batch);
  return out;
}

TrainState train(FactorGraph& g, const Dataset& data, const TrainConfig& config, std::uint64_t seed,
                 const ParameterTying& tying, const MetricsSink& sink) {
  config.validate();
  check_tying(g, tying);
  Rng init_rng(seed, {~std::uint64_t{0}});
  TrainState state = init_train_state(tying.num_free, config, init_rng);
  g.set_parameters(graph_theta(g, tying, state.theta));
  const auto mask = factor_mask(g, tying);
  const PmpOptions options{config.sweeps, config.damping};
  Loop(config, sink).run(state, mask, [&](TrainState& st, std::vector<double>& grad) {
    g.set_parameters(graph_theta(g, tying, st.theta));
    grad = tying.reduce(grad_estimate(g, data, config.batch, options, seed, st.iteration));
  });
  g.set_parameters(graph_theta(g, tying, state.theta));
  return state;
}

TrainState exact_moment_train(FactorGraph& g, std::span<const double> data_moments, const TrainConfig& config,
                              std::uint64_t seed, const ParameterTying& tying, const MetricsSink& sink) {
  config.validate();
  check_tying(g, tying);
  if (data_moments.size() != g.num_parameters()) throw StructuralError("moment vector does not match the graph");
  const auto positive = tying.reduce(data_moments);
  Rng init_rng(seed, {~std::uint64_t{0}});
  TrainState state = init_train_state(tying.num_free, config, init_rng);
  g.set_parameters(graph_theta(g, tying, state.theta));
  const auto mask = factor_mask(g, tying);
  const PmpOptions options{config.sweeps, config.damping};
  Loop(config, sink).run(state, mask, [&](TrainState& st, std::vector<double>& grad) {
    g.set_parameters(graph_theta(g, tying, st.theta));
    const auto negative = tying.reduce(pmp_moments(g, config.batch, options, seed, st.iteration));
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = positive[k] - negative[k];
  });
  g.set_parameters(graph_theta(g, tying, state.theta));
  return state;
}

TrainState train_ising(IsingModel& model, const SampleSet& data, const TrainConfig& config, SamplingMethod method,
                       std::uint64_t seed, const MetricsSink& sink) {
  config.validate();
  model.validate();
  check_binary_rows(data, model.n);
  if (method == SamplingMethod::Pcd) method = SamplingMethod::Gibbs;
  const std::size_t n = model.n;
  const std::size_t S = config.batch;
  Rng init_rng(seed, {~std::uint64_t{0}});
  TrainState state = init_train_state(model.num_parameters(), config, init_rng);
  model.set_parameters(state.theta);
  std::vector<std::uint8_t> mask(model.num_parameters(), 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n * (n - 1) / 2), 1);

  // Persistent chains for the Gibbs method start uniformly at random.
  std::vector<std::vector<std::int32_t>> chains(S, std::vector<std::int32_t>(n));
  for (std::size_t s = 0; s < S; ++s) {
    Rng rng(seed, {~std::uint64_t{0}, s});
    for (auto& x : chains[s]) x = static_cast<std::int32_t>(rng.below(2));
  }
  const PmpOptions options{config.sweeps, config.damping};
  std::vector<std::vector<double>> partial(S);
  Loop(config, sink).run(state, mask, [&](TrainState& st, std::vector<double>& grad) {
    model.set_parameters(st.theta);
    parallel_for(S, [&](std::size_t s) {
      std::vector<double> g(model.num_parameters(), 0.0);
      Rng pick(seed, {st.iteration, s, 0});
      model.accumulate_stats(data.row(pick.below(data.size())), 1.0, std::span<double>(g));
      Rng rng(seed, {st.iteration, s, 1});
      auto& x = chains[s];
      if (method == SamplingMethod::Pmp) {
        IsingPmpSampler sampler;
        x = sampler.sample(model, options, rng);
      } else {
        if (method == SamplingMethod::GibbsReset)
          for (auto& xi : x) xi = static_cast<std::int32_t>(rng.below(2));
        for (std::size_t t = 0; t < config.sweeps; ++t) ising_gibbs_sweep(model, x, rng);
      }
      model.accumulate_stats(std::span<const std::int32_t>(x), -1.0, std::span<double>(g));
      partial[s] = std::move(g);
    });
    for (const auto& p : partial)
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += p[k];
    for (double& v : grad) v /= static_cast<double>(S);
  });
  model.set_parameters(state.theta);
  return state;
}

TrainState train_rbm(RbmModel& model, const SampleSet& data, const TrainConfig& config, SamplingMethod method,
                     std::uint64_t seed, const MetricsSink& sink) {
  config.validate();
  model.validate();
  check_binary_rows(data, model.n_visible);
  if (method == SamplingMethod::Gibbs) method = SamplingMethod::Pcd;
  const std::size_t m = model.n_hidden;
  const std::size_t n = model.n_visible;
  const std::size_t S = config.batch;
  Rng init_rng(seed, {~std::uint64_t{0}});
  TrainState state = init_train_state(model.num_parameters(), config, init_rng);
  model.set_parameters(state.theta);
  std::vector<std::uint8_t> mask(model.num_parameters(), 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(m * n), 1);

  std::vector<RbmState> chains(S, RbmState{std::vector<std::int32_t>(m), std::vector<std::int32_t>(n)});
  for (std::size_t s = 0; s < S; ++s) {
    Rng rng(seed, {~std::uint64_t{0}, s});
    for (auto& v : chains[s].v) v = static_cast<std::int32_t>(rng.below(2));
  }
  const PmpOptions options{config.sweeps, config.damping};
  std::vector<std::vector<double>> partial(S);

  // Positive/negative statistics with the hidden layer replaced by p(h | v).
  auto add_expected = [&](std::span<const std::int32_t> v, double weight, std::vector<double>& g) {
    for (std::size_t i = 0; i < m; ++i) {
      double z = model.b[i];
      const double* w = model.W.data() + i * n;
      for (std::size_t j = 0; j < n; ++j)
        if (v[j]) z += w[j];
      const double p = weight * logistic(z);
      double* row = g.data() + i * n;
      for (std::size_t j = 0; j < n; ++j)
        if (v[j]) row[j] += p;
      g[m * n + i] += p;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (v[j]) g[m * n + m + j] += weight;
  };

  Loop(config, sink).run(state, mask, [&](TrainState& st, std::vector<double>& grad) {
    model.set_parameters(st.theta);
    parallel_for(S, [&](std::size_t s) {
      std::vector<double> g(model.num_parameters(), 0.0);
      Rng pick(seed, {st.iteration, s, 0});
      const auto row = data.row(pick.below(data.size()));
      std::vector<std::int32_t> v(row.begin(), row.end());
      Rng rng(seed, {st.iteration, s, 1});
      if (method == SamplingMethod::Pmp) {
        RbmPmpSampler sampler;
        // Given v the hidden units decouple, so one undamped sweep is converged.
        const auto pos = sampler.sample(model, PmpOptions{1, 1.0}, pick, v);
        model.accumulate_stats(std::span<const std::int32_t>(pos.h), std::span<const std::int32_t>(pos.v), 1.0,
                               std::span<double>(g));
        const auto neg = sampler.sample(model, options, rng);
        model.accumulate_stats(std::span<const std::int32_t>(neg.h), std::span<const std::int32_t>(neg.v), -1.0,
                               std::span<double>(g));
      } else {
        add_expected(v, 1.0, g);
        auto& chain = chains[s];
        if (method == SamplingMethod::GibbsReset)
          for (auto& vj : chain.v) vj = static_cast<std::int32_t>(rng.below(2));
        for (std::size_t t = 0; t < config.sweeps; ++t) block_gibbs_rbm_sweep(model, chain, rng);
        add_expected(chain.v, -1.0, g);
      }
      partial[s] = std::move(g);
    });
    for (const auto& p : partial)
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += p[k];
    for (double& v : grad) v /= static_cast<double>(S);
  });
  model.set_parameters(state.theta);
  return state;
}

SampleSet sample_ising(const IsingModel& model, std::size_t count, SamplingMethod method, const PmpOptions& options,
                       std::uint64_t seed) {
  model.validate();
  SampleSet out(model.n, method == SamplingMethod::Pmp ? "pmp" : "gibbs");
  out.resize(count);
  parallel_for(count, [&](std::size_t k) {
    Rng rng(seed, {k});
    std::vector<std::int32_t> x(model.n);
    if (method == SamplingMethod::Pmp) {
      IsingPmpSampler sampler;
      x = sampler.sample(model, options, rng);
    } else {
      for (auto& xi : x) xi = static_cast<std::int32_t>(rng.below(2));
      for (std::size_t t = 0; t < options.sweeps; ++t) ising_gibbs_sweep(model, x, rng);
    }
    std::copy(x.begin(), x.end(), out.row(k).begin());
  });
  return out;
}

SampleSet sample_rbm(const RbmModel& model, std::size_t count, SamplingMethod method, const PmpOptions& options,
                     std::uint64_t seed) {
  model.validate();
  SampleSet out(model.n_visible, method == SamplingMethod::Pmp ? "pmp" : "gibbs");
  out.resize(count);
  parallel_for(count, [&](std::size_t k) {
    Rng rng(seed, {k});
    RbmState st{std::vector<std::int32_t>(model.n_hidden), std::vector<std::int32_t>(model.n_visible)};
    if (method == SamplingMethod::Pmp) {
      RbmPmpSampler sampler;
      st = sampler.sample(model, options, rng);
    } else {
      for (auto& v : st.v) v = static_cast<std::int32_t>(rng.below(2));
      for (std::size_t t = 0; t < options.sweeps; ++t) block_gibbs_rbm_sweep(model, st, rng);
    }
    std::copy(st.v.begin(), st.v.end(), out.row(k).begin());
  });
  return out;
}

}  // namespace pmp
