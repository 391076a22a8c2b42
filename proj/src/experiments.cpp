#include "pmp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "pmp/builders.hpp"
#include "pmp/data_io.hpp"
#include "pmp/errors.hpp"
#include "pmp/evaluation.hpp"

namespace pmp {

using nlohmann::json;

namespace {

class Deadline {
 public:
  explicit Deadline(double secs) : secs_(secs), start_(std::chrono::steady_clock::now()) {}
  bool expired() const { return secs_ > 0.0 && elapsed() >= secs_; }
  /// Seconds left for a nested budget; 0 (unbounded) when no budget is set.
  double remaining() const { return secs_ > 0.0 ? std::max(secs_ - elapsed(), 1e-3) : 0.0; }

 private:
  double elapsed() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }
  double secs_;
  std::chrono::steady_clock::time_point start_;
};

MetricsSink collect(std::vector<IterationMetrics>& trace) {
  return [&trace](const IterationMetrics& m) { trace.push_back(m); };
}

// Random train / held-out split of the rows of `all`.
std::pair<SampleSet, SampleSet> split_rows(const SampleSet& all, double holdout, Rng& rng) {
  if (!(holdout > 0.0 && holdout < 1.0)) throw ParameterError("holdout must lie in (0, 1)");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(holdout * all.size())));
  if (n_test >= all.size()) throw ParameterError("holdout leaves no training rows");
  SampleSet train(all.num_vars, "train"), test(all.num_vars, "heldout");
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_test ? test : train).push_back(all.row(order[k]));
  return {std::move(train), std::move(test)};
}

IdxArray read_mnist(const std::string& stem) {
  const auto dir = dataset_dir();
  for (const auto* suffix : {"", ".gz"}) {
    auto path = dir / (stem + suffix);
    if (std::filesystem::exists(path)) return read_idx_file(path);
  }
  throw ParameterError("dataset file " + (dir / stem).string() + " not found");
}

BinaryImageSet first_images(BinaryImageSet set, std::size_t count) {
  if (count && count < set.count()) set.pixels.resize(count * set.height * set.width);
  return set;
}

SampleSet uniform_rows(std::size_t rows, std::size_t vars, std::uint64_t seed) {
  SampleSet out(vars, "uniform");
  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < vars; ++i) out.values.push_back(static_cast<std::uint16_t>(rng.below(2)));
  return out;
}

SamplingMethod eval_sampler(SamplingMethod m) { return m == SamplingMethod::Pmp ? m : SamplingMethod::GibbsReset; }

}  // namespace

double ExperimentResult::metric(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.metric == name) return m.value;
  throw ParameterError("no metric named " + name);
}

SamplingMethod parse_method(const std::string& name) {
  if (name == "pmp") return SamplingMethod::Pmp;
  if (name == "gibbs") return SamplingMethod::Gibbs;
  if (name == "gibbs-reset") return SamplingMethod::GibbsReset;
  if (name == "pcd") return SamplingMethod::Pcd;
  throw ParameterError("unknown method '" + name + "'");
}

ExperimentResult run_toy(const ToyConfig& config, std::uint64_t seed, double budget_secs) {
  FactorGraph truth = complete_spin_graph(4, config.theta_true);
  const auto moments = exact_expected_stats(truth);
  const auto p_true = exact_distribution(truth);

  FactorGraph g = complete_spin_graph(4, 0.0);
  TrainConfig train;
  train.learning_rate = config.learning_rate;
  train.iterations = config.iterations;
  train.batch = config.chains;
  train.sweeps = config.sweeps;
  train.damping = config.damping;
  train.budget_secs = budget_secs;
  ExperimentResult out;
  out.traces.push_back({"pmp", {}});
  const auto state =
      exact_moment_train(g, moments, train, stream_seed(seed, {0}), ParameterTying::shared_factors(g),
                         collect(out.traces.back().second));
  out.partial = state.stopped_early;
  out.models.push_back({"pmp", g});

  const double theta_hat = state.theta.at(0);
  const auto p_gibbs = exact_distribution(g);
  auto samples = pmp_sample_chains(g, config.eval_samples, {config.sweeps, config.damping}, stream_seed(seed, {1}));
  samples.label = "pmp";
  const auto p_pmp = empirical_distribution(samples, g.cardinalities(), 0.5);

  out.metrics.push_back({"theta_hat", theta_hat});
  out.metrics.push_back({"kl_gibbs", kl_divergence(p_true, p_gibbs)});
  out.metrics.push_back({"kl_pmp", kl_divergence(p_true, p_pmp)});
  out.samples.push_back(std::move(samples));
  return out;
}

ExperimentResult run_bound(const BoundConfig& config, std::uint64_t seed, double budget_secs) {
  if (config.draws == 0 || config.instances == 0) throw ParameterError("draws and instances must be positive");
  SamplerSpec{.sweeps = config.sweeps, .damping = config.damping}.validate();
  const Deadline deadline(budget_secs);
  ExperimentResult out;
  double error_sum = 0.0;
  std::size_t done = 0;
  for (std::size_t k = 0; k < config.instances; ++k) {
    if (deadline.expired()) {
      out.partial = true;
      break;
    }
    Rng rng(seed, {k, 0});
    FactorGraph g;
    if (config.model == "lattice") {
      g = lattice_graph(config.side, config.coupling, true);
    } else if (config.model == "tree") {
      g = random_spin_tree(config.n, config.w_max, config.b_max, rng);
    } else if (config.model == "random") {
      g = random_spin_glass(config.n, config.w_max, config.b_max, rng);
    } else if (config.model == "unary") {
      for (std::size_t i = 0; i < config.n; ++i) g.add_variable(std::vector<double>{0.0, rng.normal()});
    } else {
      throw ParameterError("unknown bound model '" + config.model + "'");
    }
    const double exact = exact_log_partition(g, config.budget_states);
    const auto est = pmap_logZ_upper_bound(g, config.draws, config.exact_map ? MapSolver::Exact : MapSolver::Pmp,
                                           stream_seed(seed, {k, 1}), config.sweeps, config.damping,
                                           config.budget_states);
    const auto tag = std::to_string(k);
    out.metrics.push_back({"logz_exact_" + tag, exact});
    out.metrics.push_back({"logz_estimate_" + tag, est.mean, est.std_err});
    out.metrics.push_back({"error_" + tag, est.mean - exact, est.std_err});
    error_sum += est.mean - exact;
    ++done;
  }
  if (done) out.metrics.push_back({"mean_error", error_sum / static_cast<double>(done)});
  return out;
}

ExperimentResult run_ising(const IsingExperimentConfig& config, std::uint64_t seed, double budget_secs) {
  const Deadline deadline(budget_secs);
  BinaryImageSet images;
  if (config.dataset == "synthetic") {
    Rng rng(seed, {0});
    images = gen_synthetic_contours(config.images, config.size, rng);
  } else if (config.dataset == "mnist") {
    images = first_images(extract_zero_contours(read_mnist("train-images-idx3-ubyte"), read_mnist("train-labels-idx1-ubyte")),
                          config.images);
  } else {
    throw ParameterError("unknown dataset '" + config.dataset + "'");
  }
  Rng split_rng(seed, {1});
  const auto [train_rows, test_rows] = split_rows(images.to_samples(), config.holdout, split_rng);
  const std::size_t D = train_rows.num_vars;

  ExperimentResult out;
  out.metrics.push_back({"log_mmd2_uniform", log_mmd2(uniform_rows(config.eval_samples, D, stream_seed(seed, {4})), test_rows)});
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    const auto method = parse_method(config.methods[mi]);
    if (method == SamplingMethod::Pcd) throw ParameterError("pcd applies to the RBM experiment only");
    if (deadline.expired()) {
      out.partial = true;
      break;
    }
    TrainConfig train = config.train;
    train.budget_secs = deadline.remaining();
    auto model = IsingModel::zeros(D);
    out.traces.push_back({config.methods[mi], {}});
    const auto state = train_ising(model, train_rows, train, method, stream_seed(seed, {2, mi}),
                                   collect(out.traces.back().second));
    out.partial = out.partial || state.stopped_early;
    out.models.push_back({config.methods[mi], model.to_factor_graph()});
    for (std::size_t sweeps : config.eval_sweeps) {
      auto samples = sample_ising(model, config.eval_samples, eval_sampler(method), {sweeps, train.damping},
                                  stream_seed(seed, {3, mi, sweeps}));
      out.metrics.push_back(
          {"log_mmd2_" + config.methods[mi] + "_" + std::to_string(sweeps), log_mmd2(samples, test_rows)});
      samples.label = config.methods[mi] + "_" + std::to_string(sweeps);
      out.samples.push_back(std::move(samples));
    }
  }
  return out;
}

ExperimentResult run_rbm(const RbmExperimentConfig& config, std::uint64_t seed, double budget_secs) {
  const Deadline deadline(budget_secs);
  BinaryImageSet images;
  if (config.dataset == "stripes") {
    Rng rng(seed, {0});
    images = gen_stripes(config.images, config.size, 2, rng);
  } else if (config.dataset == "bars") {
    Rng rng(seed, {0});
    images = gen_bars_and_stripes(config.images, config.size, rng);
  } else if (config.dataset == "mnist") {
    const auto raw = read_mnist("train-images-idx3-ubyte");
    images.height = raw.dims.at(1);
    images.width = raw.dims.at(2);
    images.pixels.resize(raw.data.size());
    std::transform(raw.data.begin(), raw.data.end(), images.pixels.begin(),
                   [](std::uint8_t p) { return static_cast<std::uint8_t>(p >= 128); });
    images = first_images(std::move(images), config.images);
  } else {
    throw ParameterError("unknown dataset '" + config.dataset + "'");
  }
  Rng split_rng(seed, {1});
  const auto [train_rows, test_rows] = split_rows(images.to_samples(), config.holdout, split_rng);
  const std::size_t D = train_rows.num_vars;

  ExperimentResult out;
  auto evaluate = [&](const RbmModel& model, const std::string& name, SamplingMethod sampler, std::size_t mi) {
    for (std::size_t sweeps : config.eval_sweeps) {
      auto samples = sample_rbm(model, config.eval_samples, sampler, {sweeps, config.train.damping},
                                stream_seed(seed, {3, mi, sweeps}));
      out.metrics.push_back({"log_mmd2_" + name + "_" + std::to_string(sweeps), log_mmd2(samples, test_rows)});
      samples.label = name + "_" + std::to_string(sweeps);
      out.samples.push_back(std::move(samples));
    }
  };

  {
    TrainConfig untrained = config.train;
    untrained.iterations = 0;
    auto model = RbmModel::zeros(config.n_hidden, D);
    train_rbm(model, train_rows, untrained, SamplingMethod::Pmp, stream_seed(seed, {2, config.methods.size()}));
    evaluate(model, "untrained", SamplingMethod::Pmp, config.methods.size());
  }
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    const auto method = parse_method(config.methods[mi]);
    if (deadline.expired()) {
      out.partial = true;
      break;
    }
    TrainConfig train = config.train;
    train.budget_secs = deadline.remaining();
    if (method == SamplingMethod::Pcd) train.sweeps = config.pcd_sweeps;
    auto model = RbmModel::zeros(config.n_hidden, D);
    out.traces.push_back({config.methods[mi], {}});
    const auto state =
        train_rbm(model, train_rows, train, method, stream_seed(seed, {2, mi}), collect(out.traces.back().second));
    out.partial = out.partial || state.stopped_early;
    out.models.push_back({config.methods[mi], model.to_factor_graph()});
    evaluate(model, config.methods[mi], eval_sampler(method), mi);
  }
  return out;
}

ExperimentResult run_deconv(const DeconvConfig& config, std::uint64_t seed, double budget_secs) {
  const Deadline deadline(budget_secs);
  const std::size_t fs = config.feature_size;
  const std::size_t ss = config.slot_size ? config.slot_size : fs;
  if (fs == 0 || fs > config.size || ss > config.size) throw ParameterError("feature size must fit the image");
  Rng data_rng(seed, {0});
  const std::size_t grid = config.size - fs + 1;
  const auto truth = gen_deconv_dataset(config.images, config.true_features, fs, fs, grid, grid,
                                        config.feature_density, config.location_density, data_rng);
  const auto dg = build_deconv_graph(truth.X, config.images, config.size, config.size, config.slots, ss, ss,
                                     config.w_logodds, config.s_logodds);

  ExperimentResult out;
  std::vector<std::vector<std::uint8_t>> recs;
  double worst = 1.0;
  for (std::size_t s = 0; s < config.seeds; ++s) {
    if (deadline.expired()) {
      out.partial = true;
      break;
    }
    Rng rng(seed + s, {1});
    const auto x = pmp_posterior_sample(dg.graph, dg.evidence, config.sweeps, rng, config.damping);
    recs.push_back(deconv_reconstruct(dg.layout, x));
    const double agree = pixel_agreement(recs.back(), truth.X);
    worst = std::min(worst, agree);
    out.metrics.push_back({"agreement_" + std::to_string(s), agree});
    SampleSet latent(dg.layout.num_latent(), "posterior_" + std::to_string(s));
    latent.push_back(std::span<const std::int32_t>(x).subspan(dg.layout.w_begin, dg.layout.num_latent()));
    out.samples.push_back(std::move(latent));
  }
  if (!recs.empty()) out.metrics.push_back({"min_agreement", worst});
  double pair_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < recs.size(); ++a)
    for (std::size_t b = a + 1; b < recs.size(); ++b, ++pairs) pair_sum += pixel_agreement(recs[a], recs[b]);
  if (pairs) out.metrics.push_back({"consistency", pair_sum / static_cast<double>(pairs)});
  return out;
}

ToyConfig paper_toy() { return ToyConfig{}; }

IsingExperimentConfig paper_ising() {
  IsingExperimentConfig c;
  c.dataset = "mnist";
  c.images = 0;
  c.methods = {"pmp", "gibbs", "gibbs-reset"};
  c.train = TrainConfig{0.001, 100, 50, 1000};
  c.eval_sweeps = {1, 5, 10, 25, 50, 100};
  c.eval_samples = 1000;
  return c;
}

RbmExperimentConfig paper_rbm() {
  RbmExperimentConfig c;
  c.dataset = "mnist";
  c.images = 0;
  c.n_hidden = 500;
  c.methods = {"pmp", "gibbs-reset", "pcd"};
  c.train = TrainConfig{0.01, 100, 100, 200 * 480};
  c.train.optimizer = Optimizer::Sgd;
  c.pcd_sweeps = 1;
  c.eval_sweeps = {10, 100, 1000};
  c.eval_samples = 1000;
  return c;
}

DeconvConfig paper_deconv() {
  DeconvConfig c;
  c.images = 100;
  c.size = 14;
  c.true_features = 4;
  c.feature_size = 5;
  c.slots = 5;
  c.slot_size = 6;
  return c;
}

namespace {

json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"batch", t.batch},
          {"sweeps", t.sweeps},
          {"iterations", t.iterations},
          {"optimizer", t.optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"l1", t.l1},
          {"damping", t.damping},
          {"init_std", t.init_std}};
}

void train_from_json(const json& j, TrainConfig& t) {
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.batch = j.value("batch", t.batch);
  t.sweeps = j.value("sweeps", t.sweeps);
  t.iterations = j.value("iterations", t.iterations);
  const auto opt = j.value("optimizer", std::string(t.optimizer == Optimizer::Adam ? "adam" : "sgd"));
  if (opt != "adam" && opt != "sgd") throw ParameterError("unknown optimizer '" + opt + "'");
  t.optimizer = opt == "adam" ? Optimizer::Adam : Optimizer::Sgd;
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.adam_eps = j.value("adam_eps", t.adam_eps);
  t.l1 = j.value("l1", t.l1);
  t.damping = j.value("damping", t.damping);
  t.init_std = j.value("init_std", t.init_std);
}

}  // namespace

json to_json(const ToyConfig& c) {
  return {{"theta_true", c.theta_true}, {"iterations", c.iterations}, {"learning_rate", c.learning_rate},
          {"chains", c.chains},         {"sweeps", c.sweeps},         {"damping", c.damping},
          {"eval_samples", c.eval_samples}};
}

json to_json(const BoundConfig& c) {
  return {{"model", c.model},   {"side", c.side},       {"coupling", c.coupling}, {"n", c.n},
          {"w_max", c.w_max},   {"b_max", c.b_max},     {"instances", c.instances}, {"sweeps", c.sweeps},
          {"draws", c.draws},   {"damping", c.damping}, {"exact_map", c.exact_map}, {"budget_states", c.budget_states}};
}

json to_json(const IsingExperimentConfig& c) {
  return {{"dataset", c.dataset},         {"images", c.images},         {"size", c.size},
          {"holdout", c.holdout},         {"methods", c.methods},       {"train", train_to_json(c.train)},
          {"eval_sweeps", c.eval_sweeps}, {"eval_samples", c.eval_samples}};
}

json to_json(const RbmExperimentConfig& c) {
  return {{"dataset", c.dataset},       {"images", c.images},           {"size", c.size},
          {"n_hidden", c.n_hidden},     {"holdout", c.holdout},         {"methods", c.methods},
          {"train", train_to_json(c.train)}, {"pcd_sweeps", c.pcd_sweeps}, {"eval_sweeps", c.eval_sweeps},
          {"eval_samples", c.eval_samples}};
}

json to_json(const DeconvConfig& c) {
  return {{"images", c.images},
          {"size", c.size},
          {"true_features", c.true_features},
          {"feature_size", c.feature_size},
          {"slots", c.slots},
          {"slot_size", c.slot_size},
          {"sweeps", c.sweeps},
          {"damping", c.damping},
          {"feature_density", c.feature_density},
          {"location_density", c.location_density},
          {"w_logodds", c.w_logodds},
          {"s_logodds", c.s_logodds},
          {"seeds", c.seeds}};
}

void from_json(const json& j, ToyConfig& c) {
  c.theta_true = j.value("theta_true", c.theta_true);
  c.iterations = j.value("iterations", c.iterations);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.chains = j.value("chains", c.chains);
  c.sweeps = j.value("sweeps", c.sweeps);
  c.damping = j.value("damping", c.damping);
  c.eval_samples = j.value("eval_samples", c.eval_samples);
}

void from_json(const json& j, BoundConfig& c) {
  c.model = j.value("model", c.model);
  c.side = j.value("side", c.side);
  c.coupling = j.value("coupling", c.coupling);
  c.n = j.value("n", c.n);
  c.w_max = j.value("w_max", c.w_max);
  c.b_max = j.value("b_max", c.b_max);
  c.instances = j.value("instances", c.instances);
  c.sweeps = j.value("sweeps", c.sweeps);
  c.draws = j.value("draws", c.draws);
  c.damping = j.value("damping", c.damping);
  c.exact_map = j.value("exact_map", c.exact_map);
  c.budget_states = j.value("budget_states", c.budget_states);
}

void from_json(const json& j, IsingExperimentConfig& c) {
  c.dataset = j.value("dataset", c.dataset);
  c.images = j.value("images", c.images);
  c.size = j.value("size", c.size);
  c.holdout = j.value("holdout", c.holdout);
  c.methods = j.value("methods", c.methods);
  if (j.contains("train")) train_from_json(j.at("train"), c.train);
  c.eval_sweeps = j.value("eval_sweeps", c.eval_sweeps);
  c.eval_samples = j.value("eval_samples", c.eval_samples);
}

void from_json(const json& j, RbmExperimentConfig& c) {
  c.dataset = j.value("dataset", c.dataset);
  c.images = j.value("images", c.images);
  c.size = j.value("size", c.size);
  c.n_hidden = j.value("n_hidden", c.n_hidden);
  c.holdout = j.value("holdout", c.holdout);
  c.methods = j.value("methods", c.methods);
  if (j.contains("train")) train_from_json(j.at("train"), c.train);
  c.pcd_sweeps = j.value("pcd_sweeps", c.pcd_sweeps);
  c.eval_sweeps = j.value("eval_sweeps", c.eval_sweeps);
  c.eval_samples = j.value("eval_samples", c.eval_samples);
}

void from_json(const json& j, DeconvConfig& c) {
  c.images = j.value("images", c.images);
  c.size = j.value("size", c.size);
  c.true_features = j.value("true_features", c.true_features);
  c.feature_size = j.value("feature_size", c.feature_size);
  c.slots = j.value("slots", c.slots);
  c.slot_size = j.value("slot_size", c.slot_size);
  c.sweeps = j.value("sweeps", c.sweeps);
  c.damping = j.value("damping", c.damping);
  c.feature_density = j.value("feature_density", c.feature_density);
  c.location_density = j.value("location_density", c.location_density);
  c.w_logodds = j.value("w_logodds", c.w_logodds);
  c.s_logodds = j.value("s_logodds", c.s_logodds);
  c.seeds = j.value("seeds", c.seeds);
}

}  // namespace pmp
