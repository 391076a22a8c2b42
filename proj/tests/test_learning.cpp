#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pmp/errors.hpp"
#include "pmp/learning.hpp"

using namespace pmp;

namespace {

// Expected indicator statistics of the unary blocks under the exact law.
std::vector<double> unary_expectations(const FactorGraph& g) { return oracle::marginals(g); }

SampleSet exact_samples(const FactorGraph& g, std::size_t count, Rng& rng) {
  const auto p = oracle::distribution(g);
  std::vector<std::vector<int>> states;
  oracle::for_each_state(g.cardinalities(), [&](const std::vector<int>& x) { states.push_back(x); });
  SampleSet out(g.num_variables());
  for (std::size_t s = 0; s < count; ++s) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < p.size(); ++k) {
      acc += p[k];
      if (u < acc) break;
    }
    out.push_back(states[k]);
  }
  return out;
}

std::vector<double> pair_moments(const SampleSet& s) {
  const std::size_t n = s.num_vars;
  std::vector<double> m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < s.size(); ++r) acc += s.row(r)[i] * s.row(r)[j];
      m.push_back(acc / static_cast<double>(s.size()));
    }
  return m;
}

}  // namespace

TEST_CASE("gradient estimate") {
  SUBCASE("data matching the frozen mode gives zero") {
    FactorGraph g;
    g.add_variable(std::vector<double>{0.0, 60.0});
    g.add_variable(std::vector<double>{60.0, 0.0});
    g.add_factor({0, 1}, IsingEdge{0.2});
    SampleSet rows(2);
    rows.push_back(std::vector<int>{1, 0});
    const auto grad = grad_estimate(g, Dataset::full(rows), 50, {10, 0.5}, 1);
    REQUIRE(grad.size() == g.num_parameters());
    for (double v : grad) CHECK(v == 0.0);
  }
  SUBCASE("single variable pulled away from the data") {
    FactorGraph g;
    g.add_variable(std::vector<double>{0.0, -60.0});
    SampleSet rows(1);
    rows.push_back(std::vector<int>{1});
    CHECK(grad_estimate(g, Dataset::full(rows), 10, {1, 0.5}, 2) == std::vector<double>{-1.0, 1.0});
  }
  SUBCASE("partially observed: hidden variable follows its coupling") {
    // v observed as 1, h coupled strongly to agree with v.
    FactorGraph g;
    g.add_variable(2);
    g.add_variable(std::vector<double>{0.0, -30.0});
    g.add_factor({0, 1}, DenseTable{{40.0, 0.0, 0.0, 40.0}});
    SampleSet rows(1);
    rows.push_back(std::vector<int>{1});
    const Dataset data{{0}, rows};
    CHECK(!data.fully_observed(g));
    const auto grad = grad_estimate(g, data, 20, {10, 0.5}, 3);
    // Positive phase (1,1); negative phase (0,0).
    const std::vector<double> expect{-1.0, 1.0, -1.0, 1.0, -1.0, 0.0, 0.0, 1.0};
    CHECK(grad == expect);
  }
  SUBCASE("reproducible per seed and iteration") {
    Rng rng(4);
    const auto g = oracle::random_dense_graph(4, 3, 4, rng);
    auto rows = exact_samples(g, 20, rng);
    const auto data = Dataset::full(rows);
    CHECK(grad_estimate(g, data, 8, {5, 0.5}, 9, 2) == grad_estimate(g, data, 8, {5, 0.5}, 9, 2));
    CHECK(grad_estimate(g, data, 8, {5, 0.5}, 9, 2) != grad_estimate(g, data, 8, {5, 0.5}, 9, 3));
  }
}

TEST_CASE("PMP moments on an independent model equal the softmax marginals") {
  Rng rng(5);
  FactorGraph g;
  for (int i = 0; i < 3; ++i) g.add_variable(std::vector<double>{rng.normal(), rng.normal(), rng.normal()});
  const std::size_t batch = 20000;
  const auto m = pmp_moments(g, batch, {3, 0.5}, 11);
  const auto exact = unary_expectations(g);
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const double se = std::sqrt(exact[k] * (1.0 - exact[k]) / static_cast<double>(batch));
    CHECK(std::abs(m[k] - exact[k]) < 4.0 * se);
  }
}

TEST_CASE("optimizer steps") {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  SUBCASE("SGD") {
    TrainState st{{1.0, -2.0}, {0.0, 0.0}, {0.0, 0.0}};
    sgd_step(st, std::vector<double>{1.0, 0.0}, cfg);
    CHECK(st.theta[0] == doctest::Approx(1.1));
    CHECK(st.theta[1] == -2.0);
  }
  SUBCASE("Adam first step moves by about the learning rate") {
    TrainState st{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
    const std::vector<double> g{2.0, -0.5, 0.0};
    adam_step(st, g, cfg);
    for (std::size_t k = 0; k < 3; ++k) {
      // m_hat = g, v_hat = g^2 after bias correction.
      const double expect = cfg.learning_rate * g[k] / (std::abs(g[k]) + cfg.adam_eps);
      CHECK(st.theta[k] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
  SUBCASE("zero gradient is a no-op") {
    TrainState st{{0.3, -0.7}, {0.0, 0.0}, {0.0, 0.0}};
    adam_step(st, std::vector<double>{0.0, 0.0}, cfg);
    CHECK(st.theta == std::vector<double>{0.3, -0.7});
  }
  SUBCASE("l1 shrinks penalized entries only") {
    cfg.l1 = 0.05;
    TrainState st{{1.0, 1.0, 0.02}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
    const std::vector<std::uint8_t> pen{1, 0, 1};
    sgd_step(st, std::vector<double>{0.0, 0.0, 0.0}, cfg, pen);
    // Proximal shrinkage by learning_rate * l1 = 0.005.
    CHECK(st.theta[0] == doctest::Approx(0.995));
    CHECK(st.theta[1] == 1.0);
    CHECK(st.theta[2] == doctest::Approx(0.015));
    sgd_step(st, std::vector<double>{0.0, 0.0, -0.14}, cfg, pen);
    CHECK(st.theta[2] == 0.0);
  }
  SUBCASE("validation") {
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.learning_rate = 0.1;
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
  }
}

TEST_CASE("initial state") {
  TrainConfig cfg;
  cfg.init_std = 0.01;
  Rng a(6), b(6);
  const auto s1 = init_train_state(20000, cfg, a);
  CHECK(s1.theta == init_train_state(20000, cfg, b).theta);
  double ss = 0.0;
  for (double t : s1.theta) ss += t * t;
  CHECK(std::sqrt(ss / 20000.0) == doctest::Approx(0.01).epsilon(0.03));
  for (double m : s1.m) CHECK(m == 0.0);
}

TEST_CASE("parameter tying") {
  FactorGraph g;
  g.add_variable(std::vector<double>{0.0, 0.5});
  g.add_variable(std::vector<double>{0.0, -0.5});
  g.add_variable(2);
  g.add_factor({0, 1}, IsingEdge{0.1});
  g.add_factor({1, 2}, IsingEdge{0.2});
  const std::vector<double> vals{1, 2, 3, 4, 5, 6, 7, 8};
  SUBCASE("identity round trip") {
    const auto t = ParameterTying::identity(g);
    CHECK(t.num_free == 8);
    std::vector<double> out(8, 0.0);
    t.expand(t.reduce(vals), out);
    CHECK(out == vals);
  }
  SUBCASE("factors only") {
    const auto t = ParameterTying::factors_only(g);
    CHECK(t.num_free == 2);
    CHECK(t.reduce(vals) == std::vector<double>{7, 8});
    auto out = vals;
    t.expand(std::vector<double>{-1, -2}, out);
    CHECK(out == std::vector<double>{1, 2, 3, 4, 5, 6, -1, -2});
  }
  SUBCASE("shared factors") {
    const auto t = ParameterTying::shared_factors(g);
    CHECK(t.num_free == 1);
    CHECK(t.reduce(vals) == std::vector<double>{15});
    auto out = vals;
    t.expand(std::vector<double>{0.25}, out);
    CHECK(out[6] == 0.25);
    CHECK(out[7] == 0.25);
  }
}

TEST_CASE("training loop") {
  SUBCASE("zero iterations returns the initialization") {
    FactorGraph g;
    g.add_variable(2);
    g.add_variable(2);
    g.add_factor({0, 1}, IsingEdge{0.0});
    SampleSet rows(2);
    rows.push_back(std::vector<int>{1, 1});
    TrainConfig cfg;
    cfg.iterations = 0;
    auto g2 = g;
    const auto st = train(g, Dataset::full(rows), cfg, 3, ParameterTying::identity(g));
    train(g2, Dataset::full(rows), cfg, 3, ParameterTying::identity(g2));
    CHECK(g == g2);
    CHECK(st.iteration == 0);
    for (double t : st.theta) CHECK(std::abs(t) < 0.1);
  }
  SUBCASE("independent variable recovers the data log-odds") {
    FactorGraph g;
    g.add_variable(2);
    SampleSet rows(1);
    for (int k = 0; k < 10; ++k) rows.push_back(std::vector<int>{k < 8 ? 1 : 0});
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch = 400;
    cfg.sweeps = 1;
    cfg.iterations = 400;
    train(g, Dataset::full(rows), cfg, 4, ParameterTying::identity(g));
    const auto u = g.unary(0);
    CHECK(u[1] - u[0] == doctest::Approx(std::log(4.0)).epsilon(0.1));
  }
  SUBCASE("budget stops early") {
    FactorGraph g;
    g.add_variable(2);
    SampleSet rows(1);
    rows.push_back(std::vector<int>{1});
    TrainConfig cfg;
    cfg.iterations = 100000000;
    cfg.batch = 1;
    cfg.sweeps = 1;
    cfg.budget_secs = 0.05;
    const auto st = train(g, Dataset::full(rows), cfg, 5, ParameterTying::identity(g));
    CHECK(st.stopped_early);
    CHECK(st.iteration < cfg.iterations);
  }
  SUBCASE("sink sees every iteration") {
    FactorGraph g;
    g.add_variable(2);
    SampleSet rows(1);
    rows.push_back(std::vector<int>{0});
    TrainConfig cfg;
    cfg.iterations = 7;
    cfg.batch = 2;
    cfg.sweeps = 1;
    std::size_t seen = 0;
    train(g, Dataset::full(rows), cfg, 6, ParameterTying::identity(g), [&](const IterationMetrics& m) {
      CHECK(m.iteration == seen + 1);
      ++seen;
    });
    CHECK(seen == 7);
  }
}

TEST_CASE("fully visible Ising training matches data moments") {
  Rng rng(7);
  auto truth = IsingModel::zeros(4);
  for (std::size_t i = 0; i < 4; ++i) {
    truth.b[i] = 0.5 * rng.normal();
    for (std::size_t j = i + 1; j < 4; ++j) truth.W[i * 4 + j] = truth.W[j * 4 + i] = 0.5 * rng.normal();
  }
  const auto data = exact_samples(truth.to_factor_graph(), 2000, rng);
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.batch = 200;
  cfg.sweeps = 20;
  cfg.iterations = 300;
  auto model = IsingModel::zeros(4);
  train_ising(model, data, cfg, SamplingMethod::Pmp, 8);
  const auto gen = sample_ising(model, 20000, SamplingMethod::Pmp, {20, 0.5}, 9);
  const auto md = pair_moments(data), mg = pair_moments(gen);
  for (std::size_t k = 0; k < md.size(); ++k) CHECK(std::abs(md[k] - mg[k]) < 0.03);
}

TEST_CASE("RBM training configuration errors") {
  auto model = RbmModel::zeros(2, 3);
  SampleSet wrong(4);
  wrong.push_back(std::vector<int>{0, 1, 0, 1});
  TrainConfig cfg;
  CHECK_THROWS(train_rbm(model, wrong, cfg, SamplingMethod::Pmp, 1));
}
