#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "pmp/builders.hpp"
#include "pmp/errors.hpp"
#include "pmp/evaluation.hpp"
#include "pmp/perturbation.hpp"

using namespace pmp;

namespace {

SampleSet rows_of(std::size_t n, const std::vector<std::vector<int>>& rows) {
  SampleSet s(n);
  for (const auto& r : rows) s.push_back(r);
  return s;
}

// Biased MMD^2 written out with explicit Hamming distances.
double mmd2_oracle(const SampleSet& X, const SampleSet& Y) {
  const double D = static_cast<double>(X.num_vars);
  auto k = [&](auto a, auto b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return std::exp(-d / D);
  };
  auto mean_k = [&](const SampleSet& A, const SampleSet& B) {
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i)
      for (std::size_t j = 0; j < B.size(); ++j) s += k(A.row(i), B.row(j));
    return s / static_cast<double>(A.size() * B.size());
  };
  return mean_k(X, X) + mean_k(Y, Y) - 2.0 * mean_k(X, Y);
}

}  // namespace

TEST_CASE("Hamming kernel and MMD") {
  const std::vector<std::int32_t> a{0, 1, 1, 0}, b{1, 1, 0, 0};
  CHECK(hamming_kernel(a, a) == 1.0);
  CHECK(hamming_kernel(a, b) == doctest::Approx(std::exp(-0.5)));

  SUBCASE("identical sets have zero discrepancy") {
    const auto X = rows_of(3, {{0, 1, 0}, {1, 1, 1}});
    CHECK(mmd2(X, X) == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("hand case") {
    const auto X = rows_of(2, {{0, 0}});
    const auto Y = rows_of(2, {{1, 1}});
    // 1 + 1 - 2 e^{-1}
    CHECK(mmd2(X, Y) == doctest::Approx(2.0 - 2.0 * std::exp(-1.0)));
    CHECK(log_mmd2(X, Y) == doctest::Approx(std::log(2.0 - 2.0 * std::exp(-1.0))));
  }
  SUBCASE("random sets against the oracle") {
    Rng rng(1);
    for (int rep = 0; rep < 10; ++rep) {
      SampleSet X(6), Y(6);
      for (int r = 0; r < 15; ++r) {
        std::vector<int> x(6), y(6);
        for (auto& v : x) v = static_cast<int>(rng.below(3));
        for (auto& v : y) v = static_cast<int>(rng.below(3));
        X.push_back(x);
        if (r < 11) Y.push_back(y);
      }
      CHECK(mmd2(X, Y) == doctest::Approx(mmd2_oracle(X, Y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact enumeration") {
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = oracle::random_dense_graph(5, 3, 5, rng);
    CHECK(exact_log_partition(g) == doctest::Approx(oracle::log_partition(g)).epsilon(1e-12));
    const auto p = exact_distribution(g), q = oracle::distribution(g);
    REQUIRE(p.size() == q.size());
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(p[k] == doctest::Approx(q[k]).epsilon(1e-10).scale(1e-12));
    const auto m = exact_marginals(g), mo = oracle::marginals(g);
    for (std::size_t k = 0; k < m.size(); ++k) CHECK(m[k] == doctest::Approx(mo[k]).epsilon(1e-10));
    const auto map = brute_force_map(g);
    CHECK(std::vector<int>(map.begin(), map.end()) == oracle::map_state(g));
  }
  SUBCASE("expected statistics of a single Ising edge") {
    FactorGraph g;
    g.add_variable(2);
    g.add_variable(2);
    g.add_factor({0, 1}, IsingEdge{0.7});
    // E[s_i s_j] = tanh(w) for a lone edge with no fields.
    const auto st = exact_expected_stats(g);
    CHECK(st.back() == doctest::Approx(std::tanh(0.7)));
    CHECK(st[0] == doctest::Approx(0.5));
  }
  SUBCASE("enumeration budget") {
    FactorGraph g;
    for (int i = 0; i < 30; ++i) g.add_variable(2);
    CHECK_THROWS_AS(exact_log_partition(g, 1000), CapacityError);
  }
}

TEST_CASE("empirical distributions and divergences") {
  const std::vector<std::int32_t> cards{2, 3};
  const std::vector<std::uint16_t> x{1, 2};
  CHECK(joint_index(cards, x) == 5);
  const auto s = rows_of(2, {{0, 0}, {0, 0}, {1, 2}, {0, 1}});
  const auto p = empirical_distribution(s, cards, 0.0);
  CHECK(p == std::vector<double>{0.5, 0.25, 0.0, 0.0, 0.0, 0.25});
  const auto ps = empirical_distribution(s, cards, 0.5);
  // (count + 0.5) / (4 + 6 * 0.5)
  CHECK(ps[0] == doctest::Approx(2.5 / 7.0));
  CHECK(ps[2] == doctest::Approx(0.5 / 7.0));

  const std::vector<double> a{0.5, 0.5}, b{0.9, 0.1}, z{1.0, 0.0};
  CHECK(kl_divergence(a, a) == 0.0);
  CHECK(kl_divergence(a, b) == doctest::Approx(0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1)));
  CHECK(kl_divergence(a, z) == std::numeric_limits<double>::infinity());
  CHECK(kl_divergence(z, a) == doctest::Approx(std::log(2.0)));
  CHECK(tv_distance(a, b) == doctest::Approx(0.4));
  CHECK_THROWS_AS(tv_distance(a, std::vector<double>{1.0}), StructuralError);
  CHECK(rmse_params(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(std::sqrt(12.5)));
}

TEST_CASE("perturb-and-MAP log partition bound") {
  SUBCASE("exact for independent variables") {
    Rng rng(3);
    FactorGraph g;
    for (int i = 0; i < 4; ++i) g.add_variable(std::vector<double>{rng.normal(), rng.normal(), rng.normal()});
    const auto est = pmap_logZ_upper_bound(g, 20000, MapSolver::Exact, 5);
    CHECK(std::abs(est.mean - oracle::log_partition(g)) < 4.0 * est.std_err);
    const auto viaPmp = pmap_logZ_upper_bound(g, 20000, MapSolver::Pmp, 5, 3);
    CHECK(viaPmp.mean == doctest::Approx(est.mean).epsilon(1e-12));
  }
  SUBCASE("upper bound on a spin tree") {
    Rng rng(4);
    const auto g = random_spin_tree(8, 2.0, 0.1, rng);
    const auto est = pmap_logZ_upper_bound(g, 2000, MapSolver::Exact, 6);
    std::vector<double> gaps;
    for (double d : est.draws) gaps.push_back(d - oracle::log_partition(g));
    CHECK(t_test_positive_mean(gaps).p_value < 0.01);
  }
  SUBCASE("draws are reproducible") {
    Rng rng(5);
    const auto g = oracle::random_dense_graph(4, 2, 4, rng);
    CHECK(pmap_logZ_upper_bound(g, 10, MapSolver::Pmp, 7).draws == pmap_logZ_upper_bound(g, 10, MapSolver::Pmp, 7).draws);
  }
}

TEST_CASE("hypothesis tests") {
  SUBCASE("Kolmogorov survival") {
    CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.2699996716).epsilon(1e-8));
    CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(2e-3));
    CHECK(kolmogorov_survival(0.0) == 1.0);
  }
  SUBCASE("one-sample KS statistic") {
    // Uniform CDF, samples {0.1, 0.5, 0.9}: D = max(0.1, 1/3 - 0.1, ...) = 0.2333...
    const auto r = ks_test({0.9, 0.1, 0.5}, [](double x) { return x; });
    CHECK(r.statistic == doctest::Approx(0.1 + 2.0 / 15.0).epsilon(1e-9));
  }
  SUBCASE("KS accepts Gumbel draws and rejects a shift") {
    Rng rng(6);
    const auto eps = draw_gumbel(20000, rng);
    CHECK(ks_test(eps, gumbel_cdf).p_value > 0.01);
    auto shifted = eps;
    for (auto& e : shifted) e += 0.1;
    CHECK(ks_test(shifted, gumbel_cdf).p_value < 1e-6);
    CHECK(ks_two_sample(eps, draw_gumbel(20000, rng)).p_value > 0.01);
    CHECK(ks_two_sample(eps, shifted).p_value < 1e-6);
  }
  SUBCASE("t test") {
    // mean 2, sd 1, n 3: t = 2 sqrt(3), one-sided p with 2 df.
    const std::vector<double> v{1.0, 2.0, 3.0};
    const auto r = t_test_positive_mean(v);
    const double t = 2.0 * std::sqrt(3.0);
    CHECK(r.statistic == doctest::Approx(t));
    CHECK(r.p_value == doctest::Approx(0.5 * (1.0 - t / std::sqrt(2.0 + t * t))).epsilon(1e-9));
  }
}
