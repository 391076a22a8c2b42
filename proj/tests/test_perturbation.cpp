#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pmp/errors.hpp"
#include "pmp/evaluation.hpp"
#include "pmp/factor_graph.hpp"
#include "pmp/perturbation.hpp"

using namespace pmp;

TEST_CASE("Gumbel inverse CDF") {
  CHECK(gumbel_inverse_cdf(0.5) == doctest::Approx(-kEulerGamma - std::log(std::log(2.0))));
  CHECK(gumbel_inverse_cdf(0.5) == doctest::Approx(-0.2107).epsilon(1e-3));
  for (double u : {0.01, 0.3, 0.9, 0.999}) CHECK(gumbel_cdf(gumbel_inverse_cdf(u)) == doctest::Approx(u));
}

TEST_CASE("Gumbel moments") {
  Rng rng(1);
  const auto eps = draw_gumbel(1000000, rng);
  double mean = 0.0;
  for (double e : eps) mean += e;
  mean /= static_cast<double>(eps.size());
  double var = 0.0;
  for (double e : eps) var += (e - mean) * (e - mean);
  var /= static_cast<double>(eps.size() - 1);
  CHECK(std::abs(mean) < 0.005);
  CHECK(var == doctest::Approx(std::numbers::pi * std::numbers::pi / 6.0).epsilon(0.01 / 1.6449));
}

TEST_CASE("perturb") {
  const std::vector<double> u{0.0, 0.0};
  CHECK(perturb(u, std::vector<double>{0.0, 0.0}) == u);
  CHECK(perturb(u, std::vector<double>{1.0, -1.0}) == std::vector<double>{1.0, -1.0});

  SUBCASE("clamped state stays the argmax") {
    Rng rng(2);
    const std::vector<double> clamped{kClampScore, 0.0};
    int kept = 0;
    for (int k = 0; k < 100000; ++k) {
      const auto p = perturb(clamped, draw_gumbel(2, rng));
      kept += p[1] > p[0];
    }
    CHECK(kept == 100000);
  }
}

TEST_CASE("normal to Gumbel transform") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.841344746));
  CHECK(std::isfinite(gumbel_from_normal(-40.0)));
  CHECK(std::isfinite(gumbel_from_normal(40.0)));
  CHECK(gumbel_from_normal(0.0) == doctest::Approx(gumbel_inverse_cdf(0.5)));
}

TEST_CASE("persistent perturbations") {
  SUBCASE("rho one repeats the perturbation") {
    Rng rng(3);
    auto st = PersistentPerturbationState::init(50, 1.0, rng);
    const auto a = persistent_step(st, rng);
    const auto b = persistent_step(st, rng);
    CHECK(a == b);
  }
  SUBCASE("rho zero gives uncorrelated steps") {
    Rng rng(4);
    auto st = PersistentPerturbationState::init(100000, 0.0, rng);
    const auto a = persistent_step(st, rng);
    const auto b = persistent_step(st, rng);
    double ma = 0, mb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) ma += a[k], mb += b[k];
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      sab += (a[k] - ma) * (b[k] - mb);
      saa += (a[k] - ma) * (a[k] - ma);
      sbb += (b[k] - mb) * (b[k] - mb);
    }
    CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 0.01);
  }
  SUBCASE("marginals are Gumbel for any rho") {
    for (double rho : {0.0, 0.5, 0.9}) {
      Rng rng(5);
      auto st = PersistentPerturbationState::init(100000, rho, rng);
      persistent_step(st, rng);
      const auto eps = persistent_step(st, rng);
      const auto r = ks_test(eps, gumbel_cdf);
      CAPTURE(rho);
      CHECK(r.p_value > 0.01);
    }
  }
  SUBCASE("rho outside [0, 1] is rejected") {
    Rng rng(6);
    CHECK_THROWS_AS(PersistentPerturbationState::init(3, 1.5, rng), ParameterError);
    CHECK_THROWS_AS(PersistentPerturbationState::init(3, -0.1, rng), ParameterError);
  }
}

TEST_CASE("streams are reproducible") {
  Rng a(7, {1, 2}), b(7, {1, 2}), c(7, {2, 1});
  const auto x = draw_gumbel(10, a);
  CHECK(x == draw_gumbel(10, b));
  CHECK(x != draw_gumbel(10, c));
}
