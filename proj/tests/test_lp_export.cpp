#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "pmp/errors.hpp"
#include "pmp/lp_export.hpp"
#include "pmp/models.hpp"

using namespace pmp;

namespace {

std::vector<double> symmetric_weights(std::size_t n, Rng& rng) {
  std::vector<double> W(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) W[i * n + j] = W[j * n + i] = rng.normal();
  return W;
}

std::vector<double> normals(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// p uniform on [0, 1], each q uniform on its feasible interval.
std::vector<double> random_reduced_point(std::size_t n, Rng& rng) {
  std::vector<double> x(n * n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform();
  std::size_t k = n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double lo = std::max(0.0, x[i] + x[j] - 1.0), hi = std::min(x[i], x[j]);
      x[k++] = lo + (hi - lo) * rng.uniform();
    }
  return x;
}

// Checks every standard-LP constraint of a full point directly.
bool standard_feasible(const std::vector<double>& full, std::size_t n, double tol) {
  for (double v : full)
    if (v < -tol) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(full[2 * i] + full[2 * i + 1] - 1.0) > tol) return false;
  std::size_t k = 2 * n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double* q = full.data() + k;
      k += 4;
      if (std::abs(q[0] + q[1] - full[2 * i]) > tol) return false;
      if (std::abs(q[2] + q[3] - full[2 * i + 1]) > tol) return false;
      if (std::abs(q[0] + q[2] - full[2 * j]) > tol) return false;
      if (std::abs(q[1] + q[3] - full[2 * j + 1]) > tol) return false;
    }
  return k == full.size();
}

}  // namespace

TEST_CASE("reduced Ising LP") {
  SUBCASE("count formulas") {
    for (std::size_t n = 2; n <= 20; ++n) {
      const auto lp = reduced_lp_ising(std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0));
      CHECK(lp.num_variables() == n * n);
      CHECK(lp.num_constraints() == 4 * n * n - 3 * n);
    }
  }
  SUBCASE("integral points score like the model") {
    Rng rng(1);
    const std::size_t n = 5;
    const auto W = symmetric_weights(n, rng);
    const auto b = normals(n, rng);
    const auto lp = reduced_lp_ising(W, b);
    const auto half = reduced_lp_ising(W, b, true);
    oracle::for_each_state(std::vector<std::int32_t>(n, 2), [&](const std::vector<int>& x) {
      std::vector<double> point(n * n), hp;
      double expect = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        point[i] = x[i];
        hp.push_back(x[i]);
        expect += b[i] * x[i];
      }
      std::size_t k = n;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          point[k++] = x[i] * x[j];
          expect += W[i * n + j] * x[i] * x[j];
        }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) hp.push_back(x[i] * x[j]);
      CHECK(lp.first_violation(point) == -1);
      CHECK(lp.objective_value(point) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(half.objective_value(hp) == doctest::Approx(expect).epsilon(1e-12));
    });
  }
  SUBCASE("violations are located") {
    const auto lp = reduced_lp_ising(std::vector<double>(4, 0.0), std::vector<double>(2, 0.0));
    // p = (0, 0), q_01 = 0.5 breaks q_01 <= p_0.
    const std::vector<double> bad{0.0, 0.0, 0.5, 0.0};
    CHECK(lp.first_violation(bad) == 0);
    CHECK_THROWS_AS(lp.check_feasible(bad), ValidationError);
  }
  SUBCASE("negative fields favor the empty state") {
    const auto lp = reduced_lp_ising(std::vector<double>(9, 0.0), std::vector<double>{-1.0, -2.0, -0.5});
    const std::vector<double> zero(9, 0.0);
    CHECK(lp.first_violation(zero) == -1);
    CHECK(lp.objective_value(zero) == 0.0);
  }
  SUBCASE("mapping random feasible points") {
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 2 + rng.below(5);
      const auto W = symmetric_weights(n, rng);
      const auto b = normals(n, rng);
      const auto red = random_reduced_point(n, rng);
      const auto lp = reduced_lp_ising(W, b);
      REQUIRE(lp.first_violation(red) == -1);
      const auto full = map_reduced_to_full(red, n);
      CHECK(standard_feasible(full, n, 1e-12));
      const auto std_lp = standard_lp_ising(W, b);
      CHECK(std_lp.first_violation(full) == -1);
      CHECK(std::abs(std_lp.objective_value(full) - lp.objective_value(red)) < 1e-10);
    }
  }
  SUBCASE("infeasible input is rejected") {
    const std::vector<double> bad{0.2, 0.2, 0.9, 0.9};
    CHECK_THROWS_AS(map_reduced_to_full(bad, 2), ValidationError);
  }
}

TEST_CASE("reduced RBM LP") {
  SUBCASE("smallest instance") {
    const auto lp = reduced_lp_rbm(std::vector<double>{1.0}, std::vector<double>{0.0}, std::vector<double>{0.0});
    CHECK(lp.num_variables() == 3);
    std::size_t pair_rows = 0;
    for (const auto& r : lp.rows) pair_rows += r.coeffs.size() >= 2;
    CHECK(pair_rows == 3);
  }
  SUBCASE("mapping random feasible points") {
    Rng rng(3);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t m = 3, n = 3;
      const auto W = normals(m * n, rng);
      const auto b = normals(m, rng);
      const auto c = normals(n, rng);
      const auto lp = reduced_lp_rbm(W, b, c);
      std::vector<double> red(m + n);
      for (auto& v : red) v = rng.uniform();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double lo = std::max(0.0, red[i] + red[m + j] - 1.0), hi = std::min(red[i], red[m + j]);
          red.push_back(lo + (hi - lo) * rng.uniform());
        }
      REQUIRE(lp.first_violation(red) == -1);
      const auto full = map_reduced_to_full_rbm(red, m, n);
      const auto std_lp = standard_lp_rbm(W, b, c);
      CHECK(std_lp.first_violation(full) == -1);
      CHECK(std::abs(std_lp.objective_value(full) - lp.objective_value(red)) < 1e-10);
    }
  }
  SUBCASE("integral points score like the model") {
    Rng rng(4);
    auto model = RbmModel::zeros(2, 3);
    model.W = normals(6, rng);
    model.b = normals(2, rng);
    model.c = normals(3, rng);
    const auto lp = reduced_lp_rbm(model.W, model.b, model.c);
    oracle::for_each_state(std::vector<std::int32_t>(5, 2), [&](const std::vector<int>& x) {
      std::vector<double> point(x.begin(), x.end());
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) point.push_back(x[i] * x[2 + j]);
      const std::vector<std::int32_t> h{x[0], x[1]}, v{x[2], x[3], x[4]};
      CHECK(lp.first_violation(point) == -1);
      CHECK(lp.objective_value(point) == doctest::Approx(model.log_score(h, v)).epsilon(1e-12));
    });
  }
}

TEST_CASE("LP text format") {
  SUBCASE("empty program") {
    LinearProgram lp;
    const auto text = serialize_lp(lp);
    CHECK(text.find("Maximize") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);
    const auto back = parse_lp(text);
    CHECK(back.num_variables() == 0);
    CHECK(back.num_constraints() == 0);
  }
  SUBCASE("two-variable Ising document has ten rows") {
    const auto lp = reduced_lp_ising(std::vector<double>{0.0, 1.5, 1.5, 0.0}, std::vector<double>{-0.5, 0.25});
    const auto text = serialize_lp(lp);
    const auto start = text.find("Subject To"), stop = text.find("Bounds");
    CHECK(std::count(text.begin() + static_cast<long>(start), text.begin() + static_cast<long>(stop), '\n') == 11);
    CHECK(parse_lp(text).num_constraints() == 10);
  }
  SUBCASE("random round trip") {
    Rng rng(5);
    LinearProgram lp;
    lp.maximize = false;
    for (int k = 0; k < 8; ++k) {
      const double lo = rng.below(3) == 0 ? -kLpInfinity : -rng.uniform();
      const double hi = rng.below(3) == 0 ? kLpInfinity : 1.0 + rng.uniform();
      lp.add_variable("x" + std::to_string(k), rng.normal() / 3.0, lo, hi);
    }
    for (int r = 0; r < 6; ++r) {
      std::vector<std::pair<std::size_t, double>> coeffs;
      for (std::size_t k = 0; k < 8; ++k)
        if (rng.below(2)) coeffs.emplace_back(k, rng.normal() * 1e3);
      if (coeffs.empty()) coeffs.emplace_back(0, 1.0);
      lp.add_row("r" + std::to_string(r), coeffs, static_cast<Sense>(rng.below(3)), rng.normal());
    }
    const auto back = parse_lp(serialize_lp(lp));
    CHECK(back.maximize == lp.maximize);
    CHECK(back.names == lp.names);
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(std::abs(back.objective[k] - lp.objective[k]) <= 1e-12 * std::abs(lp.objective[k]));
      CHECK(back.lower[k] == lp.lower[k]);
      CHECK(back.upper[k] == lp.upper[k]);
    }
    REQUIRE(back.rows.size() == lp.rows.size());
    for (std::size_t r = 0; r < lp.rows.size(); ++r) {
      CHECK(back.rows[r].name == lp.rows[r].name);
      CHECK(back.rows[r].sense == lp.rows[r].sense);
      CHECK(back.rows[r].rhs == lp.rows[r].rhs);
      REQUIRE(back.rows[r].coeffs.size() == lp.rows[r].coeffs.size());
      for (std::size_t t = 0; t < lp.rows[r].coeffs.size(); ++t) {
        CHECK(back.rows[r].coeffs[t].first == lp.rows[r].coeffs[t].first);
        CHECK(back.rows[r].coeffs[t].second == lp.rows[r].coeffs[t].second);
      }
    }
  }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(parse_lp("Maximize\n obj: 2 x +\nEnd\n"), ParseError);
    CHECK_THROWS_AS(parse_lp("Subject To\n c: x <= 1\n"), ParseError);
  }
  SUBCASE("invalid programs are not written") {
    LinearProgram lp;
    lp.add_variable("x", 1.0);
    lp.add_variable("x", 2.0);
    CHECK_THROWS_AS(serialize_lp(lp), StructuralError);
  }
}
