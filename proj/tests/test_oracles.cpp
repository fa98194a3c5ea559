#include <catch2/catch_amalgamated.hpp>

#include <array>

#include "elmarket/commitment.hpp"
#include "elmarket/oracles.hpp"
#include "support.hpp"

using namespace elmarket;
using namespace elmarket::testing;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("diagonalization finds the Cournot duopoly", "[oracles]") {
  SECTION("symmetric") {
    const auto r = best_response_diagonalization(duopoly(1.0, 10.0, 10.0));
    REQUIRE(r.trace.converged);
    CHECK_THAT(r.solution.q(0, 0, 0), WithinAbs(30.0, 1e-6));
    CHECK_THAT(r.solution.q(1, 0, 0), WithinAbs(30.0, 1e-6));
    CHECK_THAT(r.solution.pi(0, 0), WithinAbs(40.0, 1e-6));
  }
  SECTION("asymmetric") {
    const auto r = best_response_diagonalization(duopoly(1.0, 10.0, 40.0));
    REQUIRE(r.trace.converged);
    CHECK_THAT(r.solution.q(0, 0, 0), WithinAbs(40.0, 1e-6));
    CHECK_THAT(r.solution.q(1, 0, 0), WithinAbs(10.0, 1e-6));
  }
  SECTION("Jacobi updates reach the same point") {
    DiagonalizationOptions options;
    options.order = UpdateOrder::jacobi;
    const auto r = best_response_diagonalization(duopoly(1.0, 10.0, 40.0), options);
    REQUIRE(r.trace.converged);
    CHECK_THAT(r.solution.q(0, 0, 0), WithinAbs(40.0, 1e-6));
  }
  SECTION("monopoly converges in one sweep") {
    auto m = market({100.0});
    m.theta = 1.0;
    add_existing(m, add_firm(m, "f1"), Technology::gas, 1e4, 10.0);
    const auto r = best_response_diagonalization(m);
    REQUIRE(r.trace.converged);
    CHECK(r.trace.iterations <= 2);
    CHECK_THAT(r.solution.q(0, 0, 0), WithinAbs(45.0, 1e-6));
    CHECK_THAT(r.solution.pi(0, 0), WithinAbs(55.0, 1e-6));
  }
  SECTION("sweep changes shrink to the tolerance") {
    DiagonalizationOptions options;
    options.tolerance = 1e-10;
    const auto r = best_response_diagonalization(duopoly(1.0, 10.0, 40.0), options);
    REQUIRE(r.trace.converged);
    REQUIRE_FALSE(r.trace.max_change.empty());
    CHECK(r.trace.max_change.back() <= 1e-10);
  }
}

TEST_CASE("closed-form Cournot", "[oracles]") {
  const std::array<double, 2> equal = {10.0, 10.0};
  const auto q = closed_form_cournot(2, 100.0, 1.0, equal);
  CHECK_THAT(q[0], WithinAbs(30.0, 1e-12));
  CHECK_THAT(q[1], WithinAbs(30.0, 1e-12));
  const std::array<double, 3> three = {10.0, 20.0, 30.0};
  const auto r = closed_form_cournot(3, 100.0, 1.0, three);
  CHECK_THAT(r[0], WithinAbs(30.0, 1e-12));
  CHECK_THAT(r[1], WithinAbs(20.0, 1e-12));
  CHECK_THAT(r[2], WithinAbs(10.0, 1e-12));
  const std::array<double, 2> corner = {10.0, 95.0};
  CHECK_THROWS_AS(closed_form_cournot(2, 100.0, 1.0, corner), CornerSolution);
}

TEST_CASE("closed form agrees with diagonalization for three firms", "[oracles]") {
  auto m = market({120.0}, 0.5);
  m.theta = 1.0;
  const std::array<double, 3> costs = {12.0, 18.0, 25.0};
  for (std::size_t f = 0; f < 3; ++f) {
    add_existing(m, add_firm(m, "f" + std::to_string(f)), Technology::gas, 1e4, costs[f]);
  }
  const auto q = closed_form_cournot(3, 120.0, 0.5, costs);
  DiagonalizationOptions options;
  options.tolerance = 1e-11;
  const auto r = best_response_diagonalization(m, options);
  for (std::size_t f = 0; f < 3; ++f) CHECK_THAT(r.solution.q(f, 0, 0), WithinAbs(q[f], 1e-8));
}

TEST_CASE("each firm is at a best response at the fixed point", "[oracles]") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 10; ++k) {
    auto m = random_instance(rng);
    m.theta = 1.0;
    const auto r = best_response_diagonalization(m);
    REQUIRE(r.trace.converged);
    for (std::size_t f = 0; f < m.firms.size(); ++f) {
      CHECK(firm_kkt_residual(m, r.solution, f).certified(1e-6));
    }
  }
}

TEST_CASE("firm KKT residual detects a deviation", "[oracles]") {
  const auto m = duopoly(1.0, 10.0, 10.0);
  auto s = MarketSolution::zeros(m);
  s.q(0, 0, 0) = 30.0;
  s.q(1, 0, 0) = 30.0;
  CHECK(firm_kkt_residual(m, s, 0).stationarity_residual < 1e-9);
  s.q(0, 0, 0) = 35.0;
  CHECK(firm_kkt_residual(m, s, 0).stationarity_residual > 1.0);
}

TEST_CASE("best-response program folds rivals into the intercept", "[oracles]") {
  const auto m = duopoly(1.0, 10.0, 10.0);
  auto rivals = MarketSolution::zeros(m);
  rivals.q(1, 0, 0) = 30.0;
  const auto qp = best_response_program(m, rivals, 0);
  const auto out = solve_concave_qp(qp);
  CHECK_THAT(out.solution.q(0, 0, 0), WithinAbs(30.0, 1e-6));
}

TEST_CASE("enumeration", "[oracles]") {
  SECTION("single unit") {
    const auto sol = brute_force_uc(assemble_uc(single_unit_uc(5.0)));
    CHECK_THAT(sol.lower_bound, WithinAbs(2740.0, 1e-6));
    CHECK(sol.pattern == std::vector<std::uint8_t>{1});
    CHECK(sol.nodes_explored == 2);
  }
  SECTION("budget is enforced") {
    std::mt19937_64 rng(32);
    ModelInstance m;
    do {
      m = random_uc_instance(rng);
    } while (assemble_uc(m).size() < 3);
    CHECK_THROWS_AS(brute_force_uc(assemble_uc(m), 2), DataError);
  }
}
