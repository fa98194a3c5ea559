#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "elmarket/commitment.hpp"
#include "elmarket/oracles.hpp"
#include "support.hpp"

using namespace elmarket;
using namespace elmarket::testing;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

bool satisfies_rows(const QuadraticProgram& qp, const Eigen::VectorXd& x) {
  for (const auto& row : qp.rows) {
    double lhs = 0.0;
    for (const auto& [j, a] : row.coeffs) lhs += a * x[static_cast<Eigen::Index>(j)];
    if (lhs > row.bound + 1e-12) return false;
  }
  return true;
}

BranchAndBoundOptions exact() {
  BranchAndBoundOptions options;
  options.gap_target = 1e-9;
  return options;
}

}  // namespace

TEST_CASE("single-unit commitment", "[uc]") {
  SECTION("starting the unit pays") {
    const auto program = assemble_uc(single_unit_uc(5.0));
    REQUIRE(program.size() == 1);
    const auto sol = solve_branch_and_bound(program);
    CHECK_THAT(sol.lower_bound, WithinAbs(2740.0, 1e-6));
    CHECK(sol.schedule.on[sol.schedule.index(0, 0, 0)] == 1);
    CHECK(sol.schedule.startup[sol.schedule.index(0, 0, 0)] == 1);
    CHECK(sol.schedule.shutdown[sol.schedule.index(0, 0, 0)] == 0);
    CHECK_THAT(sol.market.q(0, 0, 0), WithinAbs(50.0, 1e-6));
    CHECK(sol.gap <= 1e-4);
  }
  SECTION("an expensive startup keeps it off") {
    const auto sol = solve_branch_and_bound(assemble_uc(single_unit_uc(3000.0)));
    CHECK_THAT(sol.lower_bound, WithinAbs(0.0, 1e-6));
    CHECK(sol.schedule.on[sol.schedule.index(0, 0, 0)] == 0);
    CHECK_THAT(sol.market.q(0, 0, 0), WithinAbs(0.0, 1e-9));
  }
}

TEST_CASE("commitment rows at a fractional status", "[uc]") {
  const auto program = assemble_uc(single_unit_uc(5.0));
  const auto& qp = program.relaxation;
  const auto& binary = program.binaries.at(0);
  const auto q = qp.generation_column(0, 0, 0);
  auto point = [&](double on, double output) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(qp.size()));
    x[static_cast<Eigen::Index>(binary.on_column)] = on;
    x[static_cast<Eigen::Index>(binary.startup_column)] = on;  // cold start
    x[static_cast<Eigen::Index>(q)] = output;
    return x;
  };
  CHECK(satisfies_rows(qp, point(0.5, 5.0)));
  CHECK_FALSE(satisfies_rows(qp, point(0.5, 4.9)));
  CHECK(satisfies_rows(qp, point(0.5, 25.0)));
  CHECK_FALSE(satisfies_rows(qp, point(0.5, 25.1)));
  CHECK(satisfies_rows(qp, point(0.0, 0.0)));
  CHECK_FALSE(satisfies_rows(qp, point(0.0, 1.0)));
}

TEST_CASE("invested capacity dispatches without commitment", "[uc]") {
  auto m = single_unit_uc(5.0);
  const auto u = add_candidate(m, 0, Technology::gas, 10.0, 30.0);
  SECTION("literal reading carries no binary for the candidate") {
    const auto program = assemble_uc(m);
    CHECK(program.size() == 1);
    const auto sol = solve_branch_and_bound(program, exact());
    CHECK(sol.market.investment[u] > 0.0);
    CHECK(sol.market.q(u, 0, 0) <= sol.market.investment[u] + 1e-9);
  }
  SECTION("gated variant commits the candidate too") {
    m.commit_invested_capacity = true;
    m.units[u].online_cost = 50.0;
    CHECK(assemble_uc(m).size() == 2);
  }
}

TEST_CASE("theta other than zero is rejected", "[uc]") {
  auto m = single_unit_uc(5.0);
  m.theta = 1.0;
  CHECK_THROWS_AS(assemble_uc(m), DataError);
}

TEST_CASE("without commitment costs the model is the competitive program", "[uc]") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 10; ++k) {
    auto m = random_instance(rng);
    m.theta = 0.0;
    const auto program = assemble_uc(m);
    CHECK(program.size() == 0);
    const auto uc = solve_branch_and_bound(program);
    const auto qp = solve_concave_qp(assemble_single_opt(m));
    CHECK_THAT(uc.lower_bound, WithinRel(qp.solution.objective_value, 1e-6));
  }
}

TEST_CASE("branch-and-bound matches enumeration", "[uc][property]") {
  std::mt19937_64 rng(22);
  for (int k = 0; k < 40; ++k) {
    const auto program = assemble_uc(random_uc_instance(rng));
    const auto bb = solve_branch_and_bound(program, exact());
    const auto brute = brute_force_uc(program, 12);
    CHECK_THAT(bb.lower_bound, WithinRel(brute.lower_bound, 1e-6) || WithinAbs(brute.lower_bound, 1e-6));
    CHECK(bb.lower_bound <= bb.upper_bound + 1e-6 * std::abs(bb.upper_bound));
    CHECK(bb.nodes_explored >= 1);
    CHECK(bb.kkt.certified(1e-6));
  }
}

TEST_CASE("incumbents satisfy the commitment logic exactly", "[uc][property]") {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 30; ++k) {
    const auto m = random_uc_instance(rng);
    const auto program = assemble_uc(m);
    const auto sol = solve_branch_and_bound(program, exact());
    const auto& sch = sol.schedule;
    for (std::size_t u = 0; u < m.units.size(); ++u) {
      for (std::size_t s = 0; s < m.scenario_count(); ++s) {
        int previous = sch.initial_on[u * sch.scenarios + s];
        int transitions = 0, startups = 0;
        for (std::size_t t = 0; t < m.periods(); ++t) {
          const auto i = sch.index(u, t, s);
          const int on = sch.on[i];
          CHECK(sch.startup[i] - sch.shutdown[i] == on - previous);
          CHECK(sch.startup[i] + sch.shutdown[i] <= 1);
          if (on == 1 && previous == 0) ++transitions;
          startups += sch.startup[i];
          previous = on;
        }
        CHECK(startups == transitions);
      }
    }
    for (const auto& b : program.binaries) {
      const auto& unit = m.units[b.unit];
      const double on = sch.on[sch.index(b.unit, b.period, b.scenario)];
      const double q = sol.market.q(b.unit, b.period, b.scenario);
      const double cf = m.capacity_factor(b.unit, b.period, b.scenario);
      CHECK(q >= on * unit.q_min - 1e-9);
      CHECK(q <= cf * (on * unit.q_max + sol.market.investment[b.unit]) + 1e-9);
    }
  }
}

TEST_CASE("relaxation bounds shrink under fixing", "[uc][property]") {
  std::mt19937_64 rng(24);
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < 20; ++k) {
    const auto program = assemble_uc(random_uc_instance(rng));
    std::vector<std::int8_t> fixings(program.size(), -1);
    auto parent = solve_node(program, fixings);
    REQUIRE(parent.has_value());
    for (std::size_t i = 0; i < program.size(); ++i) {
      fixings[i] = coin(rng) ? 1 : 0;
      const auto child = solve_node(program, fixings);
      if (!child) break;
      CHECK(child->regularized_objective <=
            parent->regularized_objective + 1e-9 * std::max(1.0, std::abs(parent->regularized_objective)));
      parent = child;
    }
  }
}

TEST_CASE("rounding heuristic", "[uc]") {
  SECTION("an integral relaxation is returned unchanged") {
    const auto program = assemble_uc(single_unit_uc(5.0));
    const auto relaxation = solve_qp(program.relaxation);
    const auto sol = rounding_heuristic(program, relaxation);
    CHECK(sol.pattern == std::vector<std::uint8_t>{1});
    CHECK_THAT(sol.lower_bound, WithinAbs(2740.0, 1e-6));
  }
  SECTION("stays within five percent of the optimum on the desk-scale suite") {
    std::mt19937_64 rng(25);
    for (int k = 0; k < 40; ++k) {
      const auto program = assemble_uc(random_uc_instance(rng));
      const auto relaxation = solve_qp(program.relaxation);
      const auto heuristic = rounding_heuristic(program, relaxation);
      const auto optimum = solve_branch_and_bound(program, exact());
      CHECK(heuristic.lower_bound >= 0.0);
      CHECK(heuristic.lower_bound >= 0.95 * optimum.lower_bound - 1e-6);
      CHECK(heuristic.lower_bound <= optimum.lower_bound + 1e-6 * std::abs(optimum.lower_bound));
    }
  }
}

TEST_CASE("node log has one line per relaxation", "[uc]") {
  std::mt19937_64 rng(26);
  const auto program = assemble_uc(random_uc_instance(rng));
  std::ostringstream log;
  auto options = exact();
  options.node_log = &log;
  const auto sol = solve_branch_and_bound(program, options);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "node\tparent\tdepth\tbound\tincumbent\tfractional");
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), '\t') == 5);
  }
  CHECK(lines >= 1);
  CHECK(lines <= sol.nodes_explored);
}

TEST_CASE("search is deterministic", "[uc]") {
  std::mt19937_64 rng(27);
  const auto program = assemble_uc(random_uc_instance(rng));
  const auto a = solve_branch_and_bound(program, exact());
  const auto b = solve_branch_and_bound(program, exact());
  CHECK(a.pattern == b.pattern);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.lower_bound == b.lower_bound);
}
