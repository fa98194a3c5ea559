#include "elmarket/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace elmarket {

namespace {

ModelInstance firm_subinstance(const ModelInstance& instance, std::size_t firm) {
  ModelInstance sub;
  sub.time = instance.time;
  sub.technologies = instance.technologies;
  sub.theta = 1.0;
  sub.snsp_cap = instance.snsp_cap;
  sub.investment_cost_weighted = instance.investment_cost_weighted;
  sub.firms.push_back({instance.firms[firm].id, instance.firms[firm].name, {}});
  for (const auto& scenario : instance.scenarios) {
    sub.scenarios.push_back({scenario.id, scenario.probability, {}});
  }
  const auto& own = instance.firms[firm].units;
  for (std::size_t u : own) {
    GenerationUnit unit = instance.units[u];
    unit.owner = 0;
    sub.add_unit(unit);
  }
  for (std::size_t s = 0; s < instance.scenario_count(); ++s) {
    for (std::size_t k = 0; k < own.size(); ++k) {
      for (std::size_t t = 0; t < instance.periods(); ++t) {
        const double cf = instance.capacity_factor(own[k], t, s);
        if (cf != 1.0) sub.set_capacity_factor(k, t, s, cf);
      }
    }
  }
  return sub;
}

std::vector<double> rival_intercepts(const ModelInstance& instance,
                                     const MarketSolution& current, std::size_t firm) {
  const std::size_t T = instance.periods();
  const std::size_t S = instance.scenario_count();
  std::vector<double> intercept(T * S);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double rivals = 0.0;
      for (std::size_t u = 0; u < instance.units.size(); ++u) {
        if (instance.units[u].owner != firm) rivals += current.q(u, t, s);
      }
      intercept[t * S + s] =
          instance.time.demand_intercept[t] - instance.time.demand_slope * rivals;
    }
  }
  return intercept;
}

}  // namespace

QuadraticProgram best_response_program(const ModelInstance& instance,
                                       const MarketSolution& rivals,
                                       std::size_t firm) {
  AssemblyOptions options;
  options.include_snsp = false;
  options.intercept_override = rival_intercepts(instance, rivals, firm);
  return assemble_single_opt(firm_subinstance(instance, firm), options);
}

KktReport firm_kkt_residual(const ModelInstance& instance,
                            const MarketSolution& solution, std::size_t firm) {
  const auto qp = best_response_program(instance, solution, firm);
  const auto& own = instance.firms[firm].units;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(qp.size()));
  for (std::size_t k = 0; k < own.size(); ++k) {
    for (std::size_t t = 0; t < qp.periods; ++t) {
      for (std::size_t s = 0; s < qp.scenarios; ++s) {
        x[static_cast<Eigen::Index>(qp.generation_column(k, t, s))] = solution.q(own[k], t, s);
      }
    }
    x[static_cast<Eigen::Index>(qp.investment_column(k))] = solution.investment[own[k]];
  }
  // Multipliers come from the firm's exact response; at a fixed point the
  // given point and the response coincide.
  const auto raw = solve_qp(qp);
  return kkt_residual(qp, x, raw.row_duals);
}

DiagonalizationResult best_response_diagonalization(
    const ModelInstance& instance, const DiagonalizationOptions& options) {
  require_valid(instance);
  DiagonalizationResult result;
  MarketSolution current = MarketSolution::zeros(instance);
  const std::size_t T = instance.periods();
  const std::size_t S = instance.scenario_count();

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    const MarketSolution previous = current;
    double change = 0.0;
    for (std::size_t f = 0; f < instance.firms.size(); ++f) {
      if (instance.firms[f].units.empty()) continue;
      const auto& basis = options.order == UpdateOrder::gauss_seidel ? current : previous;
      const auto qp = best_response_program(instance, basis, f);
      const auto raw = solve_qp(qp);
      if (raw.status == QpStatus::infeasible) {
        throw DataError("best response infeasible for firm " + instance.firms[f].id);
      }
      const auto& own = instance.firms[f].units;
      for (std::size_t k = 0; k < own.size(); ++k) {
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t s = 0; s < S; ++s) {
            const double q = std::max(
                0.0, raw.x[static_cast<Eigen::Index>(qp.generation_column(k, t, s))]);
            change = std::max(change, std::abs(q - current.q(own[k], t, s)));
            current.q(own[k], t, s) = q;
          }
        }
        const double inv =
            std::max(0.0, raw.x[static_cast<Eigen::Index>(qp.investment_column(k))]);
        change = std::max(change, std::abs(inv - current.investment[own[k]]));
        current.investment[own[k]] = inv;
      }
    }
    result.trace.iterations = iter + 1;
    result.trace.max_change.push_back(change);
    if (change <= options.tolerance) {
      result.trace.converged = true;
      break;
    }
  }
  refresh_prices(instance, current);
  double objective = 0.0;
  for (std::size_t f = 0; f < instance.firms.size(); ++f) {
    objective += firm_profit(instance, current, f);
  }
  current.objective_value = objective;
  result.solution = std::move(current);
  return result;
}

std::vector<double> closed_form_cournot(std::size_t n_firms, double intercept,
                                        double slope, std::span<const double> costs) {
  if (n_firms == 0 || costs.size() != n_firms) {
    throw DataError("closed_form_cournot: need one cost per firm");
  }
  if (!(slope > 0.0)) throw DataError("closed_form_cournot: slope must be positive");
  double cost_sum = 0.0;
  for (double c : costs) cost_sum += c;
  const double n = static_cast<double>(n_firms);
  std::vector<double> q(n_firms);
  for (std::size_t i = 0; i < n_firms; ++i) {
    q[i] = (intercept - n * costs[i] + (cost_sum - costs[i])) / ((n + 1.0) * slope);
    if (!(q[i] > 0.0)) {
      std::ostringstream msg;
      msg << "closed_form_cournot: corner solution, firm " << i << " output " << q[i];
      throw CornerSolution(msg.str());
    }
  }
  return q;
}

CommitmentSolution brute_force_uc(const CommitmentProgram& program,
                                  std::size_t binary_budget, double tolerance) {
  const std::size_t k = program.size();
  if (k > binary_budget || k >= 63) {
    throw DataError("brute_force_uc: " + std::to_string(k) +
                    " binaries exceed the budget of " + std::to_string(binary_budget));
  }
  std::optional<CommitmentSolution> best;
  std::vector<std::uint8_t> pattern(k);
  const std::uint64_t count = std::uint64_t{1} << k;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < k; ++i) pattern[i] = (mask >> i) & 1U;
    const auto fixed = solve_fixed_pattern(program, pattern, tolerance);
    if (!fixed) continue;
    if (!best || fixed->raw.objective > best->lower_bound) {
      best = make_commitment_solution(program, pattern, *fixed);
    }
  }
  if (!best) throw std::logic_error("brute_force_uc: no feasible pattern");
  best->nodes_explored = static_cast<std::size_t>(count);
  return *best;
}

}  // namespace elmarket
