#include "elmarket/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace elmarket {

namespace {

constexpr std::array<std::string_view, kTechnologyCount> kTechnologyNames = {
    "gas", "coal", "hydro", "oil", "wind", "solar", "other"};

constexpr double kProbabilityTolerance = 1e-9;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::string_view to_string(Technology tech) {
  return kTechnologyNames[static_cast<std::size_t>(tech)];
}

std::optional<Technology> parse_technology(std::string_view name) {
  for (std::size_t i = 0; i < kTechnologyNames.size(); ++i) {
    if (kTechnologyNames[i] == name) return static_cast<Technology>(i);
  }
  if (name == "other-existing") return Technology::other;
  return std::nullopt;
}

TechnologyTable::TechnologyTable() {
  (*this)[Technology::gas] = {false, false, 0.37};
  (*this)[Technology::coal] = {false, false, 0.90};
  (*this)[Technology::hydro] = {true, false, 0.0};
  (*this)[Technology::oil] = {false, false, 0.75};
  (*this)[Technology::wind] = {true, true, 0.0};
  (*this)[Technology::solar] = {true, true, 0.0};
  (*this)[Technology::other] = {false, false, 0.60};
}

std::string_view to_string(RowKind kind) {
  switch (kind) {
    case RowKind::capacity: return "capacity";
    case RowKind::snsp: return "snsp";
    case RowKind::fix_existing_investment: return "fix-existing-investment";
    case RowKind::min_generation: return "min-generation";
    case RowKind::commitment_bound: return "commitment-bound";
    case RowKind::startup_logic: return "startup-logic";
    case RowKind::transition_limit: return "transition-limit";
    case RowKind::invested_commitment: return "invested-commitment";
  }
  return "unknown";
}

std::string format_tag(const ConstraintTag& tag) {
  std::ostringstream out;
  out << to_string(tag.kind) << '(';
  switch (tag.kind) {
    case RowKind::snsp:
      out << tag.period << ',' << tag.scenario;
      break;
    case RowKind::fix_existing_investment:
      out << tag.unit;
      break;
    default:
      out << tag.unit << ',' << tag.period << ',' << tag.scenario;
  }
  out << ')';
  return out.str();
}

double ModelInstance::capacity_factor(std::size_t unit, std::size_t period,
                                      std::size_t scenario) const {
  const auto& cf = scenarios[scenario].capacity_factor;
  if (cf.empty()) return 1.0;
  return cf[unit * periods() + period];
}

void ModelInstance::set_capacity_factor(std::size_t unit, std::size_t period,
                                        std::size_t scenario, double value) {
  auto& cf = scenarios[scenario].capacity_factor;
  if (cf.size() != units.size() * periods()) {
    cf.assign(units.size() * periods(), 1.0);
  }
  cf[unit * periods() + period] = value;
}

double ModelInstance::total_weight() const {
  double total = 0.0;
  for (std::size_t t = 0; t < periods(); ++t) {
    for (std::size_t s = 0; s < scenarios.size(); ++s) total += weight(t, s);
  }
  return total;
}

std::optional<std::size_t> ModelInstance::find_firm(std::string_view id) const {
  for (std::size_t f = 0; f < firms.size(); ++f) {
    if (firms[f].id == id) return f;
  }
  return std::nullopt;
}

std::optional<std::size_t> ModelInstance::find_unit(std::string_view id) const {
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (units[u].id == id) return u;
  }
  return std::nullopt;
}

std::size_t ModelInstance::add_unit(GenerationUnit unit) {
  if (unit.owner >= firms.size()) {
    throw DataError("unit '" + unit.id + "' names a missing firm");
  }
  const std::size_t index = units.size();
  firms[unit.owner].units.push_back(index);
  units.push_back(std::move(unit));
  for (auto& scenario : scenarios) {
    if (!scenario.capacity_factor.empty()) {
      scenario.capacity_factor.resize(units.size() * periods(), 1.0);
    }
  }
  return index;
}

std::string ValidationReport::summary() const {
  if (ok()) return "pass";
  std::ostringstream out;
  out << violations.size() << " violation(s)";
  for (const auto& v : violations) out << "\n  " << v.path << ": " << v.message;
  return out.str();
}

ValidationReport validate_instance(const ModelInstance& instance) {
  ValidationReport report;
  auto fail = [&](std::string path, std::string message) {
    report.violations.push_back({std::move(path), std::move(message)});
  };

  if (!(instance.theta >= 0.0 && instance.theta <= 1.0)) {
    fail("theta", "theta must lie in [0,1]");
  }
  if (!(instance.snsp_cap > 0.0 && instance.snsp_cap <= 1.0)) {
    fail("snsp_cap", "SNSP cap must lie in (0,1]");
  }

  const auto& time = instance.time;
  const std::size_t T = time.periods();
  if (T == 0) fail("time", "at least one period is required");
  if (time.demand_intercept.size() != T) {
    fail("time.demand_intercept", "expected one intercept per period");
  }
  if (!(time.demand_slope > 0.0) || !finite(time.demand_slope)) {
    fail("time.demand_slope", "demand slope B must be positive and finite");
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (!(time.weight[t] > 0.0) || !finite(time.weight[t])) {
      fail("time.weight[" + std::to_string(t) + "]", "weight must be positive");
    }
    if (t < time.demand_intercept.size() && !finite(time.demand_intercept[t])) {
      fail("time.demand_intercept[" + std::to_string(t) + "]",
           "intercept must be finite");
    }
  }

  if (instance.scenarios.empty()) fail("scenarios", "at least one scenario");
  double probability_sum = 0.0;
  for (std::size_t s = 0; s < instance.scenarios.size(); ++s) {
    const auto& scenario = instance.scenarios[s];
    const std::string path = "scenarios[" + std::to_string(s) + "]";
    if (!(scenario.probability >= 0.0) || !finite(scenario.probability)) {
      fail(path + ".probability", "probability must be non-negative");
    }
    probability_sum += scenario.probability;
    const auto& cf = scenario.capacity_factor;
    if (!cf.empty() && cf.size() != instance.units.size() * T) {
      fail(path + ".capacity_factor", "expected one value per (unit, period)");
      continue;
    }
    for (std::size_t i = 0; i < cf.size(); ++i) {
      if (!(cf[i] >= 0.0 && cf[i] <= 1.0)) {
        std::ostringstream msg;
        msg << "capacity factor " << cf[i] << " outside [0,1]";
        fail(path + ".capacity_factor[" + instance.units[i / T].id + "," +
                 std::to_string(i % T) + "]",
             msg.str());
      }
    }
  }
  if (!instance.scenarios.empty() &&
      std::abs(probability_sum - 1.0) > kProbabilityTolerance) {
    std::ostringstream msg;
    msg << "probabilities sum to " << probability_sum << ", expected 1";
    fail("scenarios", msg.str());
  }

  for (std::size_t t = 0; t < kTechnologyCount; ++t) {
    const auto tech = static_cast<Technology>(t);
    const auto& info = instance.technologies[tech];
    const std::string path = "technologies." + std::string(to_string(tech));
    if (!(info.emission_intensity >= 0.0) || !finite(info.emission_intensity)) {
      fail(path, "emission intensity must be non-negative");
    }
    if (info.non_synchronous && !info.renewable) {
      fail(path, "non-synchronous technologies must be renewable");
    }
    if ((tech == Technology::wind || tech == Technology::solar) &&
        info.emission_intensity != 0.0) {
      fail(path, "wind and solar have zero emission intensity");
    }
  }

  std::vector<int> owner_count(instance.units.size(), 0);
  for (std::size_t f = 0; f < instance.firms.size(); ++f) {
    const auto& firm = instance.firms[f];
    std::set<Technology> candidates;
    for (std::size_t u : firm.units) {
      if (u >= instance.units.size()) {
        fail("firms[" + firm.id + "]", "references a missing unit");
        continue;
      }
      ++owner_count[u];
      if (instance.units[u].owner != f) {
        fail("units[" + instance.units[u].id + "].owner",
             "unit listed by a firm that does not own it");
      }
      if (!instance.units[u].existing &&
          !candidates.insert(instance.units[u].technology).second) {
        fail("firms[" + firm.id + "]",
             "more than one candidate unit for technology " +
                 std::string(to_string(instance.units[u].technology)));
      }
    }
  }

  for (std::size_t u = 0; u < instance.units.size(); ++u) {
    const auto& unit = instance.units[u];
    const std::string path = "units[" + unit.id + "]";
    if (owner_count[u] != 1) {
      fail(path, "unit must belong to exactly one firm");
    }
    if (unit.owner >= instance.firms.size()) fail(path + ".owner", "unknown firm");
    for (double v : {unit.q_max, unit.q_min, unit.marginal_cost,
                     unit.investment_cost, unit.online_cost, unit.startup_cost}) {
      if (!finite(v)) {
        fail(path, "non-finite numeric field");
        break;
      }
    }
    if (!unit.existing) {
      if (unit.q_max != 0.0) {
        fail(path + ".q_max",
             "candidate (new) units must have q_max = 0; capacity comes only "
             "from investment");
      }
      if (!is_investable(unit.technology)) {
        fail(path + ".technology", "other-existing is never investable");
      }
    } else if (unit.q_min > unit.q_max) {
      fail(path + ".q_min", "q_min exceeds q_max");
    }
    if (unit.q_min < 0.0) fail(path + ".q_min", "q_min must be non-negative");
    if (unit.q_max < 0.0) fail(path + ".q_max", "q_max must be non-negative");
    if (unit.marginal_cost < 0.0 || unit.investment_cost < 0.0 ||
        unit.online_cost < 0.0 || unit.startup_cost < 0.0) {
      fail(path, "costs must be non-negative");
    }
  }
  return report;
}

void require_valid(const ModelInstance& instance) {
  const auto report = validate_instance(instance);
  if (!report.ok()) throw DataError("invalid instance: " + report.summary());
}

MarketSolution MarketSolution::zeros(const ModelInstance& instance) {
  MarketSolution solution;
  solution.units = instance.units.size();
  solution.periods = instance.periods();
  solution.scenarios = instance.scenario_count();
  solution.generation.assign(
      solution.units * solution.periods * solution.scenarios, 0.0);
  solution.investment.assign(solution.units, 0.0);
  solution.price.assign(solution.periods * solution.scenarios, 0.0);
  refresh_prices(instance, solution);
  return solution;
}

std::optional<double> MarketSolution::dual(const ConstraintTag& tag) const {
  for (const auto& d : duals) {
    if (d.tag == tag) return d.value;
  }
  return std::nullopt;
}

double inverse_demand(double intercept, double slope, double total_supply) {
  if (!finite(intercept) || !finite(slope) || !finite(total_supply)) {
    throw DataError("inverse_demand: non-finite input");
  }
  return intercept - slope * total_supply;
}

double total_supply(const MarketSolution& solution, std::size_t period,
                    std::size_t scenario) {
  if (period >= solution.periods || scenario >= solution.scenarios) {
    throw std::out_of_range("total_supply: period or scenario out of range");
  }
  double total = 0.0;
  for (std::size_t u = 0; u < solution.units; ++u) {
    total += solution.q(u, period, scenario);
  }
  return total;
}

void check_dimensions(const ModelInstance& instance,
                      const MarketSolution& solution) {
  if (solution.units != instance.units.size() ||
      solution.periods != instance.periods() ||
      solution.scenarios != instance.scenario_count() ||
      solution.generation.size() !=
          solution.units * solution.periods * solution.scenarios ||
      solution.investment.size() != solution.units) {
    throw DataError("solution dimensions do not match the instance");
  }
}

void refresh_prices(const ModelInstance& instance, MarketSolution& solution) {
  check_dimensions(instance, solution);
  solution.price.assign(solution.periods * solution.scenarios, 0.0);
  for (std::size_t t = 0; t < solution.periods; ++t) {
    for (std::size_t s = 0; s < solution.scenarios; ++s) {
      solution.price[t * solution.scenarios + s] =
          inverse_demand(instance.time.demand_intercept[t],
                         instance.time.demand_slope,
                         total_supply(solution, t, s));
    }
  }
}

double firm_profit(const ModelInstance& instance,
                   const MarketSolution& solution, std::size_t firm) {
  if (firm >= instance.firms.size()) {
    throw DataError("firm_profit: unknown firm index " + std::to_string(firm));
  }
  check_dimensions(instance, solution);
  const double investment_weight = instance.investment_weight();
  double profit = 0.0;
  for (std::size_t t = 0; t < instance.periods(); ++t) {
    for (std::size_t s = 0; s < instance.scenario_count(); ++s) {
      const double price =
          inverse_demand(instance.time.demand_intercept[t],
                         instance.time.demand_slope, total_supply(solution, t, s));
      double margin = 0.0;
      for (std::size_t u : instance.firms[firm].units) {
        margin += (price - instance.units[u].marginal_cost) * solution.q(u, t, s);
      }
      profit += instance.weight(t, s) * margin;
    }
  }
  for (std::size_t u : instance.firms[firm].units) {
    profit -= investment_weight * instance.units[u].investment_cost *
              solution.investment[u];
  }
  return profit;
}

double firm_profit(const ModelInstance& instance,
                   const MarketSolution& solution, std::string_view firm_id) {
  const auto firm = instance.find_firm(firm_id);
  if (!firm) throw DataError("firm_profit: unknown firm '" + std::string(firm_id) + "'");
  return firm_profit(instance, solution, *firm);
}

double consumer_surplus_term(const ModelInstance& instance,
                             const MarketSolution& solution) {
  check_dimensions(instance, solution);
  double total = 0.0;
  for (std::size_t t = 0; t < instance.periods(); ++t) {
    for (std::size_t s = 0; s < instance.scenario_count(); ++s) {
      const double supply = total_supply(solution, t, s);
      total += instance.weight(t, s) * 0.5 * instance.time.demand_slope *
               supply * supply;
    }
  }
  return total;
}

}  // namespace elmarket
