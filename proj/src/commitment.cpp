#include "elmarket/commitment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

namespace elmarket {

namespace {

constexpr double kIntegralityTolerance = 1e-6;

void add_column(QuadraticProgram& qp, Column column, double cost) {
  const auto j = static_cast<Eigen::Index>(qp.columns.size());
  qp.columns.push_back(column);
  qp.fixed.push_back(std::nullopt);
  qp.linear.conservativeResize(j + 1);
  qp.linear[j] = cost;
}

double gap_of(double lower, double upper) {
  return (upper - lower) / std::max(1.0, std::abs(upper));
}

std::vector<std::uint8_t> round_pattern(const CommitmentProgram& program,
                                        const Eigen::VectorXd& x) {
  std::vector<std::uint8_t> pattern(program.size());
  for (std::size_t k = 0; k < program.size(); ++k) {
    pattern[k] = x[static_cast<Eigen::Index>(program.binaries[k].on_column)] >= 0.5;
  }
  return pattern;
}

double on_value(const CommitmentBinary& b, std::span<const std::uint8_t> pattern,
                std::optional<std::size_t> k) {
  return k ? static_cast<double>(pattern[*k]) : b.initial_on;
}

}  // namespace

CommitmentProgram assemble_uc(const ModelInstance& instance) {
  if (instance.theta != 0.0) {
    std::ostringstream msg;
    msg << "the unit-commitment model extends the perfect-competition objective "
           "and requires theta = 0 (got theta = "
        << instance.theta << ")";
    throw DataError(msg.str());
  }
  CommitmentProgram program;
  program.relaxation = assemble_single_opt(instance);
  auto& qp = program.relaxation;
  const std::size_t U = instance.units.size();
  const std::size_t T = instance.periods();
  const std::size_t S = instance.scenario_count();

  double max_supply = 0.0;
  for (double a : instance.time.demand_intercept) {
    max_supply = std::max(max_supply, a / instance.time.demand_slope);
  }

  for (std::size_t u = 0; u < U; ++u) {
    const auto& unit = instance.units[u];
    if (!unit.existing && !instance.commit_invested_capacity) continue;
    // Nothing to decide: such a unit is always available at no cost.
    if (unit.online_cost == 0.0 && unit.startup_cost == 0.0 && unit.q_min == 0.0) continue;
    for (std::size_t s = 0; s < S; ++s) {
      std::optional<std::size_t> previous;
      for (std::size_t t = 0; t < T; ++t) {
        const double w = instance.weight(t, s);
        const double cf = instance.capacity_factor(u, t, s);
        CommitmentBinary b;
        b.unit = u;
        b.period = t;
        b.scenario = s;
        b.previous = previous;
        b.initial_on = unit.initial_on ? 1.0 : 0.0;
        b.branch_weight = cf * unit.q_max;
        b.on_column = qp.columns.size();
        add_column(qp, {ColumnRole::commitment, u, t, s}, -w * unit.online_cost);
        b.startup_column = qp.columns.size();
        add_column(qp, {ColumnRole::startup, u, t, s}, -w * unit.startup_cost);
        previous = program.binaries.size();
        program.binaries.push_back(b);
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(qp.columns.size());
  qp.quadratic.conservativeResize(n, n);

  for (const auto& b : program.binaries) {
    const auto& unit = instance.units[b.unit];
    const std::size_t q = qp.generation_column(b.unit, b.period, b.scenario);
    const double cf = instance.capacity_factor(b.unit, b.period, b.scenario);

    if (unit.existing) {
      // q - CF Q^max on - CF Inv <= 0
      auto& capacity = qp.rows[(b.unit * qp.periods + b.period) * qp.scenarios + b.scenario];
      capacity.bound = 0.0;
      if (cf * unit.q_max != 0.0) capacity.coeffs.emplace_back(b.on_column, -cf * unit.q_max);
    } else {
      // Gated investment: q <= M on alongside q <= CF Inv.
      qp.rows.push_back({{{q, 1.0}, {b.on_column, -max_supply}},
                         0.0,
                         {RowKind::invested_commitment, b.unit, b.period, b.scenario}});
    }
    if (unit.q_min > 0.0) {
      qp.rows.push_back({{{q, -1.0}, {b.on_column, unit.q_min}},
                         0.0,
                         {RowKind::min_generation, b.unit, b.period, b.scenario}});
    }
    qp.rows.push_back({{{b.on_column, 1.0}},
                       1.0,
                       {RowKind::commitment_bound, b.unit, b.period, b.scenario}});

    // on_t - on_{t-1} - su_t <= 0   (sd >= 0)
    LinearRow startup{{{b.on_column, 1.0}, {b.startup_column, -1.0}},
                      0.0,
                      {RowKind::startup_logic, b.unit, b.period, b.scenario}};
    // 2 su_t - on_t + on_{t-1} <= 1   (su + sd <= 1)
    LinearRow transition{{{b.startup_column, 2.0}, {b.on_column, -1.0}},
                         1.0,
                         {RowKind::transition_limit, b.unit, b.period, b.scenario}};
    if (b.previous) {
      const auto prev = program.binaries[*b.previous].on_column;
      startup.coeffs.emplace_back(prev, -1.0);
      transition.coeffs.emplace_back(prev, 1.0);
    } else {
      startup.bound += b.initial_on;
      transition.bound -= b.initial_on;
    }
    qp.rows.push_back(std::move(startup));
    qp.rows.push_back(std::move(transition));
  }
  return program;
}

CommitmentSchedule derive_schedule(const CommitmentProgram& program,
                                   std::span<const std::uint8_t> pattern) {
  const auto& qp = program.relaxation;
  CommitmentSchedule schedule;
  schedule.units = qp.units;
  schedule.periods = qp.periods;
  schedule.scenarios = qp.scenarios;
  const std::size_t cells = qp.units * qp.periods * qp.scenarios;
  schedule.on.assign(cells, 0);
  schedule.startup.assign(cells, 0);
  schedule.shutdown.assign(cells, 0);
  schedule.initial_on.assign(qp.units * qp.scenarios, 0);
  for (std::size_t k = 0; k < program.size(); ++k) {
    const auto& b = program.binaries[k];
    const double now = pattern[k];
    const double before = on_value(b, pattern, b.previous);
    const auto i = schedule.index(b.unit, b.period, b.scenario);
    schedule.on[i] = pattern[k];
    schedule.startup[i] = now > before;
    schedule.shutdown[i] = now < before;
    if (!b.previous) schedule.initial_on[b.unit * qp.scenarios + b.scenario] = b.initial_on > 0.5;
  }
  return schedule;
}

std::optional<FixedPatternResult> solve_fixed_pattern(
    const CommitmentProgram& program, std::span<const std::uint8_t> pattern,
    double tolerance) {
  if (pattern.size() != program.size()) {
    throw std::invalid_argument("solve_fixed_pattern: pattern size mismatch");
  }
  FixedPatternResult result;
  result.program = program.relaxation;
  for (std::size_t k = 0; k < program.size(); ++k) {
    const auto& b = program.binaries[k];
    const double now = pattern[k];
    const double before = on_value(b, pattern, b.previous);
    result.program.fixed[b.on_column] = now;
    result.program.fixed[b.startup_column] = std::max(0.0, now - before);
  }
  SolverOptions options;
  options.tolerance = tolerance;
  result.raw = solve_qp(result.program, options);
  if (result.raw.status == QpStatus::infeasible) return std::nullopt;
  return result;
}

CommitmentSolution make_commitment_solution(const CommitmentProgram& program,
                                            std::span<const std::uint8_t> pattern,
                                            const FixedPatternResult& fixed) {
  CommitmentSolution solution;
  solution.market = extract_prices_and_duals(fixed.program, fixed.raw);
  solution.schedule = derive_schedule(program, pattern);
  solution.pattern.assign(pattern.begin(), pattern.end());
  solution.kkt = kkt_residual(fixed.program, fixed.raw.x, fixed.raw.row_duals);
  solution.lower_bound = fixed.raw.objective;
  solution.upper_bound = fixed.raw.objective;
  solution.gap = 0.0;
  return solution;
}

std::optional<RawSolution> solve_node(const CommitmentProgram& program,
                                      std::span<const std::int8_t> fixings,
                                      double tolerance) {
  QuadraticProgram qp = program.relaxation;
  for (std::size_t k = 0; k < program.size(); ++k) {
    if (fixings[k] >= 0) qp.fixed[program.binaries[k].on_column] = fixings[k];
  }
  SolverOptions options;
  options.tolerance = tolerance;
  auto raw = solve_qp(qp, options);
  if (raw.status == QpStatus::infeasible) return std::nullopt;
  return raw;
}

CommitmentSolution rounding_heuristic(const CommitmentProgram& program,
                                      const RawSolution& relaxation, double tolerance,
                                      std::size_t improvement_budget) {
  const auto& qp = program.relaxation;
  std::vector<std::uint8_t> pattern = round_pattern(program, relaxation.x);

  // Existing units whose minimum output exceeds CF Q^max cannot be on.
  auto min_gen_infeasible = [&](const CommitmentBinary& b) {
    double q_min = 0.0;
    double capacity = 0.0;
    bool gated = false;
    for (const auto& row : qp.rows) {
      if (row.tag.unit != b.unit || row.tag.period != b.period ||
          row.tag.scenario != b.scenario) {
        continue;
      }
      for (const auto& [j, a] : row.coeffs) {
        if (j != b.on_column) continue;
        if (row.tag.kind == RowKind::min_generation) q_min = a;
        if (row.tag.kind == RowKind::capacity) capacity = -a;
      }
      gated = gated || row.tag.kind == RowKind::invested_commitment;
    }
    return !gated && q_min > capacity + 1e-9;
  };

  for (std::size_t k = 0; k < program.size(); ++k) {
    if (pattern[k] && min_gen_infeasible(program.binaries[k])) pattern[k] = 0;
  }

  auto fixed = solve_fixed_pattern(program, pattern, tolerance);
  while (!fixed) {
    // Switch off the weakest committed binary and retry; all-off is feasible.
    std::optional<std::size_t> weakest;
    double weakest_value = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < program.size(); ++k) {
      if (!pattern[k]) continue;
      const double v = relaxation.x[static_cast<Eigen::Index>(program.binaries[k].on_column)];
      if (v < weakest_value || (v == weakest_value && weakest && k > *weakest)) {
        weakest_value = v;
        weakest = k;
      }
    }
    if (!weakest) throw std::logic_error("rounding_heuristic: all-off pattern infeasible");
    pattern[*weakest] = 0;
    fixed = solve_fixed_pattern(program, pattern, tolerance);
  }
  // Local improvement, first improvement, within the solve budget: single
  // flips, then runs of consecutive periods of one unit set on or off
  // together, which is how startup costs are recovered, then swaps.
  std::vector<std::vector<std::size_t>> chains;
  {
    std::vector<std::optional<std::size_t>> next(program.size());
    for (std::size_t k = 0; k < program.size(); ++k) {
      if (program.binaries[k].previous) next[*program.binaries[k].previous] = k;
    }
    for (std::size_t k = 0; k < program.size(); ++k) {
      if (program.binaries[k].previous) continue;
      chains.emplace_back();
      for (std::optional<std::size_t> c = k; c; c = next[*c]) chains.back().push_back(*c);
    }
  }
  std::size_t solves = 0;
  auto attempt = [&](std::vector<std::uint8_t> trial) {
    if (trial == pattern || solves >= improvement_budget) return false;
    ++solves;
    auto candidate = solve_fixed_pattern(program, trial, tolerance);
    const double best = fixed->raw.objective;
    if (!candidate || candidate->raw.objective <= best + 1e-9 * std::max(1.0, std::abs(best))) {
      return false;
    }
    fixed = std::move(candidate);
    pattern = std::move(trial);
    return true;
  };
  bool improved = true;
  while (improved && solves < improvement_budget) {
    improved = false;
    for (std::size_t k = 0; k < program.size(); ++k) {
      auto trial = pattern;
      trial[k] ^= 1U;
      improved = attempt(std::move(trial)) || improved;
    }
    for (const auto& chain : chains) {
      for (std::size_t first = 0; first < chain.size(); ++first) {
        for (std::size_t last = first + 1; last < chain.size(); ++last) {
          for (std::uint8_t value : {std::uint8_t{1}, std::uint8_t{0}}) {
            auto trial = pattern;
            for (std::size_t i = first; i <= last; ++i) trial[chain[i]] = value;
            improved = attempt(std::move(trial)) || improved;
          }
        }
      }
    }
    // Swaps only once the cheaper moves are exhausted: a whole unit schedule
    // set on or off together with one flip elsewhere.
    for (std::size_t c = 0; !improved && c < chains.size(); ++c) {
      for (std::uint8_t value : {std::uint8_t{0}, std::uint8_t{1}}) {
        for (std::size_t k = 0; k < program.size(); ++k) {
          auto trial = pattern;
          for (std::size_t i : chains[c]) trial[i] = value;
          if (std::find(chains[c].begin(), chains[c].end(), k) != chains[c].end()) continue;
          trial[k] ^= 1U;
          improved = attempt(std::move(trial)) || improved;
        }
      }
    }
  }

  auto solution = make_commitment_solution(program, pattern, *fixed);
  solution.heuristic = true;
  solution.upper_bound = std::max(solution.lower_bound, relaxation.objective);
  solution.gap = gap_of(solution.lower_bound, solution.upper_bound);
  return solution;
}

namespace {

struct Node {
  double bound = 0.0;
  std::size_t id = 0;
  std::size_t parent = 0;
  std::size_t depth = 0;
  std::vector<std::int8_t> fixings;
  Eigen::VectorXd x;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

}  // namespace

CommitmentSolution solve_branch_and_bound(const CommitmentProgram& program,
                                          const BranchAndBoundOptions& options) {
  if (!(options.gap_target > 0.0)) {
    throw std::invalid_argument("solve_branch_and_bound: gap_target must be positive");
  }
  const std::size_t k_count = program.size();
  std::vector<std::int8_t> root_fixings(k_count, -1);
  auto root = solve_node(program, root_fixings, options.tolerance);
  if (!root) {
    throw std::logic_error("solve_branch_and_bound: root relaxation infeasible");
  }

  // Plain rounding seeds the search; improving it costs more solves than the
  // search itself saves.
  CommitmentSolution incumbent = rounding_heuristic(program, *root, options.tolerance, 0);
  incumbent.heuristic = false;
  auto prune_below = [&] {
    return incumbent.lower_bound +
           options.gap_target * std::max(1.0, std::abs(incumbent.lower_bound));
  };
  auto try_pattern = [&](std::vector<std::uint8_t> pattern) {
    auto fixed = solve_fixed_pattern(program, pattern, options.tolerance);
    if (fixed && fixed->raw.objective > incumbent.lower_bound) {
      incumbent = make_commitment_solution(program, pattern, *fixed);
    }
  };
  auto fractional = [&](const Node& node) {
    std::optional<std::size_t> pick;
    double best = kIntegralityTolerance;
    std::size_t count = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      if (node.fixings[k] >= 0) continue;
      const double v = node.x[static_cast<Eigen::Index>(program.binaries[k].on_column)];
      const double frac = std::min(v, 1.0 - v);
      if (frac <= kIntegralityTolerance) continue;
      ++count;
      if (frac > best + 1e-12 ||
          (pick && std::abs(frac - best) <= 1e-12 &&
           program.binaries[k].branch_weight > program.binaries[*pick].branch_weight)) {
        best = frac;
        pick = k;
      }
    }
    return std::pair{pick, count};
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::size_t next_id = 0;
  open.push({root->regularized_objective, next_id++, 0, 0, root_fixings, root->x});
  double pruned_bound = -std::numeric_limits<double>::infinity();
  std::size_t explored = 0;
  std::size_t solved = 1;
  bool limit_reached = false;

  // One log line per relaxation, written when it is solved.
  auto log_node = [&](const Node& node) {
    if (!options.node_log) return;
    *options.node_log << node.id << '\t' << node.parent << '\t' << node.depth << '\t'
                      << node.bound << '\t' << incumbent.lower_bound << '\t'
                      << fractional(node).second << '\n';
  };
  if (options.node_log) *options.node_log << "node\tparent\tdepth\tbound\tincumbent\tfractional\n";
  log_node(open.top());

  while (!open.empty()) {
    if (open.top().bound <= prune_below()) {
      pruned_bound = std::max(pruned_bound, open.top().bound);
      break;
    }
    if (explored >= options.node_limit) {
      limit_reached = true;
      break;
    }
    Node node = open.top();
    open.pop();
    ++explored;
    const auto pick = fractional(node).first;
    if (!pick) {
      try_pattern(round_pattern(program, node.x));
      continue;
    }
    for (std::int8_t value : {std::int8_t{1}, std::int8_t{0}}) {
      Node child;
      child.fixings = node.fixings;
      child.fixings[*pick] = value;
      auto raw = solve_node(program, child.fixings, options.tolerance);
      ++solved;
      if (!raw) continue;
      child.bound = raw->regularized_objective;
      child.id = next_id++;
      child.parent = node.id;
      child.depth = node.depth + 1;
      child.x = std::move(raw->x);
      log_node(child);
      if (child.bound <= prune_below()) {
        pruned_bound = std::max(pruned_bound, child.bound);
        continue;
      }
      open.push(std::move(child));
    }
  }

  double upper = std::max(incumbent.lower_bound, pruned_bound);
  if (!open.empty()) upper = std::max(upper, open.top().bound);
  incumbent.upper_bound = upper;
  incumbent.gap = gap_of(incumbent.lower_bound, upper);
  incumbent.nodes_explored = solved;
  incumbent.heuristic = limit_reached && incumbent.gap > options.gap_target;
  return incumbent;
}

}  // namespace elmarket
