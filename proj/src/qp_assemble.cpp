#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "elmarket/qp.hpp"

namespace elmarket {

namespace {

// Columns past this count would need a dense Hessian beyond desk scale.
constexpr std::size_t kMaxColumns = 200000;

}  // namespace

std::string format_column(const Column& column) {
  std::ostringstream out;
  switch (column.role) {
    case ColumnRole::generation:
      out << "q(" << column.unit << ',' << column.period << ',' << column.scenario << ')';
      break;
    case ColumnRole::investment:
      out << "inv(" << column.unit << ')';
      break;
    case ColumnRole::commitment:
      out << "on(" << column.unit << ',' << column.period << ',' << column.scenario << ')';
      break;
    case ColumnRole::startup:
      out << "su(" << column.unit << ',' << column.period << ',' << column.scenario << ')';
      break;
  }
  return out.str();
}

std::optional<std::size_t> QuadraticProgram::column_index(
    const Column& column) const {
  std::size_t guess = columns.size();
  if (column.role == ColumnRole::generation && column.unit < units &&
      column.period < periods && column.scenario < scenarios) {
    guess = generation_column(column.unit, column.period, column.scenario);
  } else if (column.role == ColumnRole::investment && column.unit < units) {
    guess = investment_column(column.unit);
  }
  auto matches = [&](std::size_t j) {
    const auto& c = columns[j];
    if (c.role != column.role || c.unit != column.unit) return false;
    return c.role == ColumnRole::investment ||
           (c.period == column.period && c.scenario == column.scenario);
  };
  if (guess < columns.size() && matches(guess)) return guess;
  for (std::size_t j = units * periods * scenarios + units; j < columns.size(); ++j) {
    if (matches(j)) return j;
  }
  return std::nullopt;
}

double QuadraticProgram::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(quadratic * x) + linear.dot(x);
}

Eigen::VectorXd QuadraticProgram::gradient(const Eigen::VectorXd& x) const {
  return quadratic * x + linear;
}

std::size_t QuadraticProgram::count_rows(RowKind kind) const {
  std::size_t n = 0;
  for (const auto& row : rows) n += row.tag.kind == kind;
  return n;
}

QuadraticProgram assemble_single_opt(const ModelInstance& instance) {
  return assemble_single_opt(instance, AssemblyOptions{});
}

QuadraticProgram assemble_single_opt(const ModelInstance& instance,
                                     const AssemblyOptions& options) {
  require_valid(instance);
  const std::size_t U = instance.units.size();
  const std::size_t T = instance.periods();
  const std::size_t S = instance.scenario_count();
  const std::size_t n = U * T * S + U;
  if (U == 0 || n > kMaxColumns) {
    throw DataError("assemble_single_opt: column count " + std::to_string(n) +
                    " outside the supported range (1.." +
                    std::to_string(kMaxColumns) + ")");
  }

  QuadraticProgram qp;
  qp.units = U;
  qp.periods = T;
  qp.scenarios = S;
  qp.slope = instance.time.demand_slope;
  qp.intercept.resize(T * S);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      qp.intercept[t * S + s] = options.intercept_override.empty()
                                    ? instance.time.demand_intercept[t]
                                    : options.intercept_override.at(t * S + s);
    }
  }

  qp.columns.resize(n);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        qp.columns[qp.generation_column(u, t, s)] = {ColumnRole::generation, u, t, s};
      }
    }
    qp.columns[qp.investment_column(u)] = {ColumnRole::investment, u, 0, 0};
  }
  qp.fixed.assign(n, std::nullopt);

  const double B = instance.time.demand_slope;
  const double theta = instance.theta;
  qp.linear = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(T * S * U * U);

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double w = instance.weight(t, s);
      const double A = qp.intercept[t * S + s];
      for (std::size_t u = 0; u < U; ++u) {
        const auto i = static_cast<int>(qp.generation_column(u, t, s));
        qp.linear[i] = w * (A - instance.units[u].marginal_cost);
        for (std::size_t v = 0; v < U; ++v) {
          // -B (sum q)^2 + 1/2 B (sum q)^2 gives the -B 11' block; the
          // conjectural term adds -theta B on same-owner pairs.
          double h = -w * B;
          if (instance.units[u].owner == instance.units[v].owner) h -= theta * w * B;
          triplets.emplace_back(i, static_cast<int>(qp.generation_column(v, t, s)), h);
        }
      }
    }
  }
  const double investment_weight = instance.investment_weight();
  for (std::size_t u = 0; u < U; ++u) {
    qp.linear[static_cast<Eigen::Index>(qp.investment_column(u))] =
        -investment_weight * instance.units[u].investment_cost;
  }
  qp.quadratic.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  qp.quadratic.setFromTriplets(triplets.begin(), triplets.end());

  // q - CF Inv <= CF Q^max
  for (std::size_t u = 0; u < U; ++u) {
    const auto& unit = instance.units[u];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        const double cf = instance.capacity_factor(u, t, s);
        LinearRow row;
        row.coeffs.emplace_back(qp.generation_column(u, t, s), 1.0);
        if (cf != 0.0) row.coeffs.emplace_back(qp.investment_column(u), -cf);
        row.bound = cf * unit.q_max;
        row.tag = {RowKind::capacity, u, t, s};
        qp.rows.push_back(std::move(row));
      }
    }
  }

  // sum_nonsync q - cap * sum q <= 0
  if (options.include_snsp) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        LinearRow row;
        for (std::size_t u = 0; u < U; ++u) {
          const bool nonsync =
              instance.technologies[instance.units[u].technology].non_synchronous;
          const double coeff = (nonsync ? 1.0 : 0.0) - instance.snsp_cap;
          if (coeff != 0.0) row.coeffs.emplace_back(qp.generation_column(u, t, s), coeff);
        }
        row.bound = 0.0;
        row.tag = {RowKind::snsp, 0, t, s};
        qp.rows.push_back(std::move(row));
      }
    }
  }

  for (std::size_t u = 0; u < U; ++u) {
    if (!instance.units[u].existing) continue;
    LinearRow row;
    row.coeffs.emplace_back(qp.investment_column(u), 1.0);
    row.bound = 0.0;
    row.tag = {RowKind::fix_existing_investment, u, 0, 0};
    qp.rows.push_back(std::move(row));
  }
  return qp;
}

void dump_qp(const QuadraticProgram& qp, std::ostream& out) {
  const auto precision = std::numeric_limits<double>::max_digits10;
  out << "QPDUMP v1\n";
  out << "sense maximize\n";
  out << "columns " << qp.size() << " rows " << qp.rows.size() << " nnz_q "
      << qp.quadratic.nonZeros() << '\n';
  out << std::setprecision(precision);
  for (std::size_t j = 0; j < qp.size(); ++j) {
    out << "col " << j << ' ' << format_column(qp.columns[j]);
    if (qp.fixed[j]) out << " fixed " << *qp.fixed[j];
    out << '\n';
  }
  for (int k = 0; k < qp.quadratic.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.quadratic, k); it; ++it) {
      out << "Q " << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  for (Eigen::Index j = 0; j < qp.linear.size(); ++j) {
    out << "c " << j << ' ' << qp.linear[j] << '\n';
  }
  for (std::size_t i = 0; i < qp.rows.size(); ++i) {
    const auto& row = qp.rows[i];
    out << "row " << i << ' ' << format_tag(row.tag) << " <= " << row.bound;
    for (const auto& [j, a] : row.coeffs) out << ' ' << j << ':' << a;
    out << '\n';
  }
}

MarketSolution extract_prices_and_duals(const QuadraticProgram& qp,
                                        const RawSolution& raw) {
  if (raw.x.size() != static_cast<Eigen::Index>(qp.size()) ||
      raw.row_duals.size() != static_cast<Eigen::Index>(qp.rows.size())) {
    throw std::logic_error("extract_prices_and_duals: solver state does not match program");
  }
  MarketSolution solution;
  solution.units = qp.units;
  solution.periods = qp.periods;
  solution.scenarios = qp.scenarios;
  solution.generation.assign(qp.units * qp.periods * qp.scenarios, 0.0);
  solution.investment.assign(qp.units, 0.0);
  for (std::size_t j = 0; j < qp.size(); ++j) {
    const auto& column = qp.columns[j];
    const double value = std::max(0.0, raw.x[static_cast<Eigen::Index>(j)]);
    if (column.role == ColumnRole::generation) {
      solution.q(column.unit, column.period, column.scenario) = value;
    } else if (column.role == ColumnRole::investment) {
      solution.investment[column.unit] = value;
    }
  }
  for (std::size_t j = 0; j < qp.units * qp.periods * qp.scenarios + qp.units; ++j) {
    if (qp.column_index(qp.columns[j]) != j) {
      throw std::logic_error("extract_prices_and_duals: corrupt column index");
    }
  }
  solution.price.assign(qp.periods * qp.scenarios, 0.0);
  for (std::size_t t = 0; t < qp.periods; ++t) {
    for (std::size_t s = 0; s < qp.scenarios; ++s) {
      solution.price[t * qp.scenarios + s] = inverse_demand(
          qp.intercept[t * qp.scenarios + s], qp.slope, total_supply(solution, t, s));
    }
  }
  solution.duals.reserve(qp.rows.size());
  for (std::size_t i = 0; i < qp.rows.size(); ++i) {
    solution.duals.push_back({qp.rows[i].tag, raw.row_duals[static_cast<Eigen::Index>(i)]});
  }
  solution.objective_value = raw.objective;
  return solution;
}

Eigen::VectorXd to_vector(const QuadraticProgram& qp,
                          const MarketSolution& solution) {
  if (solution.units != qp.units || solution.periods != qp.periods ||
      solution.scenarios != qp.scenarios) {
    throw DataError("solution dimensions do not match the program");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(qp.size()));
  for (std::size_t j = 0; j < qp.size(); ++j) {
    const auto& column = qp.columns[j];
    const auto i = static_cast<Eigen::Index>(j);
    if (qp.fixed[j]) {
      x[i] = *qp.fixed[j];
    } else if (column.role == ColumnRole::generation) {
      x[i] = solution.q(column.unit, column.period, column.scenario);
    } else if (column.role == ColumnRole::investment) {
      x[i] = solution.investment[column.unit];
    }
  }
  return x;
}

Eigen::VectorXd row_duals_vector(const QuadraticProgram& qp,
                                 const MarketSolution& solution) {
  Eigen::VectorXd duals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(qp.rows.size()));
  if (solution.duals.size() == qp.rows.size()) {
    bool aligned = true;
    for (std::size_t i = 0; i < qp.rows.size() && aligned; ++i) {
      aligned = solution.duals[i].tag == qp.rows[i].tag;
    }
    if (aligned) {
      for (std::size_t i = 0; i < qp.rows.size(); ++i) {
        duals[static_cast<Eigen::Index>(i)] = solution.duals[i].value;
      }
      return duals;
    }
  }
  for (std::size_t i = 0; i < qp.rows.size(); ++i) {
    if (auto d = solution.dual(qp.rows[i].tag)) duals[static_cast<Eigen::Index>(i)] = *d;
  }
  return duals;
}

}  // namespace elmarket
