#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "elmarket/model.hpp"

namespace elmarket {

/// What a QP column represents.
enum class ColumnRole { generation, investment, commitment, startup };

struct Column {
  ColumnRole role = ColumnRole::generation;
  std::size_t unit = 0;
  std::size_t period = 0;    // unused for investment columns
  std::size_t scenario = 0;  // unused for investment columns
};

std::string format_column(const Column& column);

/// One linear inequality  sum_j coeffs[j].second * x[coeffs[j].first] <= bound.
struct LinearRow {
  std::vector<std::pair<std::size_t, double>> coeffs;
  double bound = 0.0;
  ConstraintTag tag;
};

/// maximize 1/2 x'Qx + c'x  subject to  rows, x >= 0, fixed columns.
///
/// Q is negative semidefinite for every program built here. Fixed columns are
/// removed from the optimization and held at their value; the unit-commitment
/// search uses them to pin branched binaries.
struct QuadraticProgram {
  std::vector<Column> columns;
  Eigen::SparseMatrix<double> quadratic;
  Eigen::VectorXd linear;
  std::vector<LinearRow> rows;
  std::vector<std::optional<double>> fixed;

  // Market data needed to map a primal point back to prices.
  std::size_t units = 0;
  std::size_t periods = 0;
  std::size_t scenarios = 0;
  std::vector<double> intercept;  // [period * scenarios + scenario]
  double slope = 1.0;

  std::size_t size() const { return columns.size(); }
  std::size_t generation_column(std::size_t unit, std::size_t period,
                                std::size_t scenario) const {
    return (unit * periods + period) * scenarios + scenario;
  }
  std::size_t investment_column(std::size_t unit) const {
    return units * periods * scenarios + unit;
  }
  /// Position of a column in `columns`, recovered from its role. Inverse of
  /// `columns[j]` for every j.
  std::optional<std::size_t> column_index(const Column& column) const;

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  std::size_t count_rows(RowKind kind) const;
};

/// Options controlling the assembly of the single-optimization program.
struct AssemblyOptions {
  // Overrides A_t per (period, scenario) when non-empty; used by the
  // best-response oracle to fold rival output into the intercept.
  std::vector<double> intercept_override;
  bool include_snsp = true;
};

/// Builds the conjectural-variation program for `instance.theta`:
///   sum_{t,s} P_s W_t [ sum_u ((A_t - B sum q - C_u) q_u - C^Inv Inv_u)
///                       + 1/2 B (sum q)^2 - theta 1/2 B sum_f (sum_{u in f} q)^2 ]
/// with capacity rows q <= CF (Q^max + Inv), homogeneous SNSP rows and
/// Inv <= 0 rows for existing units.
QuadraticProgram assemble_single_opt(const ModelInstance& instance);
QuadraticProgram assemble_single_opt(const ModelInstance& instance,
                                     const AssemblyOptions& options);

/// Writes the program in the "QPDUMP v1" sparse text format.
void dump_qp(const QuadraticProgram& qp, std::ostream& out);

// -- solver ----------------------------------------------------------------

enum class QpStatus { optimal, iteration_limit, infeasible };

std::string_view to_string(QpStatus status);

struct SolverOptions {
  double tolerance = 1e-7;
  // Tikhonov weight relative to max(1, ||Q||_inf).
  double regularization = 1e-8;
  std::size_t max_iterations = 0;  // 0 selects 50 * (n + m) + 1000
  // Refine the final working set towards the unregularized minimum-norm optimum.
  bool polish = true;
};

/// Raw primal-dual state produced by the active-set method. Duals follow the
/// maximization convention: grad f - A' row_duals + bound_duals = 0 with both
/// dual vectors non-negative at an optimum.
struct RawSolution {
  QpStatus status = QpStatus::optimal;
  Eigen::VectorXd x;
  Eigen::VectorXd row_duals;
  Eigen::VectorXd bound_duals;
  std::size_t iterations = 0;
  double objective = 0.0;              // true (unregularized) objective
  double regularized_objective = 0.0;  // optimum of objective - eps/2 ||x||^2, before polishing
};

/// Primal active-set method for the concave program. Finds a feasible start
/// with an elastic phase when x = 0 (with fixed columns) is infeasible.
RawSolution solve_qp(const QuadraticProgram& qp,
                     const SolverOptions& options = {});

struct KktReport {
  double stationarity_residual = 0.0;
  double primal_infeasibility = 0.0;
  double complementarity_residual = 0.0;
  std::size_t dual_sign_violations = 0;
  // The first three residuals divided by the problem scale.
  double scaled_stationarity = 0.0;
  double scaled_infeasibility = 0.0;
  double scaled_complementarity = 0.0;

  bool certified(double tolerance) const {
    return scaled_stationarity <= tolerance &&
           scaled_infeasibility <= tolerance &&
           scaled_complementarity <= tolerance && dual_sign_violations == 0;
  }
  double worst_scaled() const;
};

/// Residuals of the KKT system at (x, row duals). Bound duals are implied by
/// the stationarity equation on columns that sit at their lower bound.
KktReport kkt_residual(const QuadraticProgram& qp, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& row_duals);
KktReport kkt_residual(const QuadraticProgram& qp,
                       const MarketSolution& solution);

/// Maps a solver state onto the market view: generation, investment,
/// recomputed prices and tagged row duals.
MarketSolution extract_prices_and_duals(const QuadraticProgram& qp,
                                        const RawSolution& raw);

/// Flattens a market solution back into a QP point (generation and
/// investment columns only).
Eigen::VectorXd to_vector(const QuadraticProgram& qp,
                          const MarketSolution& solution);
Eigen::VectorXd row_duals_vector(const QuadraticProgram& qp,
                                 const MarketSolution& solution);

struct QpOutcome {
  MarketSolution solution;
  KktReport kkt;
  QpStatus status = QpStatus::optimal;
  std::size_t iterations = 0;
};

/// Solves the program and certifies the result. An iteration limit returns
/// the best iterate with its KKT report rather than throwing.
QpOutcome solve_concave_qp(const QuadraticProgram& qp, double tolerance = 1e-7);

}  // namespace elmarket
