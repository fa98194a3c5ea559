#pragma once

// Slow reference implementations used to check the solvers.

#include <cstddef>
#include <span>
#include <vector>

#include "elmarket/commitment.hpp"
#include "elmarket/model.hpp"
#include "elmarket/qp.hpp"

namespace elmarket {

struct DiagonalizationTrace {
  std::size_t iterations = 0;
  std::vector<double> max_change;  // MW, one entry per sweep
  bool converged = false;
};

enum class UpdateOrder { gauss_seidel, jacobi };

struct DiagonalizationOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
  UpdateOrder order = UpdateOrder::gauss_seidel;
};

struct DiagonalizationResult {
  MarketSolution solution;
  DiagonalizationTrace trace;
};

/// Cycles through the firms, replacing each firm's generation and investment
/// by its profit-maximizing response to the rivals' current output, until no
/// quantity moves by more than the tolerance. Each firm's problem is its own
/// profit with capacity limits and no system-wide SNSP row.
DiagonalizationResult best_response_diagonalization(
    const ModelInstance& instance, const DiagonalizationOptions& options = {});

/// Program of one firm's profit maximization with rival output folded into
/// the intercept.
QuadraticProgram best_response_program(const ModelInstance& instance,
                                       const MarketSolution& rivals,
                                       std::size_t firm);

/// KKT report of the firm's own problem at `solution`, rivals held fixed.
KktReport firm_kkt_residual(const ModelInstance& instance,
                            const MarketSolution& solution, std::size_t firm);

/// Raised when the n-firm Cournot formula leaves the interior.
class CornerSolution : public DataError {
 public:
  using DataError::DataError;
};

/// Interior equilibrium of n-firm linear-demand Cournot without capacities:
/// q_i = (A - n c_i + sum_{j != i} c_j) / ((n + 1) B).
std::vector<double> closed_form_cournot(std::size_t n_firms, double intercept,
                                        double slope, std::span<const double> costs);

/// Exhaustive search over every on pattern. Exact by construction.
CommitmentSolution brute_force_uc(const CommitmentProgram& program,
                                  std::size_t binary_budget = 20,
                                  double tolerance = 1e-7);

}  // namespace elmarket
