#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "elmarket/model.hpp"
#include "elmarket/qp.hpp"

namespace elmarket {

/// One on/off decision of the commitment model and its columns.
struct CommitmentBinary {
  std::size_t unit = 0;
  std::size_t period = 0;
  std::size_t scenario = 0;
  std::size_t on_column = 0;
  std::size_t startup_column = 0;
  std::optional<std::size_t> previous;  // binary of the same unit at period - 1
  double initial_on = 0.0;              // on status before period 0
  double branch_weight = 0.0;           // CF * Q^max, larger branches first
};

/// The mixed-binary welfare program with startup and online costs. The
/// relaxation treats on in [0,1] and startups as continuous; shutdowns are
/// eliminated through sd = su - (on_t - on_{t-1}). Units with no online cost,
/// startup cost or minimum output carry no binary.
struct CommitmentProgram {
  QuadraticProgram relaxation;
  std::vector<CommitmentBinary> binaries;

  std::size_t size() const { return binaries.size(); }
};

/// Cells of units without binaries stay 0.
struct CommitmentSchedule {
  std::size_t units = 0;
  std::size_t periods = 0;
  std::size_t scenarios = 0;
  std::vector<std::uint8_t> on;        // [(unit * periods + period) * scenarios + scenario]
  std::vector<std::uint8_t> startup;
  std::vector<std::uint8_t> shutdown;
  std::vector<std::uint8_t> initial_on;  // [unit * scenarios + scenario]

  std::size_t index(std::size_t unit, std::size_t period, std::size_t scenario) const {
    return (unit * periods + period) * scenarios + scenario;
  }
};

struct CommitmentSolution {
  MarketSolution market;
  CommitmentSchedule schedule;
  std::vector<std::uint8_t> pattern;  // on value per binary
  double lower_bound = 0.0;           // incumbent objective
  double upper_bound = 0.0;           // best proven bound
  double gap = 0.0;
  std::size_t nodes_explored = 0;  // relaxations solved
  bool heuristic = false;  // true when the bound was not closed by search
  KktReport kkt;           // of the continuous program with binaries fixed
};

/// Builds the commitment program. Throws DataError when theta != 0.
CommitmentProgram assemble_uc(const ModelInstance& instance);

struct FixedPatternResult {
  RawSolution raw;
  QuadraticProgram program;  // relaxation with every binary fixed
};

/// Solves the continuous program with every on fixed to `pattern` and
/// startups fixed to the implied transitions. Empty when infeasible.
std::optional<FixedPatternResult> solve_fixed_pattern(
    const CommitmentProgram& program, std::span<const std::uint8_t> pattern,
    double tolerance = 1e-7);

/// Assembles a CommitmentSolution from a feasible fixed-pattern solve.
CommitmentSolution make_commitment_solution(const CommitmentProgram& program,
                                            std::span<const std::uint8_t> pattern,
                                            const FixedPatternResult& fixed);

/// Startup/shutdown implied by an integral on pattern.
CommitmentSchedule derive_schedule(const CommitmentProgram& program,
                                   std::span<const std::uint8_t> pattern);

/// Rounds on >= 0.5 up, repairs infeasible roundings by switching units off
/// and re-solves with the binaries fixed. Single flips, runs of one unit and
/// unit swaps then improve the pattern for at most `improvement_budget`
/// further solves. Bounds are set from the relaxation.
CommitmentSolution rounding_heuristic(const CommitmentProgram& program,
                                      const RawSolution& relaxation,
                                      double tolerance = 1e-7,
                                      std::size_t improvement_budget = 256);

struct BranchAndBoundOptions {
  double gap_target = 1e-4;
  std::size_t node_limit = 1'000'000;
  double tolerance = 1e-7;
  std::ostream* node_log = nullptr;  // tab-separated, one line per node
};

/// Best-first branch-and-bound on the on binaries with the active-set solver
/// at every node. Deterministic.
CommitmentSolution solve_branch_and_bound(const CommitmentProgram& program,
                                          const BranchAndBoundOptions& options = {});

/// Relaxation bound of a node with the given fixings (-1 = free). Returned
/// value is the regularized optimum, which is monotone under fixing.
std::optional<RawSolution> solve_node(const CommitmentProgram& program,
                                      std::span<const std::int8_t> fixings,
                                      double tolerance = 1e-7);

}  // namespace elmarket
