#pragma once

// Batch driver behind the command-line tool.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "elmarket/dataio.hpp"
#include "elmarket/reporting.hpp"

namespace elmarket {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitDataError = 2,
  kExitNonConvergence = 3,
  kExitCertificationFailure = 4,
};

enum class UcMode { automatic, exact, heuristic };

std::string_view to_string(UcMode mode);
std::optional<UcMode> parse_uc_mode(std::string_view name);

struct RunConfig {
  std::filesystem::path manifest;  // optional when every file is given
  std::optional<std::filesystem::path> data_root;
  // Per-file overrides of the manifest.
  std::optional<std::filesystem::path> firms, units, technologies, time_grid, scenarios,
      capacity_factors, technology_profiles;

  std::vector<ModelKind> models = {ModelKind::perfect, ModelKind::perfect_uc,
                                   ModelKind::cournot};
  std::vector<DemandCase> demand_cases = {DemandCase::low, DemandCase::median,
                                          DemandCase::high};
  std::optional<double> theta;  // replaces theta = 1 of the cournot runs
  double tolerance = 1e-6;      // scaled KKT certificate
  double solver_tolerance = 1e-7;
  double gap = 1e-4;            // relative B&B gap target
  std::size_t node_limit = 100000;
  std::size_t iteration_limit = 0;  // 0 selects the solver default
  UcMode uc_mode = UcMode::automatic;
  std::size_t uc_exact_budget = 400;  // binaries solved exactly in automatic mode
  std::size_t uc_improvement_budget = 256;  // local-search solves after rounding
  std::filesystem::path output = "out";
  SolutionFormat format = SolutionFormat::tabular;
  bool verify = false;
  std::size_t verify_column_budget = 5000;  // diagonalization cross-check
  std::size_t verify_binary_budget = 12;    // exhaustive UC cross-check
  bool dump_qp = false;
  std::size_t jobs = 1;
};

/// Throws DataError when the configuration selects nothing.
void check_config(const RunConfig& config);

/// Runs every (model, case) pair, writes solutions, certificates and the
/// comparison table under config.output, and logs RUN/SOLVE/CERT/METRIC lines.
/// Nothing is written when the dataset fails to load.
int run(const RunConfig& config, std::ostream& log);

}  // namespace elmarket
