// Command-line driver: load a dataset, solve the selected market models and
// write solutions, certificates and the comparison table.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "elmarket/run.hpp"

namespace {

template <typename T, typename Parse>
bool parse_list(const std::vector<std::string>& names, std::vector<T>& out, Parse parse,
                const std::vector<T>& all, const char* what) {
  if (names.empty()) return true;
  out.clear();
  for (const auto& name : names) {
    if (name == "all") {
      out = all;
      return true;
    }
    const auto value = parse(name);
    if (!value) {
      std::cerr << "unknown " << what << " '" << name << "'\n";
      return false;
    }
    out.push_back(*value);
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace elmarket;
  RunConfig config;
  CLI::App app{"Electricity market equilibrium models: perfect competition, "
               "perfect competition with unit commitment, and Nash-Cournot"};

  std::vector<std::string> models, cases;
  std::string format = "tabular", uc_mode = "auto";
  std::string manifest, data_root, firms, units, technologies, time_grid, scenarios,
      capacity_factors, profiles, output = "out";
  double theta = 0.0;

  app.add_option("--manifest", manifest, "JSON dataset manifest");
  app.add_option("--data-root", data_root,
                 "directory relative dataset paths resolve against (default $" +
                     std::string(kDataRootVariable) + " or the manifest directory)");
  app.add_option("--firms", firms, "firms file, overrides the manifest");
  app.add_option("--units", units, "units file, overrides the manifest");
  app.add_option("--technologies", technologies, "technologies file, overrides the manifest");
  app.add_option("--time-grid", time_grid, "time-grid file, overrides the manifest");
  app.add_option("--scenarios", scenarios, "scenarios file, overrides the manifest");
  app.add_option("--capacity-factors", capacity_factors,
                 "capacity-factor file, overrides the manifest");
  app.add_option("--profiles", profiles, "technology profile file, overrides the manifest");
  app.add_option("--model", models, "perfect, perfect-uc, cournot or all (repeatable)")
      ->delimiter(',');
  app.add_option("--case", cases, "low, median, high or all (repeatable)")->delimiter(',');
  auto* theta_option =
      app.add_option("--theta", theta, "conjectural variation of the cournot runs (expert)")
          ->check(CLI::Range(0.0, 1.0));
  app.add_option("--tol", config.tolerance, "scaled KKT certificate tolerance")
      ->capture_default_str();
  app.add_option("--solver-tol", config.solver_tolerance, "active-set tolerance")
      ->capture_default_str();
  app.add_option("--gap", config.gap, "relative branch-and-bound gap target")
      ->capture_default_str();
  app.add_option("--node-limit", config.node_limit, "branch-and-bound node limit")
      ->capture_default_str();
  app.add_option("--iteration-limit", config.iteration_limit,
                 "active-set iteration limit, 0 for automatic")
      ->capture_default_str();
  app.add_option("--uc-mode", uc_mode, "auto, exact or heuristic")->capture_default_str();
  app.add_option("--uc-exact-budget", config.uc_exact_budget,
                 "largest binary count solved exactly in auto mode")
      ->capture_default_str();
  app.add_option("--uc-improve-budget", config.uc_improvement_budget,
                 "local-search solves after rounding in heuristic mode")
      ->capture_default_str();
  app.add_option("--out", output, "output directory")->capture_default_str();
  app.add_option("--format", format, "tabular or structured")->capture_default_str();
  app.add_flag("--verify", config.verify, "cross-check results against the oracles");
  app.add_option("--verify-columns", config.verify_column_budget,
                 "largest program cross-checked by diagonalization")
      ->capture_default_str();
  app.add_option("--verify-binaries", config.verify_binary_budget,
                 "largest binary count cross-checked by enumeration")
      ->capture_default_str();
  app.add_flag("--dump-qp", config.dump_qp, "write each assembled program as program.qp");
  app.add_option("--jobs", config.jobs, "runs executed in parallel")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (!parse_list(models, config.models, parse_model_kind,
                  {ModelKind::perfect, ModelKind::perfect_uc, ModelKind::cournot}, "model") ||
      !parse_list(cases, config.demand_cases, parse_demand_case,
                  {DemandCase::low, DemandCase::median, DemandCase::high}, "demand case")) {
    return kExitUsage;
  }
  const auto parsed_format = parse_solution_format(format);
  const auto parsed_mode = parse_uc_mode(uc_mode);
  if (!parsed_format || !parsed_mode) {
    std::cerr << "unknown " << (parsed_format ? "--uc-mode" : "--format") << " value\n";
    return kExitUsage;
  }
  config.format = *parsed_format;
  config.uc_mode = *parsed_mode;
  if (*theta_option) config.theta = theta;
  config.manifest = manifest;
  config.output = output;
  if (!data_root.empty()) config.data_root = data_root;
  auto set = [](const std::string& value, std::optional<std::filesystem::path>& target) {
    if (!value.empty()) target = value;
  };
  set(firms, config.firms);
  set(units, config.units);
  set(technologies, config.technologies);
  set(time_grid, config.time_grid);
  set(scenarios, config.scenarios);
  set(capacity_factors, config.capacity_factors);
  set(profiles, config.technology_profiles);
  if (manifest.empty() && !config.firms) {
    std::cerr << "either --manifest or the dataset file flags are required\n";
    return kExitUsage;
  }

  return run(config, std::cout);
}
