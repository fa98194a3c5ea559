#pragma once

// Dataset files and solution output.
//
// Input files are delimiter-separated text (comma, semicolon or tab, detected
// from the header line) with a one-line header. Columns are matched by name;
// extra columns are ignored. Blank lines and lines starting with '#' are
// skipped. Units:
//
//   technologies  technology, renewable (0/1), non_synchronous (0/1),
//                 emission_intensity [t/MWh], investment_cost [EUR/MW],
//                 marginal_cost [EUR/MWh], optional online_cost [EUR/period],
//                 startup_cost [EUR], q_min [MW]. The last four apply to
//                 candidate units.
//   firms         firm_id, optional name
//   units         unit_id, firm_id, technology, q_max [MW], marginal_cost,
//                 optional q_min, online_cost, startup_cost, initial_on (0/1)
//   time_grid     period, weight [h], a_low, a_median, a_high [EUR/MWh]
//   scenarios     scenario_id, probability
//   capacity_factors
//                 unit_id, period, scenario_id, capacity_factor
//   technology_profiles (optional)
//                 technology, period, scenario_id, capacity_factor
//
// Candidate units are synthesized for every firm and investable technology
// with id "<firm_id>/new-<technology>"; capacity-factor rows may address them
// by that id. A unit without its own row falls back to its technology profile,
// then to 1.0 for gas, coal, oil and other. Wind, solar and hydro units must be
// covered for every (period, scenario).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "elmarket/model.hpp"

namespace elmarket {

/// Parse failure with its location. Line and column are 1-based; column 0
/// means the whole line.
class ParseError : public DataError {
 public:
  ParseError(std::string file, std::size_t line, std::size_t column,
             const std::string& message);

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

enum class DemandCase { low, median, high };

std::string_view to_string(DemandCase demand_case);
std::optional<DemandCase> parse_demand_case(std::string_view name);

/// Environment variable naming the directory relative paths resolve against.
inline constexpr const char* kDataRootVariable = "ELMARKET_DATA_ROOT";

struct DatasetManifest {
  std::filesystem::path firms;
  std::filesystem::path units;
  std::filesystem::path capacity_factors;
  std::filesystem::path time_grid;
  std::filesystem::path scenarios;
  std::filesystem::path technologies;
  std::filesystem::path technology_profiles;  // optional
  DemandCase demand_case = DemandCase::median;
  double demand_slope = 1.0;  // B, EUR/MWh per MW
  double theta = 0.0;
  double snsp_cap = 0.75;
  bool investment_cost_weighted = true;
  bool commit_invested_capacity = false;
  std::string dataset_id;  // used to reject comparisons across datasets
};

/// Reads a JSON manifest. Relative paths resolve against `data_root`, else
/// $ELMARKET_DATA_ROOT when set, else the manifest's directory. Every
/// referenced file must exist.
///
///   {"dataset": "toy", "files": {"firms": "firms.csv", ...},
///    "demand_case": "median", "demand_slope": 0.1, "theta": 0,
///    "snsp_cap": 0.75, "investment_cost_weighted": true,
///    "commit_invested_capacity": false}
DatasetManifest load_manifest(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& data_root = std::nullopt);

/// Directory relative dataset paths resolve against when no manifest is read.
std::filesystem::path default_data_root();

/// Throws DataError unless every required file is set and exists.
void check_manifest_files(const DatasetManifest& manifest);

struct LoadSummary {
  std::size_t firms = 0;
  std::size_t existing_units = 0;
  std::size_t candidate_units = 0;
  std::size_t periods = 0;
  std::size_t scenarios = 0;
  std::size_t capacity_factor_rows = 0;
  std::size_t profile_rows = 0;

  std::string describe() const;
};

/// Builds and validates the instance for the manifest's demand case.
ModelInstance load_instance(const DatasetManifest& manifest,
                            LoadSummary* summary = nullptr);

enum class SolutionFormat { tabular, structured };

std::string_view to_string(SolutionFormat format);
std::optional<SolutionFormat> parse_solution_format(std::string_view name);

/// Writes generation, investment, prices, duals and a summary. Tabular
/// output is generation.csv, investment.csv, prices.csv, duals.csv and
/// summary.csv; structured output is solution.json. Numbers are written in
/// shortest round-trip form, so identical solutions give identical bytes.
void write_solution(const ModelInstance& instance, const MarketSolution& solution,
                    SolutionFormat format, const std::filesystem::path& directory);

/// Inverse of write_solution for the same instance.
MarketSolution read_solution(const ModelInstance& instance, SolutionFormat format,
                             const std::filesystem::path& directory);

/// Shortest decimal string that reads back to the same double.
std::string format_number(double value);

}  // namespace elmarket
