#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "elmarket/dataio.hpp"
#include "elmarket/qp.hpp"
#include "support.hpp"

using namespace elmarket;
using namespace elmarket::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(ELMARKET_SOURCE_DIR) / "data" / "toy";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Copies the toy dataset and applies one textual substitution to one file.
fs::path edited_toy(const TempDir& dir, const std::string& file, const std::string& from,
                    const std::string& to) {
  const fs::path root = dir.path() / "toy";
  fs::copy(kToy, root, fs::copy_options::recursive);
  std::string text = slurp(root / file);
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  text.replace(at, from.size(), to);
  spit(root / file, text);
  return root / "manifest.json";
}

std::string load_error(const fs::path& manifest) {
  try {
    load_instance(load_manifest(manifest));
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("toy dataset loads", "[dataio]") {
  const auto manifest = load_manifest(kToy / "manifest.json");
  CHECK(manifest.dataset_id == "toy");
  CHECK(manifest.demand_case == DemandCase::median);
  CHECK(manifest.demand_slope == 0.1);
  LoadSummary summary;
  const auto m = load_instance(manifest, &summary);
  CHECK(summary.firms == 2);
  CHECK(summary.existing_units == 4);
  CHECK(summary.candidate_units == 12);
  CHECK(m.periods() == 4);
  CHECK(m.scenario_count() == 2);
  CHECK(m.time.demand_intercept[0] == 105.0);
  CHECK(validate_instance(m).ok());
  const auto wind = m.find_unit("north/new-wind");
  REQUIRE(wind.has_value());
  CHECK_FALSE(m.units[*wind].existing);
  CHECK(m.units[*wind].q_max == 0.0);
  CHECK(m.capacity_factor(*wind, 0, 1) == 0.70);
  const auto gas = m.find_unit("north/new-gas");
  REQUIRE(gas.has_value());
  CHECK(m.capacity_factor(*gas, 2, 0) == 1.0);
}

TEST_CASE("demand case selects the intercept column", "[dataio]") {
  auto manifest = load_manifest(kToy / "manifest.json");
  manifest.demand_case = DemandCase::high;
  CHECK(load_instance(manifest).time.demand_intercept[0] == 115.0);
  manifest.demand_case = DemandCase::low;
  CHECK(load_instance(manifest).time.demand_intercept[3] == 100.0);
}

TEST_CASE("loading is deterministic", "[dataio]") {
  const auto manifest = load_manifest(kToy / "manifest.json");
  const auto a = assemble_single_opt(load_instance(manifest));
  const auto b = assemble_single_opt(load_instance(manifest));
  std::ostringstream da, db;
  dump_qp(a, da);
  dump_qp(b, db);
  CHECK(da.str() == db.str());
}

TEST_CASE("data errors carry their location", "[dataio]") {
  TempDir dir("elmarket-data");
  SECTION("capacity factor above one") {
    const auto manifest =
        edited_toy(dir, "capacity_factors.csv", "north-wind-1,1,calm,0.20", "north-wind-1,1,calm,1.2");
    CHECK_THAT(load_error(manifest), Catch::Matchers::ContainsSubstring("outside [0,1]"));
  }
  SECTION("non-finite number") {
    const auto manifest = edited_toy(dir, "time_grid.csv", "105", "nan");
    try {
      load_instance(load_manifest(manifest));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() == 4);
      CHECK(fs::path(e.file()).filename() == "time_grid.csv");
      CHECK_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("time_grid.csv:2:4"));
    }
  }
  SECTION("unit of an unknown firm") {
    const auto manifest = edited_toy(dir, "units.csv", "south-hydro-1,south", "south-hydro-1,east");
    CHECK_THAT(load_error(manifest), Catch::Matchers::ContainsSubstring("east"));
  }
  SECTION("thermal technology without emission intensity") {
    const auto manifest = edited_toy(dir, "technologies.csv", "0.37", "");
    CHECK_THAT(load_error(manifest), Catch::Matchers::ContainsSubstring("emission"));
  }
  SECTION("malformed manifest") {
    const auto manifest = edited_toy(dir, "manifest.json", "\"toy\",", "\"toy\"");
    CHECK_THROWS_AS(load_manifest(manifest), ParseError);
  }
  SECTION("missing data file") {
    const auto manifest = edited_toy(dir, "manifest.json", "\"units.csv\"", "\"absent.csv\"");
    CHECK_THROWS_AS(load_manifest(manifest), DataError);
  }
  SECTION("unknown manifest key") {
    const auto manifest = edited_toy(dir, "manifest.json", "\"theta\"", "\"thetta\"");
    CHECK_THROWS_AS(load_manifest(manifest), DataError);
  }
}

TEST_CASE("delimiters are detected from the header", "[dataio]") {
  TempDir dir("elmarket-delim");
  const fs::path root = dir.path() / "toy";
  fs::copy(kToy, root, fs::copy_options::recursive);
  std::string text = slurp(root / "scenarios.csv");
  std::replace(text.begin(), text.end(), ',', ';');
  spit(root / "scenarios.csv", "# scenarios, semicolon separated\n\n" + text);
  const auto m = load_instance(load_manifest(root / "manifest.json"));
  CHECK(m.scenarios.at(1).id == "windy");
}

TEST_CASE("solutions round-trip through both formats", "[dataio]") {
  const auto m = load_instance(load_manifest(kToy / "manifest.json"));
  const auto solution = solve_concave_qp(assemble_single_opt(m)).solution;
  for (auto format : {SolutionFormat::tabular, SolutionFormat::structured}) {
    TempDir dir("elmarket-out");
    write_solution(m, solution, format, dir.path());
    const auto back = read_solution(m, format, dir.path());
    CHECK(back.generation == solution.generation);
    CHECK(back.investment == solution.investment);
    CHECK(back.price == solution.price);
    CHECK(back.objective_value == solution.objective_value);
    REQUIRE(back.duals.size() == solution.duals.size());
    for (std::size_t i = 0; i < back.duals.size(); ++i) {
      CHECK(back.duals[i].tag == solution.duals[i].tag);
      CHECK(back.duals[i].value == solution.duals[i].value);
    }
  }
}

TEST_CASE("solution files", "[dataio]") {
  SECTION("empty instance writes headers only") {
    ModelInstance m = market({100.0});
    const auto s = MarketSolution::zeros(m);
    TempDir dir("elmarket-empty");
    write_solution(m, s, SolutionFormat::tabular, dir.path());
    CHECK(slurp(dir.path() / "generation.csv") == "firm,unit,technology,period,scenario,q_mw\n");
    CHECK(slurp(dir.path() / "investment.csv") == "firm,unit,technology,investment_mw\n");
  }
  SECTION("duopoly rows") {
    const auto m = duopoly(1.0, 10.0, 10.0);
    const auto s = solve_concave_qp(assemble_single_opt(m)).solution;
    TempDir dir("elmarket-duo");
    write_solution(m, s, SolutionFormat::tabular, dir.path());
    CHECK(line_count(slurp(dir.path() / "generation.csv")) == 3);
    CHECK(line_count(slurp(dir.path() / "investment.csv")) == 3);
    CHECK(line_count(slurp(dir.path() / "prices.csv")) == 2);
    const auto prices = slurp(dir.path() / "prices.csv");
    CHECK(prices == "period,scenario,price\n1,base,40\n");
  }
  SECTION("identical solutions give identical bytes") {
    const auto m = load_instance(load_manifest(kToy / "manifest.json"));
    const auto s = solve_concave_qp(assemble_single_opt(m)).solution;
    TempDir a("elmarket-a"), b("elmarket-b");
    write_solution(m, s, SolutionFormat::tabular, a.path());
    write_solution(m, solve_concave_qp(assemble_single_opt(m)).solution, SolutionFormat::tabular,
                   b.path());
    for (const char* file : {"generation.csv", "investment.csv", "prices.csv", "duals.csv",
                             "summary.csv"}) {
      CHECK(slurp(a.path() / file) == slurp(b.path() / file));
    }
  }
}

TEST_CASE("numbers use the shortest round-trip form", "[dataio]") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(40.0) == "40");
  CHECK(format_number(0.1) == "0.1");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(format_number(third)) == third);
}

TEST_CASE("names parse", "[dataio]") {
  CHECK(parse_demand_case("high") == DemandCase::high);
  CHECK_FALSE(parse_demand_case("peak").has_value());
  CHECK(parse_solution_format("csv") == SolutionFormat::tabular);
  CHECK(parse_solution_format("json") == SolutionFormat::structured);
}
