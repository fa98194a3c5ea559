#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "elmarket/run.hpp"
#include "support.hpp"

using namespace elmarket;
using namespace elmarket::testing;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(ELMARKET_SOURCE_DIR) / "data" / "toy";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++n;
  return n;
}

RunConfig toy_config(const fs::path& output) {
  RunConfig config;
  config.manifest = kToy / "manifest.json";
  config.output = output;
  return config;
}

}  // namespace

TEST_CASE("full toy run", "[run]") {
  TempDir dir("elmarket-run");
  auto config = toy_config(dir.path() / "out");
  config.verify = true;
  std::ostringstream log;
  REQUIRE(run(config, log) == kExitOk);
  const std::string text = log.str();
  CHECK(occurrences(text, "\nSOLVE ") + (text.rfind("SOLVE ", 0) == 0) == 9);
  CHECK_THAT(text, ContainsSubstring("kind=diagonalization"));
  CHECK(occurrences(text, "result=fail") == 0);
  CHECK_THAT(text, ContainsSubstring("RUN summary runs=9 passed=9 exit=0"));
  std::size_t certificates = 0;
  for (const auto& entry : fs::recursive_directory_iterator(config.output)) {
    if (entry.path().filename() == "certificate.csv") ++certificates;
  }
  CHECK(certificates == 9);
  CHECK(fs::exists(config.output / "comparison.txt"));
  CHECK(fs::exists(config.output / "comparison.csv"));
  CHECK(occurrences(slurp(config.output / "runs.csv"), "\n") == 10);
  CHECK(fs::exists(config.output / "perfect-uc-median" / "commitment.csv"));
  CHECK(fs::exists(config.output / "cournot-high" / "generation.csv"));
}

TEST_CASE("outputs are reproducible and independent of parallelism", "[run]") {
  TempDir dir("elmarket-repeat");
  auto a = toy_config(dir.path() / "a");
  a.models = {ModelKind::perfect, ModelKind::cournot};
  auto b = a;
  b.output = dir.path() / "b";
  b.jobs = 3;
  std::ostringstream la, lb;
  REQUIRE(run(a, la) == kExitOk);
  REQUIRE(run(b, lb) == kExitOk);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.output)) {
    if (!entry.is_regular_file()) continue;
    const auto relative = fs::relative(entry.path(), a.output);
    CHECK(slurp(entry.path()) == slurp(b.output / relative));
    ++files;
  }
  CHECK(files > 0);
}

TEST_CASE("a broken dataset writes nothing", "[run]") {
  TempDir dir("elmarket-broken");
  const fs::path root = dir.path() / "toy";
  fs::copy(kToy, root, fs::copy_options::recursive);
  std::ofstream(root / "manifest.json") << "{\"dataset\": \"toy\", \"files\": {";
  auto config = toy_config(dir.path() / "out");
  config.manifest = root / "manifest.json";
  std::ostringstream log;
  CHECK(run(config, log) == kExitDataError);
  CHECK_THAT(log.str(), ContainsSubstring("RUN error="));
  CHECK_FALSE(fs::exists(config.output));
}

TEST_CASE("selection and formats", "[run]") {
  TempDir dir("elmarket-select");
  auto config = toy_config(dir.path() / "out");
  config.models = {ModelKind::perfect};
  config.demand_cases = {DemandCase::high};
  config.format = SolutionFormat::structured;
  config.dump_qp = true;
  std::ostringstream log;
  REQUIRE(run(config, log) == kExitOk);
  CHECK(fs::exists(config.output / "perfect-high" / "solution.json"));
  CHECK(fs::exists(config.output / "perfect-high" / "program.qp"));
  CHECK_FALSE(fs::exists(config.output / "perfect-low"));
}

TEST_CASE("heuristic commitment mode reports its gap", "[run]") {
  TempDir dir("elmarket-heuristic");
  auto config = toy_config(dir.path() / "out");
  config.models = {ModelKind::perfect_uc};
  config.demand_cases = {DemandCase::median};
  config.uc_mode = UcMode::heuristic;
  config.uc_improvement_budget = 16;
  std::ostringstream log;
  REQUIRE(run(config, log) == kExitOk);
  CHECK_THAT(log.str(), ContainsSubstring("kind=gap"));
  CHECK_THAT(log.str(), ContainsSubstring("result=reported"));
}

TEST_CASE("empty selections are rejected", "[run]") {
  RunConfig config = toy_config("unused");
  config.models.clear();
  CHECK_THROWS_AS(check_config(config), DataError);
  CHECK(parse_uc_mode("auto") == UcMode::automatic);
  CHECK_FALSE(parse_uc_mode("fast").has_value());
}
