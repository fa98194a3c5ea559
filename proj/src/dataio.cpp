#include "elmarket/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace elmarket {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string locate(const std::string& file, std::size_t line, std::size_t column) {
  std::ostringstream out;
  out << file;
  if (line > 0) out << ':' << line;
  if (column > 0) out << ':' << column;
  return out.str();
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// A delimited text file with a header line.
class Table {
 public:
  Table(const fs::path& path, std::string label) : label_(std::move(label)) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + label_ + " file " + path.string());
    name_ = path.string();
    std::string line;
    std::size_t number = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped.front() == '#') continue;
      if (!header_seen) {
        delimiter_ = line.find('\t') != std::string::npos   ? '\t'
                     : line.find(';') != std::string::npos ? ';'
                                                           : ',';
        const auto names = split(line);
        for (std::size_t i = 0; i < names.size(); ++i) {
          if (names[i].empty()) throw ParseError(name_, number, i + 1, "empty column name");
          if (!columns_.emplace(names[i], i).second) {
            throw ParseError(name_, number, i + 1, "duplicate column '" + names[i] + "'");
          }
        }
        width_ = names.size();
        header_seen = true;
        continue;
      }
      auto fields = split(line);
      if (fields.size() != width_) {
        throw ParseError(name_, number, 0,
                         "expected " + std::to_string(width_) + " fields, found " +
                             std::to_string(fields.size()));
      }
      records_.push_back({number, std::move(fields)});
    }
    if (!header_seen) throw ParseError(name_, 0, 0, "missing header line");
  }

  const std::string& name() const { return name_; }
  const std::vector<Record>& records() const { return records_; }
  bool has(const std::string& column) const { return columns_.count(column) > 0; }

  void require(std::initializer_list<const char*> names) const {
    for (const char* column : names) {
      if (!has(column)) {
        throw ParseError(name_, 1, 0, label_ + " file lacks column '" + column + "'");
      }
    }
  }

  const std::string& text(const Record& row, const std::string& column) const {
    return row.fields[columns_.at(column)];
  }

  std::size_t column_number(const std::string& column) const {
    return columns_.at(column) + 1;
  }

  double number(const Record& row, const std::string& column) const {
    const std::string& field = text(row, column);
    if (field.empty()) fail(row, column, "missing value for '" + column + "'");
    double value = 0.0;
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) {
      fail(row, column, "'" + field + "' is not a number");
    }
    if (!std::isfinite(value)) fail(row, column, "non-finite value '" + field + "'");
    return value;
  }

  double number_or(const Record& row, const std::string& column, double fallback) const {
    if (!has(column) || text(row, column).empty()) return fallback;
    return number(row, column);
  }

  bool flag(const Record& row, const std::string& column) const {
    std::string field = text(row, column);
    std::transform(field.begin(), field.end(), field.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (field == "1" || field == "true" || field == "yes") return true;
    if (field == "0" || field == "false" || field == "no") return false;
    fail(row, column, "'" + field + "' is not a boolean");
  }

  bool flag_or(const Record& row, const std::string& column, bool fallback) const {
    if (!has(column) || text(row, column).empty()) return fallback;
    return flag(row, column);
  }

  [[noreturn]] void fail(const Record& row, const std::string& column,
                         const std::string& message) const {
    throw ParseError(name_, row.line, has(column) ? column_number(column) : 0, message);
  }

 private:
  std::vector<std::string> split(const std::string& line) const {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(delimiter_, start);
      out.push_back(trim(std::string_view(line).substr(start, pos - start)));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  }

  std::string label_;
  std::string name_;
  char delimiter_ = ',';
  std::size_t width_ = 0;
  std::map<std::string, std::size_t> columns_;
  std::vector<Record> records_;
};

Technology technology_field(const Table& table, const Record& row,
                            const std::string& column) {
  const auto tech = parse_technology(table.text(row, column));
  if (!tech) table.fail(row, column, "unknown technology '" + table.text(row, column) + "'");
  return *tech;
}

struct CandidateCosts {
  bool present = false;
  double investment_cost = 0.0;
  double marginal_cost = 0.0;
  double online_cost = 0.0;
  double startup_cost = 0.0;
  double q_min = 0.0;
};

bool variable_technology(Technology tech) {
  return tech == Technology::wind || tech == Technology::solar ||
         tech == Technology::hydro;
}

fs::path resolve(const fs::path& base, const std::string& entry) {
  fs::path path(entry);
  if (path.is_absolute()) return path;
  return base / path;
}

std::string candidate_id(const std::string& firm, Technology tech) {
  return firm + "/new-" + std::string(to_string(tech));
}

}  // namespace

ParseError::ParseError(std::string file, std::size_t line, std::size_t column,
                       const std::string& message)
    : DataError(locate(file, line, column) + ": " + message),
      file_(std::move(file)),
      line_(line),
      column_(column) {}

std::string_view to_string(DemandCase demand_case) {
  switch (demand_case) {
    case DemandCase::low: return "low";
    case DemandCase::median: return "median";
    case DemandCase::high: return "high";
  }
  return "median";
}

std::optional<DemandCase> parse_demand_case(std::string_view name) {
  for (auto c : {DemandCase::low, DemandCase::median, DemandCase::high}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view to_string(SolutionFormat format) {
  return format == SolutionFormat::tabular ? "tabular" : "structured";
}

std::optional<SolutionFormat> parse_solution_format(std::string_view name) {
  if (name == "tabular" || name == "csv") return SolutionFormat::tabular;
  if (name == "structured" || name == "json") return SolutionFormat::structured;
  return std::nullopt;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  std::array<char, 32> buffer{};
  const auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc()) throw std::logic_error("format_number failed");
  return std::string(buffer.data(), ptr);
}

fs::path default_data_root() {
  if (const char* root = std::getenv(kDataRootVariable); root && *root) return root;
  return fs::current_path();
}

void check_manifest_files(const DatasetManifest& manifest) {
  const std::array<std::pair<const char*, const fs::path*>, 6> required = {{
      {"firms", &manifest.firms},
      {"units", &manifest.units},
      {"capacity_factors", &manifest.capacity_factors},
      {"time_grid", &manifest.time_grid},
      {"scenarios", &manifest.scenarios},
      {"technologies", &manifest.technologies},
  }};
  for (const auto& [key, path] : required) {
    if (path->empty()) throw DataError(std::string("no ") + key + " file given");
    if (!fs::is_regular_file(*path)) {
      throw DataError(std::string(key) + " file not found at " + path->string());
    }
  }
  if (!manifest.technology_profiles.empty() &&
      !fs::is_regular_file(manifest.technology_profiles)) {
    throw DataError("technology_profiles file not found at " +
                    manifest.technology_profiles.string());
  }
}

DatasetManifest load_manifest(const fs::path& path, const std::optional<fs::path>& data_root) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, content.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (content[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(path.string(), line, column, "malformed JSON");
  }
  if (!doc.is_object()) throw ParseError(path.string(), 1, 1, "manifest must be a JSON object");

  static const std::array<const char*, 10> known = {
      "dataset",     "files",    "demand_case",
      "demand_slope", "theta",   "snsp_cap",
      "investment_cost_weighted", "commit_invested_capacity", "description", "units_note"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) ==
        known.end()) {
      throw DataError(path.string() + ": unknown manifest key '" + key + "'");
    }
  }

  fs::path base = path.parent_path();
  if (data_root) {
    base = *data_root;
  } else if (const char* root = std::getenv(kDataRootVariable); root && *root) {
    base = root;
  }

  DatasetManifest manifest;
  auto field = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    if (!doc.contains(key)) return fallback;
    try {
      return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw DataError(path.string() + ": manifest key '" + key + "' has the wrong type");
    }
  };
  manifest.dataset_id = field("dataset", fs::absolute(path).lexically_normal().string());
  const std::string demand_case = field("demand_case", std::string("median"));
  const auto parsed = parse_demand_case(demand_case);
  if (!parsed) throw DataError(path.string() + ": unknown demand_case '" + demand_case + "'");
  manifest.demand_case = *parsed;
  manifest.demand_slope = field("demand_slope", 1.0);
  manifest.theta = field("theta", 0.0);
  manifest.snsp_cap = field("snsp_cap", 0.75);
  manifest.investment_cost_weighted = field("investment_cost_weighted", true);
  manifest.commit_invested_capacity = field("commit_invested_capacity", false);

  if (!doc.contains("files") || !doc["files"].is_object()) {
    throw DataError(path.string() + ": manifest lacks a 'files' object");
  }
  const auto& files = doc["files"];
  struct Entry {
    const char* key;
    fs::path* target;
    bool required;
  };
  const std::array<Entry, 7> entries = {{
      {"firms", &manifest.firms, true},
      {"units", &manifest.units, true},
      {"capacity_factors", &manifest.capacity_factors, true},
      {"time_grid", &manifest.time_grid, true},
      {"scenarios", &manifest.scenarios, true},
      {"technologies", &manifest.technologies, true},
      {"technology_profiles", &manifest.technology_profiles, false},
  }};
  for (const auto& [key, value] : files.items()) {
    if (std::none_of(entries.begin(), entries.end(),
                     [&](const Entry& e) { return key == e.key; })) {
      throw DataError(path.string() + ": unknown file key '" + key + "'");
    }
  }
  for (const auto& entry : entries) {
    if (!files.contains(entry.key)) {
      if (entry.required) {
        throw DataError(path.string() + ": files." + entry.key + " is required");
      }
      continue;
    }
    if (!files[entry.key].is_string()) {
      throw DataError(path.string() + ": files." + entry.key + " must be a string");
    }
    *entry.target = resolve(base, files[entry.key].get<std::string>());
    if (!fs::is_regular_file(*entry.target)) {
      throw DataError(path.string() + ": files." + entry.key + " not found at " +
                      entry.target->string());
    }
  }
  return manifest;
}

std::string LoadSummary::describe() const {
  std::ostringstream out;
  out << "firms=" << firms << " existing_units=" << existing_units
      << " candidate_units=" << candidate_units << " periods=" << periods
      << " scenarios=" << scenarios << " cf_rows=" << capacity_factor_rows
      << " profile_rows=" << profile_rows;
  return out.str();
}

ModelInstance load_instance(const DatasetManifest& manifest, LoadSummary* summary) {
  ModelInstance instance;
  instance.theta = manifest.theta;
  instance.snsp_cap = manifest.snsp_cap;
  instance.investment_cost_weighted = manifest.investment_cost_weighted;
  instance.commit_invested_capacity = manifest.commit_invested_capacity;
  instance.time.demand_slope = manifest.demand_slope;
  LoadSummary counts;

  // Technologies.
  const Table techs(manifest.technologies, "technologies");
  techs.require({"technology", "renewable", "non_synchronous", "emission_intensity",
                 "investment_cost", "marginal_cost"});
  std::array<CandidateCosts, kTechnologyCount> candidate{};
  std::array<bool, kTechnologyCount> emission_given{};
  for (const auto& row : techs.records()) {
    const Technology tech = technology_field(techs, row, "technology");
    auto& costs = candidate[static_cast<std::size_t>(tech)];
    if (costs.present) techs.fail(row, "technology", "duplicate technology row");
    costs.present = true;
    auto& info = instance.technologies[tech];
    info.renewable = techs.flag(row, "renewable");
    info.non_synchronous = techs.flag(row, "non_synchronous");
    if (!techs.text(row, "emission_intensity").empty()) {
      info.emission_intensity = techs.number(row, "emission_intensity");
      emission_given[static_cast<std::size_t>(tech)] = true;
    } else {
      info.emission_intensity = 0.0;
    }
    costs.investment_cost = techs.number_or(row, "investment_cost", 0.0);
    costs.marginal_cost = techs.number_or(row, "marginal_cost", 0.0);
    costs.online_cost = techs.number_or(row, "online_cost", 0.0);
    costs.startup_cost = techs.number_or(row, "startup_cost", 0.0);
    costs.q_min = techs.number_or(row, "q_min", 0.0);
  }
  for (Technology tech : kInvestableTechnologies) {
    if (!candidate[static_cast<std::size_t>(tech)].present) {
      throw DataError(techs.name() + ": technology '" + std::string(to_string(tech)) +
                      "' is missing; every investable technology needs a row");
    }
  }

  // Firms.
  const Table firms(manifest.firms, "firms");
  firms.require({"firm_id"});
  for (const auto& row : firms.records()) {
    const std::string& id = firms.text(row, "firm_id");
    if (id.empty()) firms.fail(row, "firm_id", "empty firm_id");
    if (instance.find_firm(id)) firms.fail(row, "firm_id", "duplicate firm '" + id + "'");
    std::string name = firms.has("name") ? firms.text(row, "name") : std::string();
    instance.firms.push_back({id, name.empty() ? id : name, {}});
  }

  // Existing units.
  const Table units(manifest.units, "units");
  units.require({"unit_id", "firm_id", "technology", "q_max", "marginal_cost"});
  std::vector<bool> technology_used(kTechnologyCount, false);
  for (const auto& row : units.records()) {
    GenerationUnit unit;
    unit.id = units.text(row, "unit_id");
    if (unit.id.empty()) units.fail(row, "unit_id", "empty unit_id");
    if (instance.find_unit(unit.id)) units.fail(row, "unit_id", "duplicate unit '" + unit.id + "'");
    const auto owner = instance.find_firm(units.text(row, "firm_id"));
    if (!owner) {
      units.fail(row, "firm_id", "unit '" + unit.id + "' names missing firm '" +
                                     units.text(row, "firm_id") + "'");
    }
    unit.owner = *owner;
    unit.technology = technology_field(units, row, "technology");
    unit.existing = true;
    unit.q_max = units.number(row, "q_max");
    unit.q_min = units.number_or(row, "q_min", 0.0);
    unit.marginal_cost = units.number(row, "marginal_cost");
    unit.online_cost = units.number_or(row, "online_cost", 0.0);
    unit.startup_cost = units.number_or(row, "startup_cost", 0.0);
    unit.initial_on = units.flag_or(row, "initial_on", false);
    technology_used[static_cast<std::size_t>(unit.technology)] = true;
    instance.add_unit(std::move(unit));
    ++counts.existing_units;
  }
  if (technology_used[static_cast<std::size_t>(Technology::other)] &&
      !candidate[static_cast<std::size_t>(Technology::other)].present) {
    throw DataError(techs.name() + ": technology 'other' is used by units but has no row");
  }
  for (std::size_t k = 0; k < kTechnologyCount; ++k) {
    const auto tech = static_cast<Technology>(k);
    const bool relevant = candidate[k].present;
    if (relevant && !instance.technologies[tech].renewable && !emission_given[k]) {
      throw DataError(techs.name() + ": thermal technology '" + std::string(to_string(tech)) +
                      "' has no emission_intensity");
    }
  }

  // Candidate units, one per firm and investable technology.
  for (std::size_t f = 0; f < instance.firms.size(); ++f) {
    for (Technology tech : kInvestableTechnologies) {
      const auto& costs = candidate[static_cast<std::size_t>(tech)];
      GenerationUnit unit;
      unit.id = candidate_id(instance.firms[f].id, tech);
      if (instance.find_unit(unit.id)) {
        throw DataError(units.name() + ": unit id '" + unit.id +
                        "' collides with a synthesized candidate");
      }
      unit.owner = f;
      unit.technology = tech;
      unit.existing = false;
      unit.q_max = 0.0;
      unit.q_min = costs.q_min;
      unit.marginal_cost = costs.marginal_cost;
      unit.investment_cost = costs.investment_cost;
      unit.online_cost = costs.online_cost;
      unit.startup_cost = costs.startup_cost;
      instance.add_unit(std::move(unit));
      ++counts.candidate_units;
    }
  }

  // Time grid.
  const Table grid(manifest.time_grid, "time_grid");
  const std::string intercept_column = "a_" + std::string(to_string(manifest.demand_case));
  grid.require({"period", "weight"});
  if (!grid.has(intercept_column)) {
    throw ParseError(grid.name(), 1, 0,
                     "time_grid file lacks column '" + intercept_column + "' for the " +
                         std::string(to_string(manifest.demand_case)) + " demand case");
  }
  std::unordered_map<std::string, std::size_t> period_index;
  for (const auto& row : grid.records()) {
    const std::string& label = grid.text(row, "period");
    if (label.empty()) grid.fail(row, "period", "empty period label");
    if (!period_index.emplace(label, instance.time.weight.size()).second) {
      grid.fail(row, "period", "duplicate period '" + label + "'");
    }
    instance.time.weight.push_back(grid.number(row, "weight"));
    instance.time.demand_intercept.push_back(grid.number(row, intercept_column));
    for (const char* other : {"a_low", "a_median", "a_high"}) {
      if (grid.has(other)) (void)grid.number_or(row, other, 0.0);  // finiteness check
    }
  }

  // Scenarios.
  const Table scen(manifest.scenarios, "scenarios");
  scen.require({"scenario_id", "probability"});
  std::unordered_map<std::string, std::size_t> scenario_index;
  for (const auto& row : scen.records()) {
    const std::string& id = scen.text(row, "scenario_id");
    if (id.empty()) scen.fail(row, "scenario_id", "empty scenario_id");
    if (!scenario_index.emplace(id, instance.scenarios.size()).second) {
      scen.fail(row, "scenario_id", "duplicate scenario '" + id + "'");
    }
    instance.scenarios.push_back({id, scen.number(row, "probability"), {}});
  }

  // Capacity factors.
  const std::size_t U = instance.units.size();
  const std::size_t T = instance.periods();
  const double unset = std::numeric_limits<double>::quiet_NaN();
  for (auto& scenario : instance.scenarios) scenario.capacity_factor.assign(U * T, unset);

  auto cf_keys = [&](const Table& table, const Record& row) {
    const auto t = period_index.find(table.text(row, "period"));
    if (t == period_index.end()) {
      table.fail(row, "period", "unknown period '" + table.text(row, "period") + "'");
    }
    const auto s = scenario_index.find(table.text(row, "scenario_id"));
    if (s == scenario_index.end()) {
      table.fail(row, "scenario_id",
                 "unknown scenario '" + table.text(row, "scenario_id") + "'");
    }
    return std::pair{t->second, s->second};
  };

  const Table cf(manifest.capacity_factors, "capacity_factors");
  cf.require({"unit_id", "period", "scenario_id", "capacity_factor"});
  for (const auto& row : cf.records()) {
    const auto u = instance.find_unit(cf.text(row, "unit_id"));
    if (!u) cf.fail(row, "unit_id", "unknown unit '" + cf.text(row, "unit_id") + "'");
    const auto [t, s] = cf_keys(cf, row);
    double& slot = instance.scenarios[s].capacity_factor[*u * T + t];
    if (!std::isnan(slot)) cf.fail(row, "unit_id", "duplicate capacity factor row");
    slot = cf.number(row, "capacity_factor");
    ++counts.capacity_factor_rows;
  }

  std::vector<std::vector<double>> profile;  // [tech][t * S + s]
  if (!manifest.technology_profiles.empty()) {
    const std::size_t S = instance.scenario_count();
    profile.assign(kTechnologyCount, std::vector<double>(T * S, unset));
    const Table prof(manifest.technology_profiles, "technology_profiles");
    prof.require({"technology", "period", "scenario_id", "capacity_factor"});
    for (const auto& row : prof.records()) {
      const Technology tech = technology_field(prof, row, "technology");
      const auto [t, s] = cf_keys(prof, row);
      double& slot = profile[static_cast<std::size_t>(tech)][t * S + s];
      if (!std::isnan(slot)) prof.fail(row, "technology", "duplicate profile row");
      slot = prof.number(row, "capacity_factor");
      ++counts.profile_rows;
    }
  }

  for (std::size_t s = 0; s < instance.scenario_count(); ++s) {
    auto& values = instance.scenarios[s].capacity_factor;
    for (std::size_t u = 0; u < U; ++u) {
      const Technology tech = instance.units[u].technology;
      for (std::size_t t = 0; t < T; ++t) {
        double& slot = values[u * T + t];
        if (!std::isnan(slot)) continue;
        if (!profile.empty()) {
          const double p = profile[static_cast<std::size_t>(tech)][t * instance.scenario_count() + s];
          if (!std::isnan(p)) {
            slot = p;
            continue;
          }
        }
        if (variable_technology(tech)) {
          throw DataError(cf.name() + ": no capacity factor for " +
                          std::string(to_string(tech)) + " unit '" + instance.units[u].id +
                          "' in period " + std::to_string(t + 1) + ", scenario '" +
                          instance.scenarios[s].id + "'");
        }
        slot = 1.0;
      }
    }
  }

  counts.firms = instance.firms.size();
  counts.periods = T;
  counts.scenarios = instance.scenario_count();
  require_valid(instance);
  if (summary) *summary = counts;
  return instance;
}

// ---------------------------------------------------------------- output

namespace {

std::optional<RowKind> parse_row_kind(std::string_view name) {
  for (auto kind : {RowKind::capacity, RowKind::snsp, RowKind::fix_existing_investment,
                    RowKind::min_generation, RowKind::commitment_bound,
                    RowKind::startup_logic, RowKind::transition_limit,
                    RowKind::invested_commitment}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

bool unit_scoped(RowKind kind) { return kind != RowKind::snsp; }

std::string firm_of(const ModelInstance& instance, std::size_t u) {
  return instance.firms[instance.units[u].owner].id;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_shape(const ModelInstance& instance, const MarketSolution& solution) {
  if (solution.units == 0 && solution.generation.empty() && solution.investment.empty()) return;
  check_dimensions(instance, solution);
}

std::size_t period_label(const ModelInstance& instance, const std::string& text,
                         const std::string& file) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value == 0 ||
      value > instance.periods()) {
    throw DataError(file + ": bad period '" + text + "'");
  }
  return value - 1;
}

std::size_t scenario_label(const ModelInstance& instance, const std::string& text,
                           const std::string& file) {
  for (std::size_t s = 0; s < instance.scenario_count(); ++s) {
    if (instance.scenarios[s].id == text) return s;
  }
  throw DataError(file + ": unknown scenario '" + text + "'");
}

std::size_t unit_label(const ModelInstance& instance, const std::string& text,
                       const std::string& file) {
  const auto u = instance.find_unit(text);
  if (!u) throw DataError(file + ": unknown unit '" + text + "'");
  return *u;
}

MarketSolution empty_like(const ModelInstance& instance) {
  MarketSolution solution = MarketSolution::zeros(instance);
  return solution;
}

}  // namespace

void write_solution(const ModelInstance& instance, const MarketSolution& solution,
                    SolutionFormat format, const fs::path& directory) {
  check_shape(instance, solution);
  fs::create_directories(directory);
  const std::size_t U = solution.units, T = solution.periods, S = solution.scenarios;
  auto scenario_id = [&](std::size_t s) { return instance.scenarios[s].id; };

  if (format == SolutionFormat::tabular) {
    std::ostringstream gen, inv, price, duals, summary;
    gen << "firm,unit,technology,period,scenario,q_mw\n";
    inv << "firm,unit,technology,investment_mw\n";
    price << "period,scenario,price\n";
    duals << "kind,unit,period,scenario,value\n";
    summary << "key,value\n";
    for (std::size_t u = 0; u < U; ++u) {
      const auto& unit = instance.units[u];
      const std::string tech(to_string(unit.technology));
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
          gen << firm_of(instance, u) << ',' << unit.id << ',' << tech << ',' << t + 1 << ','
              << scenario_id(s) << ',' << format_number(solution.q(u, t, s)) << '\n';
        }
      }
      inv << firm_of(instance, u) << ',' << unit.id << ',' << tech << ','
          << format_number(solution.investment[u]) << '\n';
    }
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        price << t + 1 << ',' << scenario_id(s) << ',' << format_number(solution.pi(t, s)) << '\n';
      }
    }
    for (const auto& dual : solution.duals) {
      const auto& tag = dual.tag;
      duals << to_string(tag.kind) << ','
            << (unit_scoped(tag.kind) ? instance.units.at(tag.unit).id : std::string()) << ','
            << tag.period + 1 << ',' << scenario_id(tag.scenario) << ','
            << format_number(dual.value) << '\n';
    }
    summary << "objective_value," << format_number(solution.objective_value) << '\n'
            << "units," << U << '\n'
            << "periods," << T << '\n'
            << "scenarios," << S << '\n';
    write_file(directory / "generation.csv", gen.str());
    write_file(directory / "investment.csv", inv.str());
    write_file(directory / "prices.csv", price.str());
    write_file(directory / "duals.csv", duals.str());
    write_file(directory / "summary.csv", summary.str());
    return;
  }

  ordered_json doc;
  doc["objective_value"] = solution.objective_value;
  doc["units"] = U;
  doc["periods"] = T;
  doc["scenarios"] = S;
  doc["generation"] = ordered_json::array();
  doc["investment"] = ordered_json::array();
  doc["prices"] = ordered_json::array();
  doc["duals"] = ordered_json::array();
  for (std::size_t u = 0; u < U; ++u) {
    const auto& unit = instance.units[u];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        doc["generation"].push_back({{"firm", firm_of(instance, u)},
                                     {"unit", unit.id},
                                     {"technology", std::string(to_string(unit.technology))},
                                     {"period", t + 1},
                                     {"scenario", scenario_id(s)},
                                     {"q_mw", solution.q(u, t, s)}});
      }
    }
    doc["investment"].push_back({{"firm", firm_of(instance, u)},
                                 {"unit", unit.id},
                                 {"technology", std::string(to_string(unit.technology))},
                                 {"investment_mw", solution.investment[u]}});
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      doc["prices"].push_back({{"period", t + 1}, {"scenario", scenario_id(s)},
                               {"price", solution.pi(t, s)}});
    }
  }
  for (const auto& dual : solution.duals) {
    const auto& tag = dual.tag;
    doc["duals"].push_back(
        {{"constraint", format_tag(tag)},
         {"kind", std::string(to_string(tag.kind))},
         {"unit", unit_scoped(tag.kind) ? instance.units.at(tag.unit).id : std::string()},
         {"period", tag.period + 1},
         {"scenario", scenario_id(tag.scenario)},
         {"value", dual.value}});
  }
  write_file(directory / "solution.json", doc.dump(2) + "\n");
}

MarketSolution read_solution(const ModelInstance& instance, SolutionFormat format,
                             const fs::path& directory) {
  MarketSolution solution = empty_like(instance);

  auto set_dual = [&](const std::string& file, const std::string& kind_text,
                      const std::string& unit, std::size_t period, std::size_t scenario,
                      double value) {
    const auto kind = parse_row_kind(kind_text);
    if (!kind) throw DataError(file + ": unknown constraint kind '" + kind_text + "'");
    ConstraintTag tag{*kind, 0, period, scenario};
    if (unit_scoped(*kind)) tag.unit = unit_label(instance, unit, file);
    solution.duals.push_back({tag, value});
  };

  if (format == SolutionFormat::tabular) {
    std::size_t units = 0;
    {
      const Table summary(directory / "summary.csv", "summary");
      summary.require({"key", "value"});
      for (const auto& row : summary.records()) {
        const auto& key = summary.text(row, "key");
        if (key == "objective_value") solution.objective_value = summary.number(row, "value");
        if (key == "units") units = static_cast<std::size_t>(summary.number(row, "value"));
      }
    }
    if (units == 0) {
      solution = MarketSolution{};
      solution.objective_value = 0.0;
    }
    const Table gen(directory / "generation.csv", "generation");
    gen.require({"unit", "period", "scenario", "q_mw"});
    for (const auto& row : gen.records()) {
      const auto u = unit_label(instance, gen.text(row, "unit"), gen.name());
      const auto t = period_label(instance, gen.text(row, "period"), gen.name());
      const auto s = scenario_label(instance, gen.text(row, "scenario"), gen.name());
      solution.q(u, t, s) = gen.number(row, "q_mw");
    }
    const Table inv(directory / "investment.csv", "investment");
    inv.require({"unit", "investment_mw"});
    for (const auto& row : inv.records()) {
      solution.investment[unit_label(instance, inv.text(row, "unit"), inv.name())] =
          inv.number(row, "investment_mw");
    }
    const Table prices(directory / "prices.csv", "prices");
    prices.require({"period", "scenario", "price"});
    for (const auto& row : prices.records()) {
      const auto t = period_label(instance, prices.text(row, "period"), prices.name());
      const auto s = scenario_label(instance, prices.text(row, "scenario"), prices.name());
      solution.price[t * solution.scenarios + s] = prices.number(row, "price");
    }
    const Table duals(directory / "duals.csv", "duals");
    duals.require({"kind", "unit", "period", "scenario", "value"});
    for (const auto& row : duals.records()) {
      set_dual(duals.name(), duals.text(row, "kind"), duals.text(row, "unit"),
               period_label(instance, duals.text(row, "period"), duals.name()),
               scenario_label(instance, duals.text(row, "scenario"), duals.name()),
               duals.number(row, "value"));
    }
    return solution;
  }

  const fs::path path = directory / "solution.json";
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
    if (doc.at("units").get<std::size_t>() == 0) {
      MarketSolution empty;
      empty.objective_value = doc.at("objective_value").get<double>();
      return empty;
    }
    solution.objective_value = doc.at("objective_value").get<double>();
    for (const auto& row : doc.at("generation")) {
      const auto u = unit_label(instance, row.at("unit").get<std::string>(), path.string());
      const auto t = row.at("period").get<std::size_t>() - 1;
      const auto s = scenario_label(instance, row.at("scenario").get<std::string>(), path.string());
      if (t >= solution.periods) throw DataError(path.string() + ": bad period");
      solution.q(u, t, s) = row.at("q_mw").get<double>();
    }
    for (const auto& row : doc.at("investment")) {
      solution.investment[unit_label(instance, row.at("unit").get<std::string>(),
                                     path.string())] = row.at("investment_mw").get<double>();
    }
    for (const auto& row : doc.at("prices")) {
      const auto t = row.at("period").get<std::size_t>() - 1;
      const auto s = scenario_label(instance, row.at("scenario").get<std::string>(), path.string());
      if (t >= solution.periods) throw DataError(path.string() + ": bad period");
      solution.price[t * solution.scenarios + s] = row.at("price").get<double>();
    }
    for (const auto& row : doc.at("duals")) {
      const auto t = row.at("period").get<std::size_t>() - 1;
      if (t >= solution.periods) throw DataError(path.string() + ": bad period");
      set_dual(path.string(), row.at("kind").get<std::string>(),
               row.at("unit").get<std::string>(), t,
               scenario_label(instance, row.at("scenario").get<std::string>(), path.string()),
               row.at("value").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return solution;
}

}  // namespace elmarket
