#include "elmarket/reporting.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

namespace elmarket {

namespace {

constexpr double kOrderingTolerance = 1e-6;

struct MetricRow {
  const char* key;
  const char* label;
  std::optional<double> (*value)(const MetricsReport&);
};

const std::array<MetricRow, 7> kRows = {{
    {"total_generation_twh", "Total generation (TWh)",
     [](const MetricsReport& r) -> std::optional<double> { return r.total_generation; }},
    {"total_co2_mt", "CO2 emissions (Mt)",
     [](const MetricsReport& r) -> std::optional<double> { return r.total_co2; }},
    {"co2_per_twh", "CO2 intensity (Mt/TWh)",
     [](const MetricsReport& r) { return r.co2_per_twh; }},
    {"total_investment_mw", "New capacity (MW)",
     [](const MetricsReport& r) -> std::optional<double> { return r.total_investment; }},
    {"renewable_share_pct", "Renewable share (%)",
     [](const MetricsReport& r) -> std::optional<double> { return r.renewable_share; }},
    {"average_price", "Average price (EUR/MWh)",
     [](const MetricsReport& r) -> std::optional<double> { return r.average_price; }},
    {"quantity_weighted_price", "Quantity-weighted price (EUR/MWh)",
     [](const MetricsReport& r) { return r.quantity_weighted_price; }},
}};

std::string fixed(std::optional<double> value, int digits) {
  if (!value) return "-";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << *value;
  return out.str();
}

}  // namespace

std::string_view to_string(ModelKind model) {
  switch (model) {
    case ModelKind::perfect: return "perfect";
    case ModelKind::perfect_uc: return "perfect-uc";
    case ModelKind::cournot: return "cournot";
  }
  return "perfect";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto m : {ModelKind::perfect, ModelKind::perfect_uc, ModelKind::cournot}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

MetricsReport compute_metrics(const ModelInstance& instance, const MarketSolution& solution,
                              ModelKind model, DemandCase demand_case, std::string dataset) {
  check_dimensions(instance, solution);
  MetricsReport report;
  report.model = model;
  report.demand_case = demand_case;
  report.dataset = std::move(dataset);

  const std::size_t T = instance.periods();
  const std::size_t S = instance.scenario_count();
  double energy = 0.0, renewable = 0.0, co2 = 0.0;
  for (std::size_t u = 0; u < instance.units.size(); ++u) {
    const auto& info = instance.technologies[instance.units[u].technology];
    double unit_energy = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        unit_energy += instance.weight(t, s) * solution.q(u, t, s);
      }
    }
    energy += unit_energy;
    if (info.renewable) renewable += unit_energy;
    co2 += unit_energy * info.emission_intensity;
    report.total_investment += solution.investment[u];
  }
  report.total_generation = energy / 1e6;
  report.total_co2 = co2 / 1e6;
  if (energy > 0.0) {
    report.co2_per_twh = report.total_co2 / report.total_generation;
    report.renewable_share =
        renewable == energy ? 100.0 : std::clamp(100.0 * renewable / energy, 0.0, 100.0);
  }

  double weighted_price = 0.0, weight = 0.0, quantity_price = 0.0, quantity = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double w = instance.weight(t, s);
      const double price = inverse_demand(instance.time.demand_intercept[t],
                                          instance.time.demand_slope,
                                          total_supply(solution, t, s));
      const double supply = total_supply(solution, t, s);
      weighted_price += w * price;
      weight += w;
      quantity_price += w * supply * price;
      quantity += w * supply;
    }
  }
  report.average_price = weight > 0.0 ? weighted_price / weight : 0.0;
  if (quantity > 0.0) report.quantity_weighted_price = quantity_price / quantity;
  return report;
}

std::string format_metrics(const MetricsReport& report) {
  std::ostringstream out;
  for (const auto& row : kRows) {
    const auto value = row.value(report);
    if (out.tellp() > 0) out << ' ';
    out << row.key << '=' << (value ? format_number(*value) : std::string("absent"));
  }
  return out.str();
}

ComparisonTable compare_models(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DataError("compare_models: no reports");
  for (const auto& r : reports) {
    if (r.dataset != reports.front().dataset) {
      throw DataError("compare_models: reports come from different datasets ('" +
                      reports.front().dataset + "' and '" + r.dataset + "')");
    }
  }
  std::map<std::pair<ModelKind, DemandCase>, const MetricsReport*> cell;
  for (const auto& r : reports) {
    if (!cell.emplace(std::pair{r.model, r.demand_case}, &r).second) {
      throw DataError("compare_models: duplicate report for " + std::string(to_string(r.model)) +
                      "/" + std::string(to_string(r.demand_case)));
    }
  }

  ComparisonTable table;
  std::vector<ModelKind> models;
  for (auto c : {DemandCase::low, DemandCase::median, DemandCase::high}) {
    if (std::any_of(reports.begin(), reports.end(),
                    [&](const MetricsReport& r) { return r.demand_case == c; })) {
      table.cases.push_back(c);
    }
  }
  for (auto m : {ModelKind::perfect, ModelKind::perfect_uc, ModelKind::cournot}) {
    if (std::any_of(reports.begin(), reports.end(),
                    [&](const MetricsReport& r) { return r.model == m; })) {
      models.push_back(m);
    }
  }

  // Plain text.
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> header = {"Metric", "Model"};
  for (auto c : table.cases) header.emplace_back(to_string(c));
  lines.push_back(header);
  std::ostringstream csv;
  csv << "metric,model";
  for (auto c : table.cases) csv << ',' << to_string(c);
  csv << '\n';
  for (const auto& row : kRows) {
    for (auto m : models) {
      std::vector<std::string> line = {row.label, std::string(to_string(m))};
      csv << row.key << ',' << to_string(m);
      for (auto c : table.cases) {
        const auto it = cell.find({m, c});
        const std::optional<double> value =
            it == cell.end() ? std::nullopt : row.value(*it->second);
        line.push_back(fixed(value, 2));
        csv << ',' << (value ? format_number(*value) : std::string());
      }
      csv << '\n';
      lines.push_back(std::move(line));
    }
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : lines) {
    for (std::size_t k = 0; k < line.size(); ++k) width[k] = std::max(width[k], line[k].size());
  }
  std::ostringstream text;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto& line = lines[n];
    std::string out;
    for (std::size_t k = 0; k < line.size(); ++k) {
      std::string field = line[k];
      if (k < 2) {
        field.resize(width[k], ' ');
      } else {
        field.insert(0, width[k] - field.size(), ' ');
      }
      out += field;
      if (k + 1 < line.size()) out += "  ";
    }
    text << out << '\n';
    if (n == 0) {
      std::size_t total = 0;
      for (std::size_t k = 0; k < width.size(); ++k) total += width[k] + (k ? 2 : 0);
      text << std::string(total, '-') << '\n';
    }
  }
  table.text = text.str();
  table.delimited = csv.str();

  // Orderings.
  auto find = [&](ModelKind m, DemandCase c) -> const MetricsReport* {
    const auto it = cell.find({m, c});
    return it == cell.end() ? nullptr : it->second;
  };
  for (auto c : table.cases) {
    const std::string where = " (" + std::string(to_string(c)) + " demand)";
    const auto* perfect = find(ModelKind::perfect, c);
    const auto* uc = find(ModelKind::perfect_uc, c);
    const auto* cournot = find(ModelKind::cournot, c);
    if (perfect && cournot) {
      if (cournot->total_generation > perfect->total_generation + kOrderingTolerance) {
        table.warnings.push_back("cournot generation exceeds perfect competition" + where);
      }
      if (cournot->average_price < perfect->average_price - kOrderingTolerance) {
        table.warnings.push_back("cournot average price below perfect competition" + where);
      }
    }
    if (perfect && uc && uc->average_price < perfect->average_price - kOrderingTolerance) {
      table.warnings.push_back("perfect-uc average price below perfect competition" + where);
    }
    if (uc && cournot && cournot->average_price < uc->average_price - kOrderingTolerance) {
      table.warnings.push_back("cournot average price below perfect-uc" + where);
    }
  }
  return table;
}

}  // namespace elmarket
