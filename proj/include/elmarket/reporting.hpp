#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "elmarket/dataio.hpp"
#include "elmarket/model.hpp"

namespace elmarket {

enum class ModelKind { perfect, perfect_uc, cournot };

std::string_view to_string(ModelKind model);
std::optional<ModelKind> parse_model_kind(std::string_view name);

/// Summary metrics of one solved instance. Periods are one hour long, so
/// MW per period is MWh.
struct MetricsReport {
  ModelKind model = ModelKind::perfect;
  DemandCase demand_case = DemandCase::median;
  std::string dataset;
  double total_generation = 0.0;       // TWh
  double total_co2 = 0.0;              // Mt
  std::optional<double> co2_per_twh;   // Mt/TWh, absent without generation
  double total_investment = 0.0;       // MW
  double renewable_share = 0.0;        // percent, hydro included
  double average_price = 0.0;          // EUR/MWh, P*W weighted
  std::optional<double> quantity_weighted_price;  // EUR/MWh, P*W*Q weighted
};

MetricsReport compute_metrics(const ModelInstance& instance, const MarketSolution& solution,
                              ModelKind model, DemandCase demand_case,
                              std::string dataset = {});

/// Space-separated "key=value" pairs, absent values as "absent".
std::string format_metrics(const MetricsReport& report);

struct ComparisonTable {
  std::vector<DemandCase> cases;  // table columns in low, median, high order
  std::string text;               // aligned plain text
  std::string delimited;          // CSV: metric,model,<case>...
  std::vector<std::string> warnings;
};

/// Lays out metric rows by model against demand-case columns and checks the
/// expected orderings: Cournot generation not above perfect competition, and
/// average price Cournot >= perfect-uc >= perfect. Throws DataError for an
/// empty list, reports from different datasets, or duplicate (model, case).
ComparisonTable compare_models(const std::vector<MetricsReport>& reports);

}  // namespace elmarket
