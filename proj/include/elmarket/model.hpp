#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace elmarket {

/// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Technology { gas, coal, hydro, oil, wind, solar, other };

inline constexpr std::size_t kTechnologyCount = 7;
inline constexpr std::array<Technology, 6> kInvestableTechnologies = {
    Technology::gas,  Technology::coal, Technology::hydro,
    Technology::oil,  Technology::wind, Technology::solar};

std::string_view to_string(Technology tech);
std::optional<Technology> parse_technology(std::string_view name);
constexpr bool is_investable(Technology tech) { return tech != Technology::other; }

/// Per-technology physical attributes. Emission intensity is in tonnes CO2
/// per MWh.
struct TechnologyInfo {
  bool renewable = false;
  bool non_synchronous = false;
  double emission_intensity = 0.0;
};

/// Technology attributes indexed by Technology. The defaults classify hydro as
/// renewable but synchronous and carry indicative emission intensities; real
/// datasets override them.
class TechnologyTable {
 public:
  TechnologyTable();

  const TechnologyInfo& operator[](Technology tech) const {
    return info_[static_cast<std::size_t>(tech)];
  }
  TechnologyInfo& operator[](Technology tech) {
    return info_[static_cast<std::size_t>(tech)];
  }

 private:
  std::array<TechnologyInfo, kTechnologyCount> info_;
};

struct GenerationUnit {
  std::string id;
  std::size_t owner = 0;  // index into ModelInstance::firms
  Technology technology = Technology::gas;
  bool existing = true;
  double q_max = 0.0;            // MW
  double q_min = 0.0;            // MW
  double marginal_cost = 0.0;    // EUR/MWh
  double investment_cost = 0.0;  // EUR/MW
  double online_cost = 0.0;      // EUR per online period
  double startup_cost = 0.0;     // EUR per startup
  bool initial_on = false;       // commitment status before the first period
};

struct Firm {
  std::string id;
  std::string name;
  std::vector<std::size_t> units;  // indices into ModelInstance::units
};

struct TimeGrid {
  std::vector<double> weight;            // W_t, one per period
  std::vector<double> demand_intercept;  // A_t, EUR/MWh
  double demand_slope = 1.0;             // B, EUR/MWh per MW

  std::size_t periods() const { return weight.size(); }
};

/// A capacity-factor scenario. Capacity factors are stored densely as
/// [unit * periods + period]; an empty vector means 1.0 everywhere.
struct Scenario {
  std::string id;
  double probability = 1.0;
  std::vector<double> capacity_factor;
};

struct ModelInstance {
  std::vector<Firm> firms;
  std::vector<GenerationUnit> units;
  TimeGrid time;
  std::vector<Scenario> scenarios;
  TechnologyTable technologies;
  double theta = 0.0;
  double snsp_cap = 0.75;
  // Investment cost sits inside the probability/time weighted sum of the
  // objective when true, and is charged once when false.
  bool investment_cost_weighted = true;
  // Gate invested capacity by its own commitment binary in the UC model.
  bool commit_invested_capacity = false;

  std::size_t periods() const { return time.periods(); }
  std::size_t scenario_count() const { return scenarios.size(); }

  double capacity_factor(std::size_t unit, std::size_t period,
                         std::size_t scenario) const;
  void set_capacity_factor(std::size_t unit, std::size_t period,
                           std::size_t scenario, double value);

  /// Sum over (t,s) of P_s * W_t.
  double total_weight() const;
  double weight(std::size_t period, std::size_t scenario) const {
    return scenarios[scenario].probability * time.weight[period];
  }
  /// Multiplier applied to C^Inv in every objective.
  double investment_weight() const {
    return investment_cost_weighted ? total_weight() : 1.0;
  }
  std::optional<std::size_t> find_firm(std::string_view id) const;
  std::optional<std::size_t> find_unit(std::string_view id) const;

  /// Appends a unit and registers it with its owner.
  std::size_t add_unit(GenerationUnit unit);
};

struct Violation {
  std::string path;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_instance(const ModelInstance& instance);

/// Throws DataError carrying the full report when the instance is invalid.
void require_valid(const ModelInstance& instance);

/// A tagged constraint row; also the key under which duals are reported.
enum class RowKind {
  capacity,
  snsp,
  fix_existing_investment,
  min_generation,
  commitment_bound,
  startup_logic,
  transition_limit,
  invested_commitment,
};

std::string_view to_string(RowKind kind);

struct ConstraintTag {
  RowKind kind = RowKind::capacity;
  std::size_t unit = 0;
  std::size_t period = 0;
  std::size_t scenario = 0;

  friend bool operator==(const ConstraintTag&, const ConstraintTag&) = default;
};

std::string format_tag(const ConstraintTag& tag);

struct Dual {
  ConstraintTag tag;
  double value = 0.0;
};

/// Generation, investment and price decisions for one instance. Generation is
/// stored densely as [(unit * periods + period) * scenarios + scenario].
struct MarketSolution {
  std::size_t units = 0;
  std::size_t periods = 0;
  std::size_t scenarios = 0;
  std::vector<double> generation;
  std::vector<double> investment;
  std::vector<double> price;  // [period * scenarios + scenario]
  std::vector<Dual> duals;
  double objective_value = 0.0;

  static MarketSolution zeros(const ModelInstance& instance);

  std::size_t index(std::size_t unit, std::size_t period,
                    std::size_t scenario) const {
    return (unit * periods + period) * scenarios + scenario;
  }
  double q(std::size_t unit, std::size_t period, std::size_t scenario) const {
    return generation[index(unit, period, scenario)];
  }
  double& q(std::size_t unit, std::size_t period, std::size_t scenario) {
    return generation[index(unit, period, scenario)];
  }
  double pi(std::size_t period, std::size_t scenario) const {
    return price[period * scenarios + scenario];
  }
  std::optional<double> dual(const ConstraintTag& tag) const;
};

/// Price at the given total supply. Not clamped at zero.
double inverse_demand(double intercept, double slope, double total_supply);

double total_supply(const MarketSolution& solution, std::size_t period,
                    std::size_t scenario);

/// Recomputes every price from total supply.
void refresh_prices(const ModelInstance& instance, MarketSolution& solution);

/// Weighted profit of one firm with prices recomputed from total supply.
double firm_profit(const ModelInstance& instance,
                   const MarketSolution& solution, std::size_t firm);
double firm_profit(const ModelInstance& instance,
                   const MarketSolution& solution, std::string_view firm_id);

/// Weighted consumer-surplus term 1/2 B (sum q)^2 summed over (t,s).
double consumer_surplus_term(const ModelInstance& instance,
                             const MarketSolution& solution);

/// Throws DataError when the solution shape does not match the instance.
void check_dimensions(const ModelInstance& instance,
                      const MarketSolution& solution);

}  // namespace elmarket
