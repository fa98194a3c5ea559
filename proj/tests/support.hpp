#pragma once

// Instance builders shared by the unit tests and the acceptance binary.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "elmarket/model.hpp"

namespace elmarket::testing {

/// T periods with weight 1 and one certain scenario.
inline ModelInstance market(std::vector<double> intercepts, double slope = 1.0) {
  ModelInstance m;
  m.time.weight.assign(intercepts.size(), 1.0);
  m.time.demand_intercept = std::move(intercepts);
  m.time.demand_slope = slope;
  m.scenarios.push_back({"base", 1.0, {}});
  return m;
}

inline std::size_t add_firm(ModelInstance& m, const std::string& id) {
  m.firms.push_back({id, id, {}});
  return m.firms.size() - 1;
}

inline std::size_t add_existing(ModelInstance& m, std::size_t firm, Technology tech,
                                double q_max, double cost) {
  GenerationUnit u;
  u.id = m.firms[firm].id + "-" + std::string(to_string(tech)) + "-" +
         std::to_string(m.units.size());
  u.owner = firm;
  u.technology = tech;
  u.existing = true;
  u.q_max = q_max;
  u.marginal_cost = cost;
  return m.add_unit(u);
}

inline std::size_t add_candidate(ModelInstance& m, std::size_t firm, Technology tech,
                                 double cost, double investment_cost) {
  GenerationUnit u;
  u.id = m.firms[firm].id + "/new-" + std::string(to_string(tech));
  u.owner = firm;
  u.technology = tech;
  u.existing = false;
  u.q_max = 0.0;
  u.marginal_cost = cost;
  u.investment_cost = investment_cost;
  return m.add_unit(u);
}

/// A = 100, B = 1, one period, two single-unit firms.
inline ModelInstance duopoly(double theta, double c1, double c2, double capacity = 1e4) {
  auto m = market({100.0});
  m.theta = theta;
  add_existing(m, add_firm(m, "f1"), Technology::gas, capacity, c1);
  add_existing(m, add_firm(m, "f2"), Technology::gas, capacity, c2);
  return m;
}

/// The single-unit commitment example: Q^min 10, Q^max 50, c 20, C^on 5.
inline ModelInstance single_unit_uc(double startup_cost) {
  auto m = market({100.0});
  const auto f = add_firm(m, "f1");
  const auto u = add_existing(m, f, Technology::gas, 50.0, 20.0);
  m.units[u].q_min = 10.0;
  m.units[u].online_cost = 5.0;
  m.units[u].startup_cost = startup_cost;
  return m;
}

struct RandomShape {
  std::size_t max_firms = 3;
  std::size_t max_periods = 2;
  std::size_t max_scenarios = 2;
  std::size_t max_units_per_firm = 2;
  bool candidates = true;
  bool renewables = false;  // wind/solar with sub-unit capacity factors
};

/// Small random instance with distinct costs. Capacities are drawn so that
/// some rows bind and others do not.
inline ModelInstance random_instance(std::mt19937_64& rng, const RandomShape& shape = {}) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto real = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const std::size_t T = pick(1, shape.max_periods);
  const std::size_t S = pick(1, shape.max_scenarios);
  std::vector<double> intercepts(T);
  for (auto& a : intercepts) a = real(80.0, 160.0);
  auto m = market(intercepts, real(0.5, 2.0));
  for (auto& w : m.time.weight) w = real(0.5, 2.0);
  m.scenarios.clear();
  double remaining = 1.0;
  for (std::size_t s = 0; s < S; ++s) {
    const double p = s + 1 == S ? remaining : remaining * real(0.3, 0.7);
    remaining -= p;
    m.scenarios.push_back({"s" + std::to_string(s), p, {}});
  }
  const std::array<Technology, 4> thermal = {Technology::gas, Technology::coal,
                                             Technology::oil, Technology::hydro};
  const std::size_t F = pick(1, shape.max_firms);
  for (std::size_t f = 0; f < F; ++f) {
    const auto firm = add_firm(m, "f" + std::to_string(f));
    const std::size_t n = pick(1, shape.max_units_per_firm);
    for (std::size_t k = 0; k < n; ++k) {
      Technology tech = thermal[pick(0, thermal.size() - 1)];
      if (shape.renewables && pick(0, 2) == 0) {
        tech = pick(0, 1) ? Technology::wind : Technology::solar;
      }
      const auto u = add_existing(m, firm, tech, real(10.0, 80.0), real(5.0, 60.0));
      if (tech == Technology::wind || tech == Technology::solar) {
        m.units[u].marginal_cost = real(0.0, 3.0);
      }
    }
    if (shape.candidates && pick(0, 1)) {
      add_candidate(m, firm, pick(0, 1) ? Technology::gas : Technology::coal, real(5.0, 50.0),
                    real(5.0, 40.0));
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t u = 0; u < m.units.size(); ++u) {
      const auto tech = m.units[u].technology;
      if (tech != Technology::wind && tech != Technology::solar) continue;
      for (std::size_t t = 0; t < T; ++t) m.set_capacity_factor(u, t, s, real(0.1, 0.9));
    }
  }
  return m;
}

/// Units that carry an on binary in the commitment program.
inline std::size_t committable_units(const ModelInstance& m) {
  std::size_t n = 0;
  for (const auto& u : m.units) {
    if (u.existing && (u.online_cost != 0.0 || u.startup_cost != 0.0 || u.q_min != 0.0)) ++n;
  }
  return n;
}

/// Small random commitment instance with between 1 and `max_binaries` on
/// binaries. Demand is tight enough that minimum output and fixed costs
/// change the dispatch.
inline ModelInstance random_uc_instance(std::mt19937_64& rng, std::size_t max_binaries = 12) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto real = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  for (;;) {
    const std::size_t T = pick(1, 3);
    const std::size_t S = pick(1, 2);
    std::vector<double> intercepts(T);
    for (auto& a : intercepts) a = real(50.0, 150.0);
    auto m = market(intercepts, real(0.3, 1.5));
    m.scenarios.clear();
    if (S == 1) {
      m.scenarios.push_back({"s0", 1.0, {}});
    } else {
      const double p = real(0.2, 0.8);
      m.scenarios.push_back({"s0", p, {}});
      m.scenarios.push_back({"s1", 1.0 - p, {}});
    }
    const std::size_t F = pick(1, 2);
    for (std::size_t f = 0; f < F; ++f) {
      const auto firm = add_firm(m, "f" + std::to_string(f));
      const std::size_t n = pick(1, 3);
      for (std::size_t k = 0; k < n; ++k) {
        const Technology tech = pick(0, 1) ? Technology::gas : Technology::coal;
        const double q_max = real(20.0, 120.0);
        const auto u = add_existing(m, firm, tech, q_max, real(5.0, 60.0));
        if (pick(0, 3) != 0) {
          m.units[u].q_min = real(0.0, 0.5) * q_max;
          m.units[u].online_cost = real(0.0, 300.0);
          m.units[u].startup_cost = real(0.0, 3000.0);
          m.units[u].initial_on = pick(0, 1) == 1;
        }
      }
      if (pick(0, 3) == 0) add_candidate(m, firm, Technology::gas, real(10.0, 50.0), real(5.0, 30.0));
    }
    const std::size_t binaries = committable_units(m) * T * S;
    if (binaries >= 1 && binaries <= max_binaries) return m;
  }
}

/// Temporary directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace elmarket::testing
