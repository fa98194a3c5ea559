#include "elmarket/run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "elmarket/commitment.hpp"
#include "elmarket/oracles.hpp"
#include "elmarket/qp.hpp"

namespace elmarket {

namespace fs = std::filesystem;

namespace {

struct RunOutcome {
  ModelKind model = ModelKind::perfect;
  DemandCase demand_case = DemandCase::median;
  int code = kExitOk;
  std::string log;
  std::string status = "not-run";
  bool certified = false;
  double objective = 0.0;
  std::optional<MetricsReport> metrics;
};

std::string run_name(ModelKind model, DemandCase demand_case) {
  return std::string(to_string(model)) + "-" + std::string(to_string(demand_case));
}

std::string num(double value) { return format_number(value); }

class RunLog {
 public:
  RunLog(ModelKind model, DemandCase demand_case)
      : tag_("model=" + std::string(to_string(model)) +
             " case=" + std::string(to_string(demand_case))) {}

  void line(const char* prefix, const std::string& text) {
    out_ << prefix << ' ' << tag_ << ' ' << text << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::string tag_;
  std::ostringstream out_;
};

double max_abs_difference(const MarketSolution& a, const MarketSolution& b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.generation.size(); ++i) {
    diff = std::max(diff, std::abs(a.generation[i] - b.generation[i]));
  }
  for (std::size_t i = 0; i < a.investment.size(); ++i) {
    diff = std::max(diff, std::abs(a.investment[i] - b.investment[i]));
  }
  return diff;
}

double max_quantity(const MarketSolution& s) {
  double m = 1.0;
  for (double q : s.generation) m = std::max(m, std::abs(q));
  for (double q : s.investment) m = std::max(m, std::abs(q));
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string kkt_fields(const KktReport& kkt) {
  std::ostringstream out;
  out << "stationarity=" << num(kkt.scaled_stationarity)
      << " infeasibility=" << num(kkt.scaled_infeasibility)
      << " complementarity=" << num(kkt.scaled_complementarity)
      << " dual_sign_violations=" << kkt.dual_sign_violations;
  return out.str();
}

void write_schedule(const ModelInstance& instance, const CommitmentSolution& solution,
                    const fs::path& path) {
  std::ostringstream out;
  out << "unit,period,scenario,on,startup,shutdown\n";
  const auto& sched = solution.schedule;
  for (std::size_t u = 0; u < sched.units; ++u) {
    for (std::size_t t = 0; t < sched.periods; ++t) {
      for (std::size_t s = 0; s < sched.scenarios; ++s) {
        const auto i = sched.index(u, t, s);
        out << instance.units[u].id << ',' << t + 1 << ',' << instance.scenarios[s].id << ','
            << int(sched.on[i]) << ',' << int(sched.startup[i]) << ','
            << int(sched.shutdown[i]) << '\n';
      }
    }
  }
  write_text(path, out.str());
}

RunOutcome execute(const RunConfig& config, const ModelInstance& base,
                   const std::string& dataset, ModelKind model, DemandCase demand_case) {
  RunOutcome outcome;
  outcome.model = model;
  outcome.demand_case = demand_case;
  RunLog log(model, demand_case);
  const fs::path dir = config.output / run_name(model, demand_case);
  std::ostringstream cert;
  cert << "model," << to_string(model) << "\ncase," << to_string(demand_case) << '\n';

  try {
    ModelInstance instance = base;
    instance.theta = model == ModelKind::cournot ? config.theta.value_or(1.0) : 0.0;
    fs::create_directories(dir);
    const auto start = std::chrono::steady_clock::now();
    auto seconds = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    SolverOptions solver;
    solver.tolerance = config.solver_tolerance;
    solver.max_iterations = config.iteration_limit;
    MarketSolution solution;

    if (model != ModelKind::perfect_uc) {
      const auto qp = assemble_single_opt(instance);
      {
        std::ostringstream text;
        text << "theta=" << num(instance.theta) << " columns=" << qp.size()
             << " rows=" << qp.rows.size();
        log.line("RUN", text.str());
      }
      if (config.dump_qp) {
        std::ofstream out(dir / "program.qp", std::ios::binary | std::ios::trunc);
        dump_qp(qp, out);
      }
      const auto raw = solve_qp(qp, solver);
      if (raw.status == QpStatus::infeasible) throw DataError("quadratic program is infeasible");
      solution = extract_prices_and_duals(qp, raw);
      const auto kkt = kkt_residual(qp, raw.x, raw.row_duals);
      outcome.status = std::string(to_string(raw.status));
      {
        std::ostringstream text;
        text << "status=" << outcome.status << " iterations=" << raw.iterations
             << " objective=" << num(solution.objective_value) << " seconds=" << seconds();
        log.line("SOLVE", text.str());
      }
      outcome.certified = raw.status == QpStatus::optimal && kkt.certified(config.tolerance);
      log.line("CERT", "kind=kkt " + kkt_fields(kkt) + " tolerance=" + num(config.tolerance) +
                           " result=" + (outcome.certified ? "pass" : "fail"));
      cert << "status," << outcome.status << "\niterations," << raw.iterations
           << "\nobjective," << num(solution.objective_value)
           << "\nscaled_stationarity," << num(kkt.scaled_stationarity)
           << "\nscaled_infeasibility," << num(kkt.scaled_infeasibility)
           << "\nscaled_complementarity," << num(kkt.scaled_complementarity)
           << "\ndual_sign_violations," << kkt.dual_sign_violations
           << "\nkkt_tolerance," << num(config.tolerance) << '\n';
      if (raw.status == QpStatus::iteration_limit) outcome.code = kExitNonConvergence;

      if (config.verify && model == ModelKind::perfect) {
        // Firm profits plus consumer surplus must reproduce the welfare objective.
        double total = consumer_surplus_term(instance, solution);
        for (std::size_t f = 0; f < instance.firms.size(); ++f) {
          total += firm_profit(instance, solution, f);
        }
        const double rel = std::abs(total - solution.objective_value) /
                           std::max(1.0, std::abs(solution.objective_value));
        const bool ok = rel <= 1e-6;
        log.line("CERT", "kind=welfare-identity relative_error=" + num(rel) +
                             " result=" + (ok ? "pass" : "fail"));
        cert << "verify_welfare_identity," << (ok ? "pass" : "fail") << '\n';
        outcome.certified = outcome.certified && ok;
      }
      if (config.verify && model == ModelKind::cournot) {
        if (instance.theta != 1.0) {
          log.line("CERT", "kind=diagonalization result=skip reason=theta-not-1");
        } else if (qp.size() > config.verify_column_budget) {
          log.line("CERT", "kind=diagonalization result=skip reason=columns-" +
                               std::to_string(qp.size()) + ">" +
                               std::to_string(config.verify_column_budget));
        } else {
          const double dual_floor =
              1e-9 * std::max(1.0, qp.linear.lpNorm<Eigen::Infinity>());
          bool snsp_binding = false;
          for (const auto& dual : solution.duals) {
            if (dual.tag.kind == RowKind::snsp && dual.value > dual_floor) snsp_binding = true;
          }
          // Firms optimize without the system-wide SNSP row, so a binding SNSP
          // row is dropped from the program being compared.
          MarketSolution reference = solution;
          if (snsp_binding) {
            AssemblyOptions options;
            options.include_snsp = false;
            const auto free_qp = assemble_single_opt(instance, options);
            reference = extract_prices_and_duals(free_qp, solve_qp(free_qp, solver));
          }
          DiagonalizationOptions dopt;
          dopt.tolerance = 1e-9;
          const auto diag = best_response_diagonalization(instance, dopt);
          const double diff = max_abs_difference(diag.solution, reference);
          const double limit = 1e-6 * max_quantity(reference);
          const bool ok = diag.trace.converged && diff <= limit;
          log.line("CERT", "kind=diagonalization sweeps=" + std::to_string(diag.trace.iterations) +
                               " snsp=" + (snsp_binding ? "omitted" : "included") +
                               " max_difference_mw=" + num(diff) + " limit=" + num(limit) +
                               " result=" + (ok ? "pass" : "fail"));
          cert << "verify_diagonalization," << (ok ? "pass" : "fail") << '\n';
          outcome.certified = outcome.certified && ok;
        }
      }
    } else {
      const auto program = assemble_uc(instance);
      const bool exact =
          config.uc_mode == UcMode::exact ||
          (config.uc_mode == UcMode::automatic && program.size() <= config.uc_exact_budget);
      {
        std::ostringstream text;
        text << "theta=0 columns=" << program.relaxation.size()
             << " rows=" << program.relaxation.rows.size() << " binaries=" << program.size()
             << " mode=" << (exact ? "exact" : "heuristic");
        log.line("RUN", text.str());
      }
      if (config.dump_qp) {
        std::ofstream out(dir / "program.qp", std::ios::binary | std::ios::trunc);
        dump_qp(program.relaxation, out);
      }
      CommitmentSolution uc;
      if (exact) {
        std::ofstream node_log(dir / "nodes.tsv", std::ios::binary | std::ios::trunc);
        BranchAndBoundOptions options;
        options.gap_target = config.gap;
        options.node_limit = config.node_limit;
        options.tolerance = config.solver_tolerance;
        options.node_log = &node_log;
        uc = solve_branch_and_bound(program, options);
      } else {
        const auto root = solve_qp(program.relaxation, solver);
        if (root.status == QpStatus::infeasible) throw DataError("commitment relaxation is infeasible");
        if (root.status != QpStatus::optimal) {
          outcome.code = kExitNonConvergence;
          log.line("SOLVE", "status=" + std::string(to_string(root.status)) +
                                " stage=relaxation");
        }
        uc = rounding_heuristic(program, root, config.solver_tolerance,
                                config.uc_improvement_budget);
      }
      solution = uc.market;
      outcome.status = exact ? (uc.heuristic ? "node-limit" : "optimal") : "heuristic";
      {
        std::ostringstream text;
        text << "status=" << outcome.status << " nodes=" << uc.nodes_explored
             << " objective=" << num(uc.lower_bound) << " bound=" << num(uc.upper_bound)
             << " gap=" << num(uc.gap) << " seconds=" << seconds();
        log.line("SOLVE", text.str());
      }
      const bool kkt_ok = uc.kkt.certified(config.tolerance);
      const bool gap_ok = !exact || uc.gap <= config.gap;
      log.line("CERT", "kind=gap gap=" + num(uc.gap) + " target=" + num(config.gap) +
                           " result=" + (exact ? (gap_ok ? "pass" : "fail") : "reported"));
      log.line("CERT", "kind=kkt-fixed-pattern " + kkt_fields(uc.kkt) +
                           " tolerance=" + num(config.tolerance) +
                           " result=" + (kkt_ok ? "pass" : "fail"));
      outcome.certified = kkt_ok && gap_ok;
      cert << "status," << outcome.status << "\nnodes," << uc.nodes_explored
           << "\nobjective," << num(uc.lower_bound) << "\nbound," << num(uc.upper_bound)
           << "\ngap," << num(uc.gap) << "\ngap_target," << num(config.gap)
           << "\nscaled_stationarity," << num(uc.kkt.scaled_stationarity)
           << "\nscaled_infeasibility," << num(uc.kkt.scaled_infeasibility)
           << "\nscaled_complementarity," << num(uc.kkt.scaled_complementarity)
           << "\nkkt_tolerance," << num(config.tolerance) << '\n';
      write_schedule(instance, uc, dir / "commitment.csv");

      if (config.verify) {
        if (program.size() > config.verify_binary_budget) {
          log.line("CERT", "kind=brute-force result=skip reason=binaries-" +
                               std::to_string(program.size()) + ">" +
                               std::to_string(config.verify_binary_budget));
        } else {
          const auto best = brute_force_uc(program, config.verify_binary_budget,
                                           config.solver_tolerance);
          const double scale = std::max(1.0, std::abs(best.lower_bound));
          const double diff = (best.lower_bound - uc.lower_bound) / scale;
          // An exact search must match; a heuristic incumbent must not exceed.
          const bool ok = exact ? std::abs(diff) <= std::max(1e-6, config.gap) : diff >= -1e-9;
          log.line("CERT", "kind=brute-force patterns=" + std::to_string(best.nodes_explored) +
                               " objective=" + num(best.lower_bound) +
                               " relative_difference=" + num(diff) +
                               " result=" + (ok ? "pass" : "fail"));
          cert << "verify_brute_force," << (ok ? "pass" : "fail") << '\n';
          outcome.certified = outcome.certified && ok;
        }
      }
    }

    outcome.objective = solution.objective_value;
    cert << "result," << (outcome.certified ? "pass" : "fail") << '\n';
    write_solution(instance, solution, config.format, dir);
    write_text(dir / "certificate.csv", "key,value\n" + cert.str());
    outcome.metrics = compute_metrics(instance, solution, model, demand_case, dataset);
    log.line("METRIC", format_metrics(*outcome.metrics));
    if (outcome.code == kExitOk && !outcome.certified) outcome.code = kExitCertificationFailure;
  } catch (const DataError& e) {
    outcome.code = kExitDataError;
    outcome.status = "data-error";
    log.line("RUN", std::string("error=\"") + e.what() + "\"");
  } catch (const std::exception& e) {
    outcome.code = kExitNonConvergence;
    outcome.status = "error";
    log.line("RUN", std::string("error=\"") + e.what() + "\"");
  }
  outcome.log = log.str();
  return outcome;
}

DatasetManifest build_manifest(const RunConfig& config) {
  DatasetManifest manifest;
  if (!config.manifest.empty()) {
    manifest = load_manifest(config.manifest, config.data_root);
  } else {
    manifest.dataset_id = "command-line";
  }
  const fs::path root = config.data_root ? *config.data_root
                        : config.manifest.empty() ? default_data_root()
                                                  : fs::path();
  auto apply = [&](const std::optional<fs::path>& flag, fs::path& target) {
    if (!flag) return;
    target = flag->is_absolute() || root.empty() ? *flag : root / *flag;
  };
  apply(config.firms, manifest.firms);
  apply(config.units, manifest.units);
  apply(config.technologies, manifest.technologies);
  apply(config.time_grid, manifest.time_grid);
  apply(config.scenarios, manifest.scenarios);
  apply(config.capacity_factors, manifest.capacity_factors);
  apply(config.technology_profiles, manifest.technology_profiles);
  check_manifest_files(manifest);
  return manifest;
}

}  // namespace

std::string_view to_string(UcMode mode) {
  switch (mode) {
    case UcMode::automatic: return "auto";
    case UcMode::exact: return "exact";
    case UcMode::heuristic: return "heuristic";
  }
  return "auto";
}

std::optional<UcMode> parse_uc_mode(std::string_view name) {
  for (auto m : {UcMode::automatic, UcMode::exact, UcMode::heuristic}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

void check_config(const RunConfig& config) {
  if (config.models.empty()) throw DataError("no model selected");
  if (config.demand_cases.empty()) throw DataError("no demand case selected");
  if (!(config.tolerance > 0.0) || !(config.solver_tolerance > 0.0)) {
    throw DataError("tolerances must be positive");
  }
  if (!(config.gap >= 0.0)) throw DataError("gap target must be non-negative");
  if (config.jobs == 0) throw DataError("--jobs must be at least 1");
  if (config.theta && !(*config.theta >= 0.0 && *config.theta <= 1.0)) {
    throw DataError("theta must lie in [0, 1]");
  }
}

int run(const RunConfig& config, std::ostream& log) {
  // Load every selected case before anything is written.
  DatasetManifest manifest;
  std::vector<std::pair<DemandCase, ModelInstance>> instances;
  try {
    check_config(config);
    manifest = build_manifest(config);
    for (DemandCase c : config.demand_cases) {
      if (std::any_of(instances.begin(), instances.end(),
                      [&](const auto& p) { return p.first == c; })) {
        continue;
      }
      manifest.demand_case = c;
      LoadSummary summary;
      instances.emplace_back(c, load_instance(manifest, &summary));
      log << "RUN load case=" << to_string(c) << ' ' << summary.describe() << '\n';
    }
  } catch (const DataError& e) {
    log << "RUN error=\"" << e.what() << "\"\n";
    log << "RUN summary runs=0 exit=" << kExitDataError << '\n';
    return kExitDataError;
  }

  struct Job {
    ModelKind model;
    DemandCase demand_case;
    const ModelInstance* instance;
  };
  std::vector<Job> jobs;
  for (DemandCase c : config.demand_cases) {
    const auto it = std::find_if(instances.begin(), instances.end(),
                                 [&](const auto& p) { return p.first == c; });
    for (ModelKind m : config.models) {
      if (std::any_of(jobs.begin(), jobs.end(), [&](const Job& j) {
            return j.model == m && j.demand_case == c;
          })) {
        continue;
      }
      jobs.push_back({m, c, &it->second});
    }
  }

  try {
    fs::create_directories(config.output);
  } catch (const fs::filesystem_error& e) {
    log << "RUN error=\"" << e.what() << "\"\n";
    return kExitDataError;
  }

  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex emit;
  std::size_t emitted = 0;
  std::vector<char> done(jobs.size(), 0);
  // Logs are emitted in job order whatever the completion order.
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      outcomes[k] = execute(config, *jobs[k].instance, manifest.dataset_id, jobs[k].model,
                            jobs[k].demand_case);
      std::lock_guard<std::mutex> lock(emit);
      done[k] = 1;
      while (emitted < jobs.size() && done[emitted]) {
        log << outcomes[emitted].log << std::flush;
        ++emitted;
      }
    }
  };
  const std::size_t threads = std::min(config.jobs, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  int code = kExitOk;
  std::vector<MetricsReport> reports;
  std::ostringstream runs;
  runs << "model,case,status,certified,objective,exit\n";
  std::size_t passed = 0;
  for (const auto& o : outcomes) {
    if (o.metrics) reports.push_back(*o.metrics);
    if (o.code == kExitOk) ++passed;
    runs << to_string(o.model) << ',' << to_string(o.demand_case) << ',' << o.status << ','
         << (o.certified ? 1 : 0) << ',' << num(o.objective) << ',' << o.code << '\n';
    if (o.code != kExitOk) {
      if (code == kExitOk || o.code < code) code = o.code;
    }
  }
  write_text(config.output / "runs.csv", runs.str());
  if (!reports.empty()) {
    try {
      const auto table = compare_models(reports);
      write_text(config.output / "comparison.txt", table.text);
      write_text(config.output / "comparison.csv", table.delimited);
      for (const auto& w : table.warnings) log << "METRIC warning=\"" << w << "\"\n";
      log << table.text;
    } catch (const DataError& e) {
      log << "METRIC error=\"" << e.what() << "\"\n";
      if (code == kExitOk) code = kExitDataError;
    }
  }
  log << "RUN summary runs=" << outcomes.size() << " passed=" << passed << " exit=" << code
      << '\n';
  return code;
}

}  // namespace elmarket
