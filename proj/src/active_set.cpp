// Primal active-set method for  min 1/2 x'Hx + g'x  s.t.  Ax <= b, x >= 0,
// with H = -Q + eps I strictly convex. Each iteration solves the equality
// constrained subproblem on the working set through its dense KKT system,
// then either steps to its minimizer, stops at the first blocking constraint,
// or releases the constraint with the most negative multiplier.

#include <algorithm>
#include <cmath>
#include <limits>

#include "elmarket/qp.hpp"

namespace elmarket {

namespace {

using SparseRow = std::vector<std::pair<std::size_t, double>>;

struct CoreProblem {
  Eigen::MatrixXd hessian;  // H, positive definite on free columns
  Eigen::VectorXd grad;     // g
  std::vector<SparseRow> rows;
  Eigen::VectorXd bound;
  std::vector<char> fixed;
};

struct CoreState {
  Eigen::VectorXd x;
  std::vector<char> at_bound;
  std::vector<std::size_t> working;
};

struct CoreResult {
  QpStatus status = QpStatus::optimal;
  Eigen::VectorXd lambda;  // minimization multipliers, rows
  Eigen::VectorXd mu;      // minimization multipliers, lower bounds
  std::size_t iterations = 0;
};

constexpr double kUnbounded = 1e15;
constexpr std::size_t kDegenerateStreak = 25;

double row_dot(const SparseRow& row, const Eigen::VectorXd& v) {
  double sum = 0.0;
  for (const auto& [j, a] : row) sum += a * v[static_cast<Eigen::Index>(j)];
  return sum;
}

double row_norm(const SparseRow& row) {
  double m = 0.0;
  for (const auto& [j, a] : row) m = std::max(m, std::abs(a));
  return m;
}

Eigen::VectorXd solve_kkt(const Eigen::MatrixXd& K, const Eigen::VectorXd& rhs) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  Eigen::VectorXd sol = lu.solve(rhs);
  const double err = (K * sol - rhs).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  if (!sol.allFinite() || err > 1e-8 * scale) {
    sol = K.fullPivLu().solve(rhs);
  }
  return sol;
}

// Equality-constrained subproblem on the working set, over the free columns.
struct Face {
  std::vector<std::size_t> free;
  Eigen::MatrixXd K;
  Eigen::VectorXd rhs;
};

Face build_face(const CoreProblem& problem, const CoreState& state) {
  const std::size_t n = static_cast<std::size_t>(problem.grad.size());
  Face face;
  std::vector<long> position(n, -1);
  for (std::size_t j = 0; j < n; ++j) {
    if (!problem.fixed[j] && !state.at_bound[j]) {
      position[j] = static_cast<long>(face.free.size());
      face.free.push_back(j);
    }
  }
  const auto nf = static_cast<Eigen::Index>(face.free.size());
  const auto nw = static_cast<Eigen::Index>(state.working.size());

  // Contribution of the non-free columns (fixed values; bounded columns are 0).
  Eigen::VectorXd x_out = state.x;
  for (std::size_t j : face.free) x_out[static_cast<Eigen::Index>(j)] = 0.0;
  const Eigen::VectorXd h_out = problem.hessian * x_out;

  face.K = Eigen::MatrixXd::Zero(nf + nw, nf + nw);
  face.rhs.resize(nf + nw);
  for (Eigen::Index a = 0; a < nf; ++a) {
    const auto ja = static_cast<Eigen::Index>(face.free[static_cast<std::size_t>(a)]);
    for (Eigen::Index c = 0; c < nf; ++c) {
      face.K(a, c) =
          problem.hessian(ja, static_cast<Eigen::Index>(face.free[static_cast<std::size_t>(c)]));
    }
    face.rhs[a] = -problem.grad[ja] - h_out[ja];
  }
  for (Eigen::Index k = 0; k < nw; ++k) {
    const auto i = state.working[static_cast<std::size_t>(k)];
    double fixed_part = 0.0;
    for (const auto& [j, a] : problem.rows[i]) {
      if (position[j] >= 0) {
        face.K(nf + k, position[j]) = a;
        face.K(position[j], nf + k) = a;
      } else {
        fixed_part += a * state.x[static_cast<Eigen::Index>(j)];
      }
    }
    face.rhs[nf + k] = problem.bound[static_cast<Eigen::Index>(i)] - fixed_part;
  }
  return face;
}

CoreResult run_active_set(const CoreProblem& problem, CoreState& state,
                          double dual_tolerance, std::size_t max_iterations) {
  const std::size_t n = static_cast<std::size_t>(problem.grad.size());
  const std::size_t m = problem.rows.size();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) norms[i] = row_norm(problem.rows[i]);

  std::vector<char> in_working(m, 0);
  for (std::size_t i : state.working) in_working[i] = 1;

  CoreResult result;
  result.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  result.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::size_t degenerate = 0;

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    result.iterations = iter + 1;
    const Face face = build_face(problem, state);
    const auto& free = face.free;
    const auto nf = static_cast<Eigen::Index>(free.size());
    const auto nw = static_cast<Eigen::Index>(state.working.size());
    const Eigen::VectorXd sol = solve_kkt(face.K, face.rhs);

    // Step entries at rounding level are zeroed so that a square working set
    // does not produce spurious blocking constraints.
    double x_scale = std::max(1.0, state.x.lpNorm<Eigen::Infinity>());
    if (nf > 0) x_scale = std::max(x_scale, sol.head(nf).lpNorm<Eigen::Infinity>());
    const double noise = 1e-12 * x_scale;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto j = static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]);
      const double d = sol[a] - state.x[j];
      if (std::abs(d) > noise) step[j] = d;
    }

    // Ratio test; ties resolve to the lowest index, bounds before rows.
    double alpha = 1.0;
    std::optional<std::size_t> block_bound;
    std::optional<std::size_t> block_row;
    for (std::size_t j : free) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (step[jj] < 0.0) {
        const double ratio = std::max(0.0, -state.x[jj] / step[jj]);
        if (ratio < alpha) {
          alpha = ratio;
          block_bound = j;
        }
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (in_working[i]) continue;
      const double ap = row_dot(problem.rows[i], step);
      if (ap <= noise * norms[i]) continue;
      const double slack =
          problem.bound[static_cast<Eigen::Index>(i)] - row_dot(problem.rows[i], state.x);
      const double ratio = std::max(0.0, slack) / ap;
      if (ratio < alpha) {
        alpha = ratio;
        block_row = i;
        block_bound.reset();
      }
    }

    if (block_bound || block_row) {
      state.x += alpha * step;
      if (block_bound) {
        state.at_bound[*block_bound] = 1;
        state.x[static_cast<Eigen::Index>(*block_bound)] = 0.0;
      } else {
        state.working.push_back(*block_row);
        in_working[*block_row] = 1;
      }
      degenerate = alpha == 0.0 ? degenerate + 1 : 0;
      if (state.x.lpNorm<Eigen::Infinity>() > kUnbounded) {
        throw DataError("quadratic program appears unbounded");
      }
      continue;
    }

    // Full step: x is the minimizer on the working set.
    for (Eigen::Index a = 0; a < nf; ++a) {
      state.x[static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)])] = sol[a];
    }
    if (state.x.lpNorm<Eigen::Infinity>() > kUnbounded) {
      throw DataError("quadratic program appears unbounded");
    }
    Eigen::VectorXd residual = problem.hessian * state.x + problem.grad;
    result.lambda.setZero();
    for (Eigen::Index k = 0; k < nw; ++k) {
      const auto i = state.working[static_cast<std::size_t>(k)];
      const double lambda = sol[nf + k];
      result.lambda[static_cast<Eigen::Index>(i)] = lambda;
      for (const auto& [j, a] : problem.rows[i]) {
        residual[static_cast<Eigen::Index>(j)] += a * lambda;
      }
    }
    result.mu.setZero();
    for (std::size_t j = 0; j < n; ++j) {
      if (!problem.fixed[j] && state.at_bound[j]) {
        result.mu[static_cast<Eigen::Index>(j)] = residual[static_cast<Eigen::Index>(j)];
      }
    }

    // Most negative scaled multiplier; first negative one (Bland) after a
    // degenerate streak.
    const bool bland = degenerate > kDegenerateStreak;
    double worst = -dual_tolerance;
    std::optional<std::size_t> drop_bound;
    std::optional<std::size_t> drop_row;
    for (std::size_t j = 0; j < n; ++j) {
      if (problem.fixed[j] || !state.at_bound[j]) continue;
      const double mu = result.mu[static_cast<Eigen::Index>(j)];
      if (mu < worst) {
        drop_bound = j;
        if (bland) break;
        worst = mu;
      }
    }
    if (!(bland && drop_bound)) {
      for (Eigen::Index k = 0; k < nw; ++k) {
        const auto i = state.working[static_cast<std::size_t>(k)];
        const double scaled = sol[nf + k] * norms[i];
        if (scaled < worst) {
          drop_row = i;
          drop_bound.reset();
          if (bland) break;
          worst = scaled;
        }
      }
    }
    if (!drop_bound && !drop_row) {
      result.status = QpStatus::optimal;
      return result;
    }
    if (drop_row) {
      in_working[*drop_row] = 0;
      state.working.erase(std::find(state.working.begin(), state.working.end(), *drop_row));
    } else {
      state.at_bound[*drop_bound] = 0;
    }
  }
  result.status = QpStatus::iteration_limit;
  return result;
}

// Removes the Tikhonov bias from an optimal working set: Newton steps on the
// unregularized face system, preconditioned by the regularized matrix. The
// limit is the minimum-norm optimum on the face. Accepted only when the
// result stays primal and dual feasible.
bool polish(const CoreProblem& problem, double eps, double dual_tolerance,
            double feasibility_tolerance, CoreState& state, CoreResult& result) {
  const std::size_t n = static_cast<std::size_t>(problem.grad.size());
  const Face face = build_face(problem, state);
  const auto nf = static_cast<Eigen::Index>(face.free.size());
  const auto nw = static_cast<Eigen::Index>(state.working.size());
  if (nf + nw == 0) return false;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(face.K);

  Eigen::VectorXd x = state.x;
  Eigen::VectorXd lambda(nw);
  for (Eigen::Index k = 0; k < nw; ++k) {
    lambda[k] = result.lambda[static_cast<Eigen::Index>(state.working[static_cast<std::size_t>(k)])];
  }
  // Stationarity residual (H - shift I) x + g + A_W' lambda.
  auto gradient = [&](const Eigen::VectorXd& point, const Eigen::VectorXd& multipliers,
                      double shift) {
    Eigen::VectorXd r = problem.hessian * point - shift * point + problem.grad;
    for (Eigen::Index k = 0; k < nw; ++k) {
      for (const auto& [j, a] : problem.rows[state.working[static_cast<std::size_t>(k)]]) {
        r[static_cast<Eigen::Index>(j)] += a * multipliers[k];
      }
    }
    return r;
  };
  const double scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  for (int iter = 0; iter < 30; ++iter) {
    const Eigen::VectorXd r = gradient(x, lambda, eps);
    Eigen::VectorXd rhs(nf + nw);
    for (Eigen::Index a = 0; a < nf; ++a) {
      rhs[a] = -r[static_cast<Eigen::Index>(face.free[static_cast<std::size_t>(a)])];
    }
    for (Eigen::Index k = 0; k < nw; ++k) {
      const auto i = state.working[static_cast<std::size_t>(k)];
      rhs[nf + k] = problem.bound[static_cast<Eigen::Index>(i)] - row_dot(problem.rows[i], x);
    }
    const Eigen::VectorXd delta = lu.solve(rhs);
    if (!delta.allFinite()) return false;
    for (Eigen::Index a = 0; a < nf; ++a) {
      x[static_cast<Eigen::Index>(face.free[static_cast<std::size_t>(a)])] += delta[a];
    }
    lambda += delta.tail(nw);
    if (delta.head(nf).lpNorm<Eigen::Infinity>() <= 1e-14 * scale) break;
  }

  // The Newton steps leave directions that change neither the objective nor
  // the working rows where rounding put them; project them out explicitly.
  if (nf > 0) {
    Eigen::MatrixXd M(nf + nw, nf);
    M.topRows(nf) = face.K.topLeftCorner(nf, nf) - eps * Eigen::MatrixXd::Identity(nf, nf);
    M.bottomRows(nw) = face.K.bottomLeftCorner(nw, nf);
    Eigen::FullPivLU<Eigen::MatrixXd> kernel_lu(M);
    kernel_lu.setThreshold(1e-10);
    if (kernel_lu.dimensionOfKernel() > 0) {
      const Eigen::MatrixXd N = kernel_lu.kernel();
      Eigen::VectorXd xf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        xf[a] = x[static_cast<Eigen::Index>(face.free[static_cast<std::size_t>(a)])];
      }
      const Eigen::VectorXd coeffs = (N.transpose() * N).ldlt().solve(N.transpose() * xf);
      const Eigen::VectorXd projected = xf - N * coeffs;
      if (projected.allFinite() && projected.minCoeff() >= 0.0) {
        for (Eigen::Index a = 0; a < nf; ++a) {
          x[static_cast<Eigen::Index>(face.free[static_cast<std::size_t>(a)])] = projected[a];
        }
      }
    }
  }

  for (std::size_t j : face.free) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (x[jj] < -feasibility_tolerance) return false;
    x[jj] = std::max(0.0, x[jj]);
  }
  std::vector<char> in_working(problem.rows.size(), 0);
  for (std::size_t i : state.working) in_working[i] = 1;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    if (!in_working[i] &&
        row_dot(problem.rows[i], x) - problem.bound[static_cast<Eigen::Index>(i)] >
            feasibility_tolerance) {
      return false;
    }
  }
  if (nw > 0 && lambda.minCoeff() < -dual_tolerance) return false;
  const Eigen::VectorXd r = gradient(x, lambda, eps);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    if (!problem.fixed[j] && state.at_bound[j]) {
      mu[static_cast<Eigen::Index>(j)] = r[static_cast<Eigen::Index>(j)];
      if (r[static_cast<Eigen::Index>(j)] < -dual_tolerance) return false;
    }
  }

  state.x = x;
  result.lambda.setZero();
  for (Eigen::Index k = 0; k < nw; ++k) {
    result.lambda[static_cast<Eigen::Index>(state.working[static_cast<std::size_t>(k)])] = lambda[k];
  }
  result.mu = mu;
  return true;
}

double infinity_norm(const Eigen::SparseMatrix<double>& Q) {
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(Q.rows());
  for (int k = 0; k < Q.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(Q, k); it; ++it) {
      row_sums[it.row()] += std::abs(it.value());
    }
  }
  return Q.rows() == 0 ? 0.0 : row_sums.maxCoeff();
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::iteration_limit: return "iteration-limit";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

RawSolution solve_qp(const QuadraticProgram& qp, const SolverOptions& options) {
  const std::size_t n = qp.size();
  const std::size_t m = qp.rows.size();
  const auto N = static_cast<Eigen::Index>(n);
  const std::size_t max_iterations =
      options.max_iterations ? options.max_iterations : 50 * (n + m) + 1000;

  const double eps = options.regularization * std::max(1.0, infinity_norm(qp.quadratic));
  CoreProblem main;
  main.hessian = -Eigen::MatrixXd(qp.quadratic);
  main.hessian.diagonal().array() += eps;
  main.grad = -qp.linear;
  main.bound.resize(static_cast<Eigen::Index>(m));
  main.rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    main.rows.push_back(qp.rows[i].coeffs);
    main.bound[static_cast<Eigen::Index>(i)] = qp.rows[i].bound;
  }
  main.fixed.assign(n, 0);

  CoreState state;
  state.x = Eigen::VectorXd::Zero(N);
  state.at_bound.assign(n, 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (qp.fixed[j]) {
      main.fixed[j] = 1;
      state.at_bound[j] = 0;
      state.x[static_cast<Eigen::Index>(j)] = *qp.fixed[j];
    }
  }

  const double b_scale = std::max(
      {1.0, main.bound.size() ? main.bound.lpNorm<Eigen::Infinity>() : 0.0,
       state.x.lpNorm<Eigen::Infinity>()});
  const double feasibility_tolerance = 1e-9 * b_scale;

  RawSolution raw;
  std::size_t phase_one_iterations = 0;

  // Elastic phase: add a slack to every violated row and minimize their sum.
  std::vector<std::size_t> violated;
  for (std::size_t i = 0; i < m; ++i) {
    if (row_dot(main.rows[i], state.x) - main.bound[static_cast<Eigen::Index>(i)] >
        feasibility_tolerance) {
      violated.push_back(i);
    }
  }
  if (!violated.empty()) {
    const std::size_t ns = violated.size();
    CoreProblem elastic;
    elastic.hessian = Eigen::MatrixXd::Identity(N + static_cast<Eigen::Index>(ns),
                                                N + static_cast<Eigen::Index>(ns)) *
                      options.regularization;
    elastic.grad = Eigen::VectorXd::Zero(N + static_cast<Eigen::Index>(ns));
    elastic.grad.tail(static_cast<Eigen::Index>(ns)).setOnes();
    elastic.rows = main.rows;
    elastic.bound = main.bound;
    elastic.fixed = main.fixed;
    elastic.fixed.resize(n + ns, 0);
    CoreState estate;
    estate.x = Eigen::VectorXd::Zero(N + static_cast<Eigen::Index>(ns));
    estate.x.head(N) = state.x;
    estate.at_bound = state.at_bound;
    estate.at_bound.resize(n + ns, 0);
    for (std::size_t k = 0; k < ns; ++k) {
      const std::size_t i = violated[k];
      elastic.rows[i].emplace_back(n + k, -1.0);
      estate.x[N + static_cast<Eigen::Index>(k)] =
          row_dot(main.rows[i], state.x) - main.bound[static_cast<Eigen::Index>(i)];
    }
    const auto er = run_active_set(elastic, estate, 1e-12, max_iterations);
    phase_one_iterations = er.iterations;
    const double infeasibility = estate.x.tail(static_cast<Eigen::Index>(ns)).sum();
    state.x = estate.x.head(N);
    for (std::size_t j = 0; j < n; ++j) {
      if (!main.fixed[j]) {
        state.x[static_cast<Eigen::Index>(j)] = std::max(0.0, state.x[static_cast<Eigen::Index>(j)]);
        state.at_bound[j] = state.x[static_cast<Eigen::Index>(j)] <= 0.0;
      }
    }
    if (er.status != QpStatus::optimal || infeasibility > 1e-7 * b_scale) {
      raw.status = er.status == QpStatus::optimal ? QpStatus::infeasible : er.status;
      raw.x = state.x;
      raw.row_duals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
      raw.bound_duals = Eigen::VectorXd::Zero(N);
      raw.iterations = phase_one_iterations;
      raw.objective = qp.objective(raw.x);
      raw.regularized_objective = raw.objective;
      return raw;
    }
  }

  const double dual_tolerance =
      0.1 * options.tolerance * std::max(1.0, qp.linear.lpNorm<Eigen::Infinity>());
  auto cr = run_active_set(main, state, dual_tolerance, max_iterations);

  // The regularized optimum is kept for callers that need its objective.
  double norm2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!qp.fixed[j]) norm2 += state.x[static_cast<Eigen::Index>(j)] * state.x[static_cast<Eigen::Index>(j)];
  }
  raw.regularized_objective = qp.objective(state.x) - 0.5 * eps * norm2;
  if (cr.status == QpStatus::optimal && options.polish) {
    polish(main, eps, dual_tolerance, feasibility_tolerance, state, cr);
  }

  raw.status = cr.status;
  raw.x = state.x;
  raw.row_duals = cr.lambda.cwiseMax(0.0);
  raw.bound_duals = cr.mu.cwiseMax(0.0);
  raw.iterations = phase_one_iterations + cr.iterations;
  raw.objective = qp.objective(raw.x);
  return raw;
}

QpOutcome solve_concave_qp(const QuadraticProgram& qp, double tolerance) {
  SolverOptions options;
  options.tolerance = tolerance;
  const auto raw = solve_qp(qp, options);
  if (raw.status == QpStatus::infeasible) {
    throw DataError("quadratic program is infeasible");
  }
  QpOutcome outcome;
  outcome.solution = extract_prices_and_duals(qp, raw);
  outcome.kkt = kkt_residual(qp, raw.x, raw.row_duals);
  outcome.status = raw.status;
  outcome.iterations = raw.iterations;
  return outcome;
}

}  // namespace elmarket
