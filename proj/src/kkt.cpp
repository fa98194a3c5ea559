#include <algorithm>
#include <cmath>

#include "elmarket/qp.hpp"

namespace elmarket {

double KktReport::worst_scaled() const {
  return std::max({scaled_stationarity, scaled_infeasibility, scaled_complementarity});
}

KktReport kkt_residual(const QuadraticProgram& qp, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& row_duals) {
  const auto n = static_cast<Eigen::Index>(qp.size());
  if (x.size() != n || row_duals.size() != static_cast<Eigen::Index>(qp.rows.size())) {
    throw DataError("kkt_residual: dimensions do not match the program");
  }
  KktReport report;
  const double x_scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  double b_scale = x_scale;
  for (const auto& row : qp.rows) b_scale = std::max(b_scale, std::abs(row.bound));
  const double c_scale = std::max(1.0, qp.linear.lpNorm<Eigen::Infinity>());
  const double at_bound = 1e-9 * x_scale;

  // r = grad f - A' lambda; stationarity asks r + mu = 0 with mu >= 0
  // supported only on columns at their lower bound.
  Eigen::VectorXd r = qp.gradient(x);
  for (std::size_t i = 0; i < qp.rows.size(); ++i) {
    const double lambda = row_duals[static_cast<Eigen::Index>(i)];
    if (lambda < -1e-12 * c_scale) ++report.dual_sign_violations;
    for (const auto& [j, a] : qp.rows[i].coeffs) r[static_cast<Eigen::Index>(j)] -= a * lambda;

    double activity = 0.0;
    for (const auto& [j, a] : qp.rows[i].coeffs) activity += a * x[static_cast<Eigen::Index>(j)];
    const double slack = qp.rows[i].bound - activity;
    report.primal_infeasibility = std::max(report.primal_infeasibility, -slack);
    report.complementarity_residual =
        std::max(report.complementarity_residual, std::abs(lambda * slack));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (const auto& fixed = qp.fixed[static_cast<std::size_t>(j)]) {
      report.primal_infeasibility = std::max(report.primal_infeasibility, std::abs(x[j] - *fixed));
      continue;
    }
    report.primal_infeasibility = std::max(report.primal_infeasibility, -x[j]);
    if (x[j] <= at_bound) {
      const double mu = std::max(0.0, -r[j]);
      report.stationarity_residual = std::max(report.stationarity_residual, std::abs(r[j] + mu));
      report.complementarity_residual =
          std::max(report.complementarity_residual, mu * std::abs(x[j]));
    } else {
      report.stationarity_residual = std::max(report.stationarity_residual, std::abs(r[j]));
    }
  }
  report.primal_infeasibility = std::max(0.0, report.primal_infeasibility);
  report.scaled_stationarity = report.stationarity_residual / c_scale;
  report.scaled_infeasibility = report.primal_infeasibility / b_scale;
  report.scaled_complementarity = report.complementarity_residual / (c_scale * b_scale);
  return report;
}

KktReport kkt_residual(const QuadraticProgram& qp,
                       const MarketSolution& solution) {
  return kkt_residual(qp, to_vector(qp, solution), row_duals_vector(qp, solution));
}

}  // namespace elmarket
