#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sdid/panel.hpp"

namespace sdid {

// Solution of one simplex-constrained ridge regression. `weights` lives on
// the probability simplex (nonnegative, sums to 1 within 1e-6).
struct WeightSolution {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double zeta = 0.0;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SolverOptions {
  double tol = 1e-10;    // relative objective decrease
  int max_iter = 10000;
};

// Pooled first differences of the donor pre-period outcomes (rows = donors,
// columns = pre-periods in order); sample standard deviation, 0 when fewer
// than two differences exist.
double first_difference_sd(const Eigen::MatrixXd& control_pre);

// Strict-convexity floor used when the noise estimate degenerates to zero.
double zeta_floor(const Eigen::MatrixXd& outcomes);

// zeta = (n_treated * n_post)^(1/4) * sigma-hat, floored away from zero.
// Throws InsufficientPrePeriods when control_pre has fewer than 2 columns.
double compute_zeta(const Eigen::MatrixXd& control_pre, int n_treated, int n_post);

// Minimizes  sum_rows (c + design*w - target)^2 + zeta^2 * n_rows * |w|^2
// over the simplex (and the free intercept c when enabled), by away-step
// conditional gradient with exact line search. Deterministic.
WeightSolution solve_simplex_regression(const Eigen::MatrixXd& design,
                                        const Eigen::VectorXd& target, double zeta,
                                        bool with_intercept,
                                        const SolverOptions& options = {});

// Unit weights omega: design columns = donors, rows = pre-periods, target =
// treated pre-period outcomes, intercept on.
WeightSolution solve_unit_weights(const Panel& panel, double zeta,
                                  const SolverOptions& options = {});

// Time weights lambda: design columns = pre-periods, rows = donors, target =
// donor post-period means, intercept on, regularization 1e-6 * sigma-hat.
// A single pre-period forces lambda = (1).
WeightSolution solve_time_weights(const Panel& panel, const SolverOptions& options = {});

// Reporting form: entries below 1e-10 snapped to exact zero, renormalized.
Eigen::VectorXd emitted_weights(const Eigen::VectorXd& weights);

// CSV layout mirroring the published weight tables: `<label_header>,weight`.
void write_weights_csv(std::ostream& out, const std::string& label_header,
                       const std::vector<std::string>& labels, const Eigen::VectorXd& weights);
std::vector<std::pair<std::string, double>> read_weights_csv(std::istream& in);

// JSON diagnostics record (zeta, objective, iterations, convergence).
std::string solution_diagnostics_json(const WeightSolution& solution);

}  // namespace sdid
