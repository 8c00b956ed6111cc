#include "sdid/weight_solver.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

namespace {

// Equality-constrained ridge solve restricted to the support of w, with
// Lawson-Hanson style removal of negative coordinates. Returns true and
// overwrites w when the restricted optimum is feasible and improves the
// objective; the conditional-gradient loop calls this on a fixed schedule
// to finish off instances where pure vertex steps crawl (near-interpolation
// fits need objective values at machine precision).
bool active_set_polish(const Eigen::MatrixXd& centered, const Eigen::VectorXd& response,
                       double ridge, Eigen::VectorXd& w, Eigen::VectorXd& residual,
                       double& objective) {
  const Eigen::Index k = w.size();
  std::vector<Eigen::Index> support;
  support.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    if (w(i) > 0.0) support.push_back(i);
  }

  for (int round = 0; round < 64 && !support.empty(); ++round) {
    const auto s = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd cols(centered.rows(), s);
    for (Eigen::Index i = 0; i < s; ++i) cols.col(i) = centered.col(support[i]);

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    kkt.topLeftCorner(s, s) = 2.0 * (cols.transpose() * cols);
    kkt.topLeftCorner(s, s).diagonal().array() += 2.0 * ridge;
    kkt.topRightCorner(s, 1).setOnes();
    kkt.bottomLeftCorner(1, s).setOnes();
    Eigen::VectorXd rhs(s + 1);
    rhs.head(s) = 2.0 * (cols.transpose() * response);
    rhs(s) = 1.0;

    Eigen::VectorXd solution = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd v = solution.head(s);

    double most_negative = 0.0;
    Eigen::Index worst = -1;
    for (Eigen::Index i = 0; i < s; ++i) {
      if (v(i) < most_negative) {
        most_negative = v(i);
        worst = i;
      }
    }
    if (worst >= 0 && most_negative < -1e-12) {
      support.erase(support.begin() + worst);
      continue;
    }

    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < s; ++i) {
      candidate(support[i]) = std::max(v(i), 0.0);
    }
    double total = candidate.sum();
    if (!(total > 0.0)) return false;
    candidate /= total;

    Eigen::VectorXd candidate_residual = centered * candidate - response;
    double candidate_objective =
        candidate_residual.squaredNorm() + ridge * candidate.squaredNorm();
    if (candidate_objective < objective) {
      w = candidate;
      residual = candidate_residual;
      objective = candidate_objective;
      return true;
    }
    return false;
  }
  return false;
}

constexpr int kPolishInterval = 50;

}  // namespace

double first_difference_sd(const Eigen::MatrixXd& control_pre) {
  std::vector<double> diffs;
  if (control_pre.cols() >= 2) {
    diffs.reserve(static_cast<std::size_t>(control_pre.rows() * (control_pre.cols() - 1)));
    for (Eigen::Index r = 0; r < control_pre.rows(); ++r) {
      for (Eigen::Index c = 1; c < control_pre.cols(); ++c) {
        diffs.push_back(control_pre(r, c) - control_pre(r, c - 1));
      }
    }
  }
  if (diffs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(diffs.size());
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  return std::sqrt(ss / static_cast<double>(diffs.size() - 1));
}

double zeta_floor(const Eigen::MatrixXd& outcomes) {
  double max_abs = 0.0;
  for (Eigen::Index i = 0; i < outcomes.size(); ++i) {
    max_abs = std::max(max_abs, std::abs(outcomes.data()[i]));
  }
  return 1e-9 * (1.0 + max_abs);
}

double compute_zeta(const Eigen::MatrixXd& control_pre, int n_treated, int n_post) {
  if (control_pre.cols() < 2) {
    raise(ErrorCode::InsufficientPrePeriods,
          "zeta needs at least 2 pre-periods; pass zeta explicitly instead");
  }
  if (control_pre.rows() < 1) {
    raise(ErrorCode::InsufficientDonors, "zeta needs at least 1 donor");
  }
  if (n_treated < 1 || n_post < 1) {
    raise(ErrorCode::ConfigError, "n_treated and n_post must be at least 1");
  }
  double sigma = first_difference_sd(control_pre);
  double zeta =
      std::pow(static_cast<double>(n_treated) * static_cast<double>(n_post), 0.25) * sigma;
  if (zeta == 0.0) zeta = zeta_floor(control_pre);
  return zeta;
}

WeightSolution solve_simplex_regression(const Eigen::MatrixXd& design,
                                        const Eigen::VectorXd& target, double zeta,
                                        bool with_intercept, const SolverOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (n != target.size()) {
    raise(ErrorCode::ConfigError, "design rows must equal target length");
  }
  if (k < 1 || n < 1) {
    raise(ErrorCode::ConfigError, "design needs at least 1 row and 1 column");
  }
  if (!design.allFinite() || !target.allFinite() || !std::isfinite(zeta)) {
    raise(ErrorCode::NonFiniteInput, "design, target, and zeta must be finite");
  }

  // Profile the intercept out by centering; c = mean(target - design*w) is
  // optimal for any w, so the centered problem has the same weight path.
  Eigen::MatrixXd centered = design;
  Eigen::VectorXd response = target;
  Eigen::RowVectorXd col_means = Eigen::RowVectorXd::Zero(k);
  double target_mean = 0.0;
  if (with_intercept) {
    col_means = design.colwise().mean();
    centered.rowwise() -= col_means;
    target_mean = target.mean();
    response.array() -= target_mean;
  }

  const double ridge = zeta * zeta * static_cast<double>(n);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  Eigen::VectorXd residual = centered * w - response;
  double objective = residual.squaredNorm() + ridge * w.squaredNorm();

  WeightSolution solution;
  solution.zeta = zeta;
  solution.converged = false;

  Eigen::VectorXd gradient(k);
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    gradient.noalias() = 2.0 * (centered.transpose() * residual);
    gradient += (2.0 * ridge) * w;

    // Toward the vertex with the steepest descent...
    Eigen::Index fw_idx = 0;
    gradient.minCoeff(&fw_idx);
    const double grad_dot_w = gradient.dot(w);
    const double fw_gap = grad_dot_w - gradient(fw_idx);

    // ...or away from the worst active vertex.
    Eigen::Index away_idx = -1;
    double away_grad = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k; ++i) {
      if (w(i) > 0.0 && gradient(i) > away_grad) {
        away_grad = gradient(i);
        away_idx = i;
      }
    }
    const double away_gap = away_idx >= 0 ? away_grad - grad_dot_w : 0.0;

    if (fw_gap <= 0.0) {  // first-order optimal over the simplex
      solution.converged = true;
      break;
    }

    const bool use_away = away_gap > fw_gap && away_idx >= 0 && w(away_idx) < 1.0;
    double gap, gamma_max;
    Eigen::VectorXd step_image(n);  // centered * d without a fresh matvec
    if (use_away) {
      gap = away_gap;
      gamma_max = w(away_idx) / (1.0 - w(away_idx));
      step_image = (residual + response) - centered.col(away_idx);
    } else {
      gap = fw_gap;
      gamma_max = 1.0;
      step_image = centered.col(fw_idx) - (residual + response);
    }
    double curvature = step_image.squaredNorm();
    if (use_away) {
      curvature += ridge * (w.squaredNorm() - 2.0 * w(away_idx) + 1.0);
    } else {
      curvature += ridge * (w.squaredNorm() - 2.0 * w(fw_idx) + 1.0);
    }

    double gamma = gamma_max;
    if (curvature > 0.0) {
      gamma = std::min(gamma_max, gap / (2.0 * curvature));
    }
    if (gamma <= 0.0) {
      solution.converged = true;
      break;
    }

    bool drop_step = false;
    if (use_away) {
      drop_step = gamma >= gamma_max;
      w *= (1.0 + gamma);
      w(away_idx) -= gamma;
      if (drop_step || w(away_idx) < 0.0) w(away_idx) = 0.0;
    } else {
      w *= (1.0 - gamma);
      w(fw_idx) += gamma;
    }
    residual += gamma * step_image;

    const double previous = objective;
    objective = residual.squaredNorm() + ridge * w.squaredNorm();
    if (objective > previous) {  // roundoff guard; exact line search never ascends
      objective = previous;
    }
    if ((iter + 1) % kPolishInterval == 0) {
      if (active_set_polish(centered, response, ridge, w, residual, objective)) {
        continue;  // material progress; re-test convergence on the next pass
      }
    }
    if (!drop_step && previous - objective <= options.tol * std::max(previous, 1e-30)) {
      solution.converged = true;
      ++iter;
      break;
    }
  }

  solution.iterations = iter;
  solution.weights = w.cwiseMax(0.0);
  solution.intercept = with_intercept ? target_mean - col_means.dot(solution.weights) : 0.0;
  Eigen::VectorXd fit = design * solution.weights;
  fit.array() += solution.intercept;
  solution.objective_value = (fit - target).squaredNorm() + ridge * solution.weights.squaredNorm();
  return solution;
}

namespace {

// design (pre-periods x donors), target = treated pre outcomes
std::pair<Eigen::MatrixXd, Eigen::VectorXd> unit_weight_problem(const Panel& panel) {
  auto pre = panel.pre_indices();
  auto donors = panel.donor_indices();
  int treated = panel.treated_index();
  Eigen::MatrixXd design(pre.size(), donors.size());
  Eigen::VectorXd target(pre.size());
  for (std::size_t t = 0; t < pre.size(); ++t) {
    target(static_cast<Eigen::Index>(t)) = panel.outcomes(treated, pre[t]);
    for (std::size_t i = 0; i < donors.size(); ++i) {
      design(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          panel.outcomes(donors[i], pre[t]);
    }
  }
  return {design, target};
}

// design (donors x pre-periods), target = donor post means
std::pair<Eigen::MatrixXd, Eigen::VectorXd> time_weight_problem(const Panel& panel) {
  auto pre = panel.pre_indices();
  auto post = panel.post_indices();
  auto donors = panel.donor_indices();
  Eigen::MatrixXd design(donors.size(), pre.size());
  Eigen::VectorXd target(donors.size());
  for (std::size_t i = 0; i < donors.size(); ++i) {
    double post_mean = 0.0;
    for (int j : post) post_mean += panel.outcomes(donors[i], j);
    target(static_cast<Eigen::Index>(i)) = post_mean / static_cast<double>(post.size());
    for (std::size_t t = 0; t < pre.size(); ++t) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          panel.outcomes(donors[i], pre[t]);
    }
  }
  return {design, target};
}

}  // namespace

WeightSolution solve_unit_weights(const Panel& panel, double zeta, const SolverOptions& options) {
  require_valid(panel);
  if (panel.donor_indices().empty()) {
    raise(ErrorCode::InsufficientDonors, "unit weights need at least 1 donor");
  }
  auto [design, target] = unit_weight_problem(panel);
  return solve_simplex_regression(design, target, zeta, /*with_intercept=*/true, options);
}

WeightSolution solve_time_weights(const Panel& panel, const SolverOptions& options) {
  require_valid(panel);
  if (panel.donor_indices().empty()) {
    raise(ErrorCode::InsufficientDonors, "time weights need at least 1 donor");
  }
  auto [design, target] = time_weight_problem(panel);
  double sigma = first_difference_sd(design);
  double zeta_time = 1e-6 * sigma;
  if (zeta_time == 0.0) zeta_time = zeta_floor(design);

  if (design.cols() == 1) {  // single pre-period: the simplex is one point
    WeightSolution solution;
    solution.weights = Eigen::VectorXd::Ones(1);
    solution.zeta = zeta_time;
    solution.intercept = (target - design.col(0)).mean();
    Eigen::VectorXd fit = design.col(0);
    fit.array() += solution.intercept;
    solution.objective_value = (fit - target).squaredNorm() +
                               zeta_time * zeta_time * static_cast<double>(design.rows());
    solution.iterations = 0;
    solution.converged = true;
    return solution;
  }
  return solve_simplex_regression(design, target, zeta_time, /*with_intercept=*/true, options);
}

Eigen::VectorXd emitted_weights(const Eigen::VectorXd& weights) {
  Eigen::VectorXd out = weights;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out(i) < 1e-10) out(i) = 0.0;
  }
  double total = out.sum();
  if (total > 0.0) out /= total;
  return out;
}

void write_weights_csv(std::ostream& out, const std::string& label_header,
                       const std::vector<std::string>& labels, const Eigen::VectorXd& weights) {
  out << csv::escape_field(label_header) << ",weight\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << csv::escape_field(labels[i]) << ','
        << csv::format_double(weights(static_cast<Eigen::Index>(i))) << '\n';
  }
}

std::vector<std::pair<std::string, double>> read_weights_csv(std::istream& in) {
  csv::Table table = csv::read(in);
  if (table.header.size() != 2) {
    raise(ErrorCode::ParseError, "weight CSV must have exactly 2 columns");
  }
  std::vector<std::pair<std::string, double>> weights;
  weights.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    weights.emplace_back(table.rows[r][0],
                         csv::parse_double(table.rows[r][1], "row " + std::to_string(r + 2)));
  }
  return weights;
}

std::string solution_diagnostics_json(const WeightSolution& solution) {
  nlohmann::json j;
  j["zeta"] = solution.zeta;
  j["intercept"] = solution.intercept;
  j["objective_value"] = solution.objective_value;
  j["iterations"] = solution.iterations;
  j["converged"] = solution.converged;
  return j.dump(2);
}

}  // namespace sdid
