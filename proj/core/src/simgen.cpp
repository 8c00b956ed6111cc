#include "sdid/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

Rng Rng::split(std::uint64_t stream) const {
  std::uint64_t s = state_ ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  // One mixing round decorrelates the child from the parent state.
  return Rng(splitmix64(s));
}

GeneratedPanel generate_panel(const FactorModelSpec& spec) {
  if (spec.n_donors < 1 || spec.n_pre < 1 || spec.n_post < 1 || spec.n_factors < 0) {
    raise(ErrorCode::ConfigError, "factor model counts must be at least 1 (factors >= 0)");
  }
  if (spec.noise_sd < 0.0 || spec.unit_effect_sd < 0.0 || spec.time_effect_sd < 0.0) {
    raise(ErrorCode::ConfigError, "standard deviations must be nonnegative");
  }

  const int n_units = spec.n_donors + 1;
  const int n_periods = spec.n_pre + spec.n_post;
  Rng rng(spec.seed);

  Eigen::VectorXd unit_effect(n_units);
  for (int i = 0; i < n_units; ++i) unit_effect(i) = spec.unit_effect_sd * rng.normal();
  Eigen::VectorXd time_effect(n_periods);
  for (int t = 0; t < n_periods; ++t) time_effect(t) = spec.time_effect_sd * rng.normal();

  Eigen::MatrixXd loadings(n_units, spec.n_factors);
  Eigen::MatrixXd factors(spec.n_factors, n_periods);
  for (int i = 0; i < n_units; ++i) {
    for (int k = 0; k < spec.n_factors; ++k) {
      loadings(i, k) = spec.factor_loading_scale * rng.normal();
    }
  }
  for (int k = 0; k < spec.n_factors; ++k) {
    for (int t = 0; t < n_periods; ++t) factors(k, t) = rng.normal();
  }

  Panel panel;
  panel.units.reserve(n_units);
  for (int i = 0; i < n_units; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "u%03d", i);
    panel.units.emplace_back(name);
  }
  panel.periods.resize(n_periods);
  for (int t = 0; t < n_periods; ++t) panel.periods[t] = t + 1;
  panel.treated_unit = panel.units.front();
  panel.treatment_start = spec.n_pre + 1;
  panel.outcome_kind = OutcomeKind::rate;
  panel.residual_scale = true;  // unbounded synthetic scale

  panel.outcomes.resize(n_units, n_periods);
  for (int i = 0; i < n_units; ++i) {
    for (int t = 0; t < n_periods; ++t) {
      double value = unit_effect(i) + time_effect(t);
      for (int k = 0; k < spec.n_factors; ++k) value += loadings(i, k) * factors(k, t);
      value += spec.noise_sd * rng.normal();
      if (i == 0 && t >= spec.n_pre) value += spec.true_tau;
      panel.outcomes(i, t) = value;
    }
  }
  return {panel, spec.true_tau};
}

MonteCarloSummary monte_carlo(const FactorModelSpec& spec, int n_reps,
                              const EstimatorConfig& config) {
  if (n_reps < 1) raise(ErrorCode::ConfigError, "n_reps must be at least 1");

  MonteCarloSummary summary;
  summary.n_reps = n_reps;

  Rng root(spec.seed);
  double bias_sum = 0.0;
  double bias_sq_sum = 0.0;
  int covered = 0;
  int rejected = 0;
  int overfit = 0;
  int ok = 0;

  for (int rep = 0; rep < n_reps; ++rep) {
    FactorModelSpec rep_spec = spec;
    rep_spec.seed = root.split(static_cast<std::uint64_t>(rep)).next_u64();
    try {
      GeneratedPanel generated = generate_panel(rep_spec);
      EstimateResult result = estimate(generated.panel, config);
      PlaceboDistribution dist = placebo_distribution(generated.panel, config);
      InferenceResult inference =
          gaussian_placebo_inference(result.tau_hat, dist);

      double bias = result.tau_hat - generated.true_tau;
      bias_sum += bias;
      bias_sq_sum += bias * bias;
      if (inference.ci_low <= generated.true_tau && generated.true_tau <= inference.ci_high) {
        ++covered;
      }
      if (inference.p_gaussian < 0.05) ++rejected;
      if (overfit_diagnostic(dist).overfit) ++overfit;
      ++ok;
    } catch (const Error&) {
      ++summary.n_failures;
    }
  }

  if (ok > 0) {
    summary.mean_bias = bias_sum / static_cast<double>(ok);
    summary.rmse = std::sqrt(bias_sq_sum / static_cast<double>(ok));
    summary.coverage_95 = static_cast<double>(covered) / static_cast<double>(ok);
    summary.rejection_rate_at_null = static_cast<double>(rejected) / static_cast<double>(ok);
    summary.overfit_rate = static_cast<double>(overfit) / static_cast<double>(ok);
  }
  return summary;
}

WeightSolution brute_force_weights(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                   double zeta, double step, bool with_intercept) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (k > 3) {
    raise(ErrorCode::TooLargeForOracle, "grid oracle handles at most 3 columns");
  }
  if (k < 1 || n < 1 || n != target.size()) {
    raise(ErrorCode::ConfigError, "design needs >=1 column and rows matching the target");
  }
  if (step <= 0.0 || step > 1.0) {
    raise(ErrorCode::ConfigError, "grid step must lie in (0, 1]");
  }

  const double ridge = zeta * zeta * static_cast<double>(n);
  const int divisions = std::max(1, static_cast<int>(std::lround(1.0 / step)));

  // Closed-form intercept per grid point == evaluating on centered data.
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

  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_w = Eigen::VectorXd::Zero(k);
  long evaluated = 0;
  Eigen::VectorXd w(k);
  Eigen::VectorXd fit(n);

  auto consider = [&](const Eigen::VectorXd& candidate) {
    fit.noalias() = centered * candidate;
    double objective = (fit - response).squaredNorm() + ridge * candidate.squaredNorm();
    ++evaluated;
    if (objective < best) {
      best = objective;
      best_w = candidate;
    }
  };

  if (k == 1) {
    w << 1.0;
    consider(w);
  } else if (k == 2) {
    for (int i = 0; i <= divisions; ++i) {
      double w0 = static_cast<double>(i) / divisions;
      w << w0, 1.0 - w0;
      consider(w);
    }
  } else {
    for (int i = 0; i <= divisions; ++i) {
      for (int j = 0; j <= divisions - i; ++j) {
        double w0 = static_cast<double>(i) / divisions;
        double w1 = static_cast<double>(j) / divisions;
        w << w0, w1, 1.0 - w0 - w1;
        consider(w);
      }
    }
  }

  WeightSolution solution;
  solution.weights = best_w;
  solution.zeta = zeta;
  solution.intercept = with_intercept ? target_mean - col_means.dot(best_w) : 0.0;
  solution.objective_value = best;
  solution.iterations =
      static_cast<int>(std::min<long>(evaluated, std::numeric_limits<int>::max()));
  solution.converged = true;
  return solution;
}

std::string monte_carlo_to_json(const MonteCarloSummary& summary) {
  nlohmann::json j;
  j["n_reps"] = summary.n_reps;
  j["mean_bias"] = summary.mean_bias;
  j["rmse"] = summary.rmse;
  j["coverage_95"] = summary.coverage_95;
  j["rejection_rate_at_null"] = summary.rejection_rate_at_null;
  j["overfit_rate"] = summary.overfit_rate;
  j["n_failures"] = summary.n_failures;
  return j.dump(2);
}

void write_monte_carlo_csv(std::ostream& out, const MonteCarloSummary& summary) {
  out << "n_reps,mean_bias,rmse,coverage_95,rejection_rate_at_null,overfit_rate,n_failures\n";
  out << summary.n_reps << ',' << csv::format_double(summary.mean_bias) << ','
      << csv::format_double(summary.rmse) << ',' << csv::format_double(summary.coverage_95) << ','
      << csv::format_double(summary.rejection_rate_at_null) << ','
      << csv::format_double(summary.overfit_rate) << ',' << summary.n_failures << '\n';
}

}  // namespace sdid
