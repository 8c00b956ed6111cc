#pragma once

#include <cstdint>
#include <string>

#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"
#include "sdid/panel.hpp"

namespace sdid {

// Seedable, splittable 64-bit generator (SplitMix64 core) with Gaussian
// draws via the Box-Muller transform. Deterministic for a fixed seed and
// call order; child streams derived with split() are independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform01();  // [0, 1)
  double normal();     // standard Gaussian
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Factor-model data-generating process:
//   Y_it = unit_i + time_t + sum_k loading_ik * factor_kt + noise_it,
// plus true_tau on the treated post cells. The treated unit is index 0.
struct FactorModelSpec {
  int n_donors = 20;
  int n_pre = 3;
  int n_post = 1;
  int n_factors = 0;
  double factor_loading_scale = 1.0;
  double noise_sd = 1.0;
  double unit_effect_sd = 0.0;
  double time_effect_sd = 0.0;
  double true_tau = 0.0;
  std::uint64_t seed = 0;
};

struct GeneratedPanel {
  Panel panel;
  double true_tau = 0.0;
};

GeneratedPanel generate_panel(const FactorModelSpec& spec);

struct MonteCarloSummary {
  int n_reps = 0;
  double mean_bias = 0.0;
  double rmse = 0.0;
  double coverage_95 = 0.0;             // 95% CI contains true_tau
  double rejection_rate_at_null = 0.0;  // share of reps with p < 0.05
  double overfit_rate = 0.0;
  int n_failures = 0;
};

// Estimates every replicate with the given config and Gaussian placebo
// inference; per-rep seeds fan out from spec.seed.
MonteCarloSummary monte_carlo(const FactorModelSpec& spec, int n_reps,
                              const EstimatorConfig& config);

// Exhaustive simplex grid search at the given step, intercept in closed form
// per grid point. Independent verification oracle for the iterative solver;
// refuses more than 3 columns.
WeightSolution brute_force_weights(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                   double zeta, double step, bool with_intercept = true);

std::string monte_carlo_to_json(const MonteCarloSummary& summary);
void write_monte_carlo_csv(std::ostream& out, const MonteCarloSummary& summary);

}  // namespace sdid
