#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdid/characteristics.hpp"
#include "sdid/panel.hpp"
#include "sdid/weight_solver.hpp"

namespace sdid {

enum class Method { did, scm, sdid };

const char* to_string(Method method);
Method parse_method(const std::string& name);

struct EstimateResult {
  double tau_hat = 0.0;
  Method method = Method::sdid;
  std::optional<WeightSolution> unit_weights;  // omega (scm, sdid)
  std::optional<WeightSolution> time_weights;  // lambda (sdid)
  double pre_rmspe = 0.0;
  double post_rmspe = 0.0;
  std::string spec_fingerprint;
  std::vector<std::string> warnings;
};

struct EstimatorConfig {
  Method method = Method::sdid;
  std::optional<double> zeta_override;
  SolverOptions solver;
};

// Classic four-cell comparison: change in the treated unit minus the change
// in the unweighted donor average.
EstimateResult estimate_did(const Panel& panel);

// Original synthetic control: intercept-free simplex fit of the treated
// pre-period series, zero regularization; tau is the mean post-period gap.
EstimateResult estimate_scm(const Panel& panel, const SolverOptions& options = {});

// Synthetic difference-in-differences: unit weights omega and time weights
// lambda; tau = (treated post mean - lambda-weighted treated pre) minus the
// omega-weighted donor analogue.
EstimateResult estimate_sdid(const Panel& panel,
                             std::optional<double> zeta_override = std::nullopt,
                             const SolverOptions& options = {});

EstimateResult estimate(const Panel& panel, const EstimatorConfig& config);

// The SDID contrast at externally supplied weights. Plugging in uniform
// omega and lambda reproduces estimate_did exactly.
double sdid_tau_given_weights(const Panel& panel, const Eigen::VectorXd& omega,
                              const Eigen::VectorXd& lambda);

struct ResidualizedPanel {
  Panel panel;
  std::vector<std::string> dropped_columns;  // collinear covariates removed
};

// Projects outcomes on unit covariates (control observations only, all
// periods) and subtracts the fitted values everywhere. The returned panel is
// on the residual scale.
ResidualizedPanel residualize_covariates(const Panel& panel, const CharacteristicsTable& chars,
                                         const std::vector<std::string>& columns);

std::string estimate_to_json(const EstimateResult& result);
// Flat row: method,tau_hat,pre_rmspe,post_rmspe,fingerprint
void write_estimate_csv(std::ostream& out, const EstimateResult& result);

}  // namespace sdid
