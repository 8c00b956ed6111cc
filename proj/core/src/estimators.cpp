#include "sdid/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"
#include "sdid/hash.hpp"

namespace sdid {

const char* to_string(Method method) {
  switch (method) {
    case Method::did: return "did";
    case Method::scm: return "scm";
    case Method::sdid: return "sdid";
  }
  return "sdid";
}

Method parse_method(const std::string& name) {
  if (name == "did") return Method::did;
  if (name == "scm") return Method::scm;
  if (name == "sdid") return Method::sdid;
  raise(ErrorCode::ConfigError, "unknown method '" + name + "' (expected did|scm|sdid)");
}

namespace {

std::string fingerprint(const Panel& panel, Method method,
                        const std::optional<double>& zeta_override,
                        const SolverOptions& options) {
  Fnv1a hash;
  for (const auto& u : panel.units) hash.add(u);
  for (int p : panel.periods) hash.add(p);
  for (Eigen::Index i = 0; i < panel.outcomes.size(); ++i) hash.add(panel.outcomes.data()[i]);
  hash.add(panel.treated_unit);
  hash.add(panel.treatment_start);
  hash.add(std::string(to_string(panel.outcome_kind)));
  hash.add(panel.residual_scale ? 1 : 0);
  hash.add(std::string(to_string(method)));
  hash.add(zeta_override ? 1 : 0);
  hash.add(zeta_override.value_or(0.0));
  hash.add(options.tol);
  hash.add(options.max_iter);
  return hash.hex();
}

struct PanelView {
  int treated;
  std::vector<int> donors;
  std::vector<int> pre;
  std::vector<int> post;
};

PanelView make_view(const Panel& panel) {
  require_valid(panel);
  PanelView view{panel.treated_index(), panel.donor_indices(), panel.pre_indices(),
                 panel.post_indices()};
  if (view.donors.empty()) {
    raise(ErrorCode::InsufficientDonors, "estimation needs at least 1 donor");
  }
  return view;
}

// Gap between the treated series and the omega-weighted donor series, one
// value per period.
Eigen::VectorXd gap_series(const Panel& panel, const PanelView& view,
                           const Eigen::VectorXd& omega) {
  Eigen::VectorXd gaps(panel.n_periods());
  for (std::size_t j = 0; j < panel.n_periods(); ++j) {
    double synth = 0.0;
    for (std::size_t i = 0; i < view.donors.size(); ++i) {
      synth += omega(static_cast<Eigen::Index>(i)) *
               panel.outcomes(view.donors[i], static_cast<Eigen::Index>(j));
    }
    gaps(static_cast<Eigen::Index>(j)) =
        panel.outcomes(view.treated, static_cast<Eigen::Index>(j)) - synth;
  }
  return gaps;
}

double rms(const Eigen::VectorXd& gaps, const std::vector<int>& idx, double center) {
  double ss = 0.0;
  for (int j : idx) {
    double g = gaps(j) - center;
    ss += g * g;
  }
  return std::sqrt(ss / static_cast<double>(idx.size()));
}

// pre/post fit error. For did/sdid the gaps are centered at the
// lambda-weighted pre-period gap (the estimator's own baseline); scm uses
// raw gaps, the convention behind the published RMSPE ratios.
void fill_rmspe(EstimateResult& result, const Eigen::VectorXd& gaps, const PanelView& view,
                const Eigen::VectorXd* lambda) {
  double center = 0.0;
  if (lambda != nullptr) {
    for (std::size_t t = 0; t < view.pre.size(); ++t) {
      center += (*lambda)(static_cast<Eigen::Index>(t)) * gaps(view.pre[t]);
    }
  }
  result.pre_rmspe = rms(gaps, view.pre, center);
  result.post_rmspe = rms(gaps, view.post, center);
}

}  // namespace

double sdid_tau_given_weights(const Panel& panel, const Eigen::VectorXd& omega,
                              const Eigen::VectorXd& lambda) {
  PanelView view = make_view(panel);
  if (omega.size() != static_cast<Eigen::Index>(view.donors.size()) ||
      lambda.size() != static_cast<Eigen::Index>(view.pre.size())) {
    raise(ErrorCode::ConfigError, "weight dimensions do not match the panel");
  }
  auto post_mean = [&](int row) {
    double total = 0.0;
    for (int j : view.post) total += panel.outcomes(row, j);
    return total / static_cast<double>(view.post.size());
  };
  auto lambda_pre = [&](int row) {
    double total = 0.0;
    for (std::size_t t = 0; t < view.pre.size(); ++t) {
      total += lambda(static_cast<Eigen::Index>(t)) * panel.outcomes(row, view.pre[t]);
    }
    return total;
  };
  double treated_change = post_mean(view.treated) - lambda_pre(view.treated);
  double donor_change = 0.0;
  for (std::size_t i = 0; i < view.donors.size(); ++i) {
    donor_change += omega(static_cast<Eigen::Index>(i)) *
                    (post_mean(view.donors[i]) - lambda_pre(view.donors[i]));
  }
  return treated_change - donor_change;
}

EstimateResult estimate_did(const Panel& panel) {
  PanelView view = make_view(panel);
  Eigen::VectorXd omega = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(view.donors.size()), 1.0 / static_cast<double>(view.donors.size()));
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(view.pre.size()), 1.0 / static_cast<double>(view.pre.size()));

  EstimateResult result;
  result.method = Method::did;
  result.tau_hat = sdid_tau_given_weights(panel, omega, lambda);
  Eigen::VectorXd gaps = gap_series(panel, view, omega);
  fill_rmspe(result, gaps, view, &lambda);
  result.spec_fingerprint = fingerprint(panel, Method::did, std::nullopt, SolverOptions{});
  return result;
}

EstimateResult estimate_scm(const Panel& panel, const SolverOptions& options) {
  PanelView view = make_view(panel);
  Eigen::MatrixXd design(view.pre.size(), view.donors.size());
  Eigen::VectorXd target(view.pre.size());
  for (std::size_t t = 0; t < view.pre.size(); ++t) {
    target(static_cast<Eigen::Index>(t)) = panel.outcomes(view.treated, view.pre[t]);
    for (std::size_t i = 0; i < view.donors.size(); ++i) {
      design(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          panel.outcomes(view.donors[i], view.pre[t]);
    }
  }
  WeightSolution omega =
      solve_simplex_regression(design, target, /*zeta=*/0.0, /*with_intercept=*/false, options);

  EstimateResult result;
  result.method = Method::scm;
  Eigen::VectorXd gaps = gap_series(panel, view, omega.weights);
  double tau = 0.0;
  for (int j : view.post) tau += gaps(j);
  result.tau_hat = tau / static_cast<double>(view.post.size());
  fill_rmspe(result, gaps, view, nullptr);
  result.unit_weights = std::move(omega);
  result.spec_fingerprint = fingerprint(panel, Method::scm, std::nullopt, options);
  return result;
}

EstimateResult estimate_sdid(const Panel& panel, std::optional<double> zeta_override,
                             const SolverOptions& options) {
  PanelView view = make_view(panel);

  EstimateResult result;
  result.method = Method::sdid;

  double zeta;
  if (zeta_override) {
    zeta = *zeta_override;
  } else if (view.pre.size() >= 2) {
    Eigen::MatrixXd donor_pre(view.donors.size(), view.pre.size());
    for (std::size_t i = 0; i < view.donors.size(); ++i) {
      for (std::size_t t = 0; t < view.pre.size(); ++t) {
        donor_pre(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
            panel.outcomes(view.donors[i], view.pre[t]);
      }
    }
    zeta = compute_zeta(donor_pre, /*n_treated=*/1, static_cast<int>(view.post.size()));
  } else {
    // Degenerate single-pre-period panel: fall back to the cross-sectional
    // spread of donors at that period.
    Eigen::VectorXd cross(view.donors.size());
    for (std::size_t i = 0; i < view.donors.size(); ++i) {
      cross(static_cast<Eigen::Index>(i)) = panel.outcomes(view.donors[i], view.pre[0]);
    }
    double sigma = 0.0;
    if (cross.size() >= 2) {
      double mean = cross.mean();
      sigma = std::sqrt((cross.array() - mean).square().sum() /
                        static_cast<double>(cross.size() - 1));
    }
    zeta = std::pow(static_cast<double>(view.post.size()), 0.25) * sigma;
    if (zeta == 0.0) zeta = zeta_floor(panel.outcomes);
    result.warnings.push_back(
        "single pre-period: lambda forced to (1), zeta from cross-sectional donor spread");
  }

  WeightSolution omega = solve_unit_weights(panel, zeta, options);
  WeightSolution lambda = solve_time_weights(panel, options);

  result.tau_hat = sdid_tau_given_weights(panel, omega.weights, lambda.weights);
  Eigen::VectorXd gaps = gap_series(panel, view, omega.weights);
  fill_rmspe(result, gaps, view, &lambda.weights);
  result.unit_weights = std::move(omega);
  result.time_weights = std::move(lambda);
  result.spec_fingerprint = fingerprint(panel, Method::sdid, zeta_override, options);
  return result;
}

EstimateResult estimate(const Panel& panel, const EstimatorConfig& config) {
  switch (config.method) {
    case Method::did: return estimate_did(panel);
    case Method::scm: return estimate_scm(panel, config.solver);
    case Method::sdid: return estimate_sdid(panel, config.zeta_override, config.solver);
  }
  raise(ErrorCode::ConfigError, "unknown method");
}

ResidualizedPanel residualize_covariates(const Panel& panel, const CharacteristicsTable& chars,
                                         const std::vector<std::string>& columns) {
  require_valid(panel);
  if (columns.empty()) {
    raise(ErrorCode::ConfigError, "residualization needs at least one covariate column");
  }
  for (const auto& column : columns) {
    if (chars.column_index(column) < 0) {
      raise(ErrorCode::UnknownColumn, "covariate column '" + column + "' not in table");
    }
  }
  std::vector<int> char_rows(panel.n_units());
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    int r = chars.unit_row(panel.units[i]);
    if (r < 0) {
      raise(ErrorCode::UnknownUnit,
            "panel unit '" + panel.units[i] + "' missing from characteristics table");
    }
    char_rows[i] = r;
  }

  PanelView view = make_view(panel);
  const auto n_donors = static_cast<Eigen::Index>(view.donors.size());

  // The fit uses control observations over all periods. Covariates are
  // constant within unit, so regressing per-unit mean outcomes on them gives
  // the identical least-squares solution.
  Eigen::VectorXd donor_means(n_donors);
  for (Eigen::Index i = 0; i < n_donors; ++i) {
    donor_means(i) = panel.outcomes.row(view.donors[static_cast<std::size_t>(i)]).mean();
  }

  ResidualizedPanel out;
  Eigen::MatrixXd design = Eigen::MatrixXd::Ones(n_donors, 1);  // intercept
  std::vector<int> kept_columns;
  for (const auto& column : columns) {
    int c = chars.column_index(column);
    Eigen::VectorXd candidate(n_donors);
    for (Eigen::Index i = 0; i < n_donors; ++i) {
      candidate(i) = chars.values(char_rows[view.donors[static_cast<std::size_t>(i)]], c);
    }
    Eigen::VectorXd coeffs = design.colPivHouseholderQr().solve(candidate);
    double rel = (candidate - design * coeffs).norm() / std::max(candidate.norm(), 1e-300);
    if (rel <= 1e-8) {
      out.dropped_columns.push_back(column);
      continue;
    }
    design.conservativeResize(Eigen::NoChange, design.cols() + 1);
    design.col(design.cols() - 1) = candidate;
    kept_columns.push_back(c);
  }

  Eigen::VectorXd beta = design.colPivHouseholderQr().solve(donor_means);

  out.panel = panel;
  out.panel.outcome_kind = OutcomeKind::rate;
  out.panel.residual_scale = true;
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    double fitted = beta(0);
    for (std::size_t p = 0; p < kept_columns.size(); ++p) {
      fitted += beta(static_cast<Eigen::Index>(p) + 1) *
                chars.values(char_rows[i], kept_columns[p]);
    }
    out.panel.outcomes.row(static_cast<Eigen::Index>(i)).array() -= fitted;
  }
  return out;
}

std::string estimate_to_json(const EstimateResult& result) {
  nlohmann::json j;
  j["method"] = to_string(result.method);
  j["tau_hat"] = result.tau_hat;
  j["pre_rmspe"] = result.pre_rmspe;
  j["post_rmspe"] = result.post_rmspe;
  j["spec_fingerprint"] = result.spec_fingerprint;
  if (result.unit_weights) {
    j["unit_weights"] = nlohmann::json::parse(solution_diagnostics_json(*result.unit_weights));
  }
  if (result.time_weights) {
    j["time_weights"] = nlohmann::json::parse(solution_diagnostics_json(*result.time_weights));
  }
  if (!result.warnings.empty()) j["warnings"] = result.warnings;
  return j.dump(2);
}

void write_estimate_csv(std::ostream& out, const EstimateResult& result) {
  out << "method,tau_hat,pre_rmspe,post_rmspe,spec_fingerprint\n";
  out << to_string(result.method) << ',' << csv::format_double(result.tau_hat) << ','
      << csv::format_double(result.pre_rmspe) << ',' << csv::format_double(result.post_rmspe)
      << ',' << result.spec_fingerprint << '\n';
}

}  // namespace sdid
