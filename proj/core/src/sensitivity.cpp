#include "sdid/sensitivity.hpp"

#include <algorithm>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

namespace {

std::string make_cell_id(const std::string& outcome, const std::string& pool,
                         const std::optional<int>& start, bool covariates) {
  std::string id = "outcome=" + outcome + ";pool=" + pool + ";start=";
  id += start ? std::to_string(*start) : "full";
  id += ";covariates=";
  id += covariates ? "on" : "off";
  return id;
}

double cell_p_value(const InferenceResult& inference, InferenceMode mode) {
  return mode == InferenceMode::gaussian_placebo ? inference.p_gaussian
                                                 : inference.p_permutation;
}

GridCellResult run_cell(const Panel& source, const CharacteristicsTable& chars,
                        const PoolSpec& pool, const std::optional<int>& start, bool covariates,
                        const std::vector<std::string>& covariate_columns,
                        const EstimatorConfig& estimator, InferenceMode mode,
                        GridCellResult cell) {
  try {
    Panel panel = source;
    if (start) panel = restrict_periods(panel, *start);
    if (pool.criteria) {
      auto donors = filter_donors(chars, *pool.criteria, panel.treated_unit);
      // Criteria may admit units the panel does not observe; donor duty
      // requires outcome data, so keep the intersection.
      std::vector<std::string> present;
      for (const auto& d : donors) {
        if (panel.unit_index(d) >= 0) present.push_back(d);
      }
      if (present.empty()) {
        raise(ErrorCode::EmptyDonorPool,
              "no unit from pool '" + pool.name + "' appears in the panel");
      }
      panel = restrict_units(panel, present);
    } else if (pool.explicit_donors) {
      panel = restrict_units(panel, *pool.explicit_donors);
    }
    if (covariates) {
      panel = residualize_covariates(panel, chars, covariate_columns).panel;
    }
    EstimateResult estimate_result = estimate(panel, estimator);
    PlaceboDistribution dist = placebo_distribution(panel, estimator);
    InferenceResult inference = run_inference(estimate_result.tau_hat, dist, mode);
    cell.significant = cell_p_value(inference, mode) < 0.05;
    cell.estimate = std::move(estimate_result);
    cell.inference = inference;
  } catch (const Error& err) {
    cell.error = std::string(to_string(err.code())) + ": " + err.what();
  }
  return cell;
}

}  // namespace

std::vector<GridCellResult> run_spec_grid(const SpecGrid& grid,
                                          const std::map<std::string, Panel>& panels,
                                          const CharacteristicsTable& chars) {
  if (grid.outcomes.empty() || grid.donor_pools.empty() || grid.pre_period_starts.empty() ||
      grid.covariate_toggles.empty()) {
    raise(ErrorCode::ConfigError, "spec grid needs at least one value on every axis");
  }
  std::vector<GridCellResult> results;
  for (const auto& outcome : grid.outcomes) {
    auto it = panels.find(outcome);
    for (const auto& pool : grid.donor_pools) {
      for (const auto& start : grid.pre_period_starts) {
        for (bool covariates : grid.covariate_toggles) {
          GridCellResult cell;
          cell.cell_id = make_cell_id(outcome, pool.name, start, covariates);
          cell.outcome = outcome;
          cell.pool = pool.name;
          cell.pre_period_start = start;
          cell.covariates = covariates;
          if (it == panels.end()) {
            cell.error = "ConfigError: no panel loaded for outcome '" + outcome + "'";
            results.push_back(std::move(cell));
            continue;
          }
          results.push_back(run_cell(it->second, chars, pool, start, covariates,
                                     grid.covariate_columns, grid.estimator,
                                     grid.inference_mode, std::move(cell)));
        }
      }
    }
  }
  std::sort(results.begin(), results.end(),
            [](const GridCellResult& a, const GridCellResult& b) { return a.cell_id < b.cell_id; });
  return results;
}

std::vector<GridCellResult> composition_checks(const std::map<std::string, Panel>& panels,
                                               const EstimatorConfig& config, InferenceMode mode) {
  std::vector<GridCellResult> results;
  for (const auto& [outcome, panel] : panels) {
    GridCellResult cell;
    cell.cell_id = "outcome=" + outcome;
    cell.outcome = outcome;
    cell.pool = "all";
    try {
      EstimateResult estimate_result = estimate(panel, config);
      PlaceboDistribution dist = placebo_distribution(panel, config);
      InferenceResult inference = run_inference(estimate_result.tau_hat, dist, mode);
      cell.significant = cell_p_value(inference, mode) < 0.05;
      cell.estimate = std::move(estimate_result);
      cell.inference = inference;
    } catch (const Error& err) {
      cell.error = std::string(to_string(err.code())) + ": " + err.what();
    }
    results.push_back(std::move(cell));
  }
  std::sort(results.begin(), results.end(),
            [](const GridCellResult& a, const GridCellResult& b) { return a.cell_id < b.cell_id; });
  return results;
}

void write_grid_csv(std::ostream& out, const std::vector<GridCellResult>& results) {
  out << "cell_id,outcome,pool,pre_period_start,covariates,method,tau_hat,se,ci_low,ci_high,"
         "p_gaussian,p_permutation,pre_rmspe,post_rmspe,significant,error\n";
  for (const auto& cell : results) {
    out << csv::escape_field(cell.cell_id) << ',' << csv::escape_field(cell.outcome) << ','
        << csv::escape_field(cell.pool) << ',';
    if (cell.pre_period_start) out << *cell.pre_period_start;
    out << ',' << (cell.covariates ? "on" : "off") << ',';
    if (cell.estimate) {
      const auto& e = *cell.estimate;
      const auto& i = *cell.inference;
      out << to_string(e.method) << ',' << csv::format_double(e.tau_hat) << ','
          << csv::format_double(i.se) << ',' << csv::format_double(i.ci_low) << ','
          << csv::format_double(i.ci_high) << ',' << csv::format_double(i.p_gaussian) << ','
          << csv::format_double(i.p_permutation) << ',' << csv::format_double(e.pre_rmspe) << ','
          << csv::format_double(e.post_rmspe) << ',' << (cell.significant ? "true" : "false");
    } else {
      out << ",,,,,,,,,";
    }
    out << ',' << csv::escape_field(cell.error) << '\n';
  }
}

std::string grid_to_json(const std::vector<GridCellResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& cell : results) {
    nlohmann::json jc;
    jc["cell_id"] = cell.cell_id;
    jc["outcome"] = cell.outcome;
    jc["pool"] = cell.pool;
    if (cell.pre_period_start) jc["pre_period_start"] = *cell.pre_period_start;
    jc["covariates"] = cell.covariates;
    if (cell.estimate) {
      jc["estimate"] = nlohmann::json::parse(estimate_to_json(*cell.estimate));
      jc["inference"] = nlohmann::json::parse(inference_to_json(*cell.inference));
      jc["significant"] = cell.significant;
    }
    if (!cell.error.empty()) jc["error"] = cell.error;
    j.push_back(std::move(jc));
  }
  return j.dump(2);
}

}  // namespace sdid
