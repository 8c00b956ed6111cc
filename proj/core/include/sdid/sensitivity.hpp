#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdid/donor_pool.hpp"
#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"

namespace sdid {

// A named donor-pool rule: criteria resolved against the characteristics
// table, or an explicit donor list. An empty spec means "all donors".
struct PoolSpec {
  std::string name;
  std::optional<DonorCriteria> criteria;
  std::optional<std::vector<std::string>> explicit_donors;
};

// Specification grid: the cartesian product of outcome x donor pool x
// pre-period start x covariate toggle, each cell estimated and inferred
// independently.
struct SpecGrid {
  std::vector<std::string> outcomes;                   // keys into the panel set
  std::vector<PoolSpec> donor_pools;
  std::vector<std::optional<int>> pre_period_starts;   // nullopt = full panel
  std::vector<bool> covariate_toggles;
  std::vector<std::string> covariate_columns;          // used when a toggle is on
  EstimatorConfig estimator;
  InferenceMode inference_mode = InferenceMode::gaussian_placebo;
};

struct GridCellResult {
  std::string cell_id;
  std::string outcome;
  std::string pool;
  std::optional<int> pre_period_start;
  bool covariates = false;
  std::optional<EstimateResult> estimate;
  std::optional<InferenceResult> inference;
  bool significant = false;  // p < 0.05, two-tailed
  std::string error;         // nonempty when the cell failed
};

// Runs every cell; failures are recorded in the row and do not stop the
// grid. Output sorted by cell id.
std::vector<GridCellResult> run_spec_grid(const SpecGrid& grid,
                                          const std::map<std::string, Panel>& panels,
                                          const CharacteristicsTable& chars);

// One SDID estimate + inference per outcome panel, flagging p < 0.05.
// The shape of the published birth-composition battery.
std::vector<GridCellResult> composition_checks(const std::map<std::string, Panel>& panels,
                                               const EstimatorConfig& config,
                                               InferenceMode mode);

void write_grid_csv(std::ostream& out, const std::vector<GridCellResult>& results);
std::string grid_to_json(const std::vector<GridCellResult>& results);

}  // namespace sdid
