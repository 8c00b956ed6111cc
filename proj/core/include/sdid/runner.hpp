#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdid/donor_pool.hpp"
#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"
#include "sdid/sensitivity.hpp"
#include "sdid/simgen.hpp"

namespace sdid {

// Command-line flag overrides; flags win over the config file.
struct FlagOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> inference;
};

struct NamedPanelSource {
  std::string csv;
  OutcomeKind kind = OutcomeKind::rate;
};

// One declarative run description (JSON file with nested sections).
// Relative paths resolve against the config file's directory.
struct RunConfig {
  std::string panel_csv;
  PanelSchema schema;
  OutcomeKind panel_kind = OutcomeKind::rate;
  Assignment assignment;
  std::string characteristics_csv;  // optional

  EstimatorConfig estimator;
  InferenceMode inference_mode = InferenceMode::gaussian_placebo;
  bool placebo_keep_treated = false;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  std::optional<DonorCriteria> donor_criteria;
  std::optional<std::vector<std::string>> donor_list;
  std::vector<std::string> covariates;

  // figures
  std::string statewide_csv;  // optional extra trend series (period,value)
  bool render_svg = false;

  // sensitivity inputs
  std::map<std::string, NamedPanelSource> panels;
  std::optional<SpecGrid> grid;
  std::vector<std::string> grid_pool_names;        // config order, for reporting
  std::vector<std::string> composition_outcomes;

  // simulate
  FactorModelSpec sim_spec;
  int sim_reps = 100;
};

RunConfig load_run_config(const std::string& path, const FlagOverrides& overrides = {});

// Batch commands. Each writes its artifacts under config.out_dir and
// returns a process exit code: 0 success, 2 config error, 3 data validation
// error, 4 solver failure. Failures emit a machine-readable JSON record on
// stderr.
int cmd_estimate(const RunConfig& config);
int cmd_placebo(const RunConfig& config);
int cmd_figures(const RunConfig& config);
int cmd_sensitivity(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_validate(const RunConfig& config);

}  // namespace sdid
