#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sdid/characteristics.hpp"

namespace sdid {

// Donor-pool selection rule. Two mutually exclusive modes:
//   threshold mode — population band + poverty / composition floors;
//   top-n mode     — the n most populous units (pool size counts the treated
//                    unit when it qualifies; it is removed for donor duty).
// Exclusion lists are caller-supplied data in both modes.
struct DonorCriteria {
  double population_min = 0.0;
  double population_max = std::numeric_limits<double>::infinity();
  double poverty_rate_min = 0.0;
  double pct_nh_black_min = 0.0;
  std::set<std::string> exclusions;
  std::optional<int> top_n_by_population;

  bool threshold_mode() const { return !top_n_by_population.has_value(); }
};

// Returns the donor list, sorted lexicographically. Threshold comparisons
// are inclusive on both ends. Errors: EmptyDonorPool, InvalidExclusion,
// UnknownUnit (treated unit absent), ConfigError (both modes configured).
std::vector<std::string> filter_donors(const CharacteristicsTable& chars,
                                       const DonorCriteria& criteria,
                                       const std::string& treated_unit);

struct PoolSummaryRow {
  std::string column;
  double mean = 0.0;
  double median = 0.0;
};

// Unweighted mean and median of every numeric column across the donors.
std::vector<PoolSummaryRow> pool_summary(const CharacteristicsTable& chars,
                                         const std::vector<std::string>& donors);

}  // namespace sdid
