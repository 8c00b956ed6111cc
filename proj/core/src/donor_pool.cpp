#include "sdid/donor_pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdid/errors.hpp"

namespace sdid {

namespace {

double column_value(const CharacteristicsTable& chars, int row, const std::string& column) {
  int c = chars.column_index(column);
  if (c < 0) {
    raise(ErrorCode::UnknownColumn,
          "donor criteria need column '" + column + "' in the characteristics table");
  }
  return chars.values(row, c);
}

}  // namespace

std::vector<std::string> filter_donors(const CharacteristicsTable& chars,
                                       const DonorCriteria& criteria,
                                       const std::string& treated_unit) {
  if (chars.unit_row(treated_unit) < 0) {
    raise(ErrorCode::UnknownUnit,
          "treated unit '" + treated_unit + "' not in characteristics table");
  }
  if (criteria.exclusions.count(treated_unit)) {
    raise(ErrorCode::InvalidExclusion, "treated unit '" + treated_unit + "' cannot be excluded");
  }
  if (criteria.population_min > criteria.population_max) {
    raise(ErrorCode::ConfigError, "population_min exceeds population_max");
  }
  if (!criteria.threshold_mode() &&
      (criteria.population_min > 0.0 || std::isfinite(criteria.population_max) ||
       criteria.poverty_rate_min > 0.0 || criteria.pct_nh_black_min > 0.0)) {
    raise(ErrorCode::ConfigError, "top_n_by_population cannot be combined with thresholds");
  }

  std::vector<std::string> donors;
  if (criteria.threshold_mode()) {
    for (std::size_t i = 0; i < chars.units.size(); ++i) {
      const std::string& unit = chars.units[i];
      if (unit == treated_unit || criteria.exclusions.count(unit)) continue;
      int row = static_cast<int>(i);
      double population = column_value(chars, row, "total_population");
      double poverty = column_value(chars, row, "poverty_rate");
      double nh_black = column_value(chars, row, "pct_nh_black");
      if (population < criteria.population_min || population > criteria.population_max) continue;
      if (poverty < criteria.poverty_rate_min) continue;
      if (nh_black < criteria.pct_nh_black_min) continue;
      donors.push_back(unit);
    }
  } else {
    int n = *criteria.top_n_by_population;
    if (n <= 0) raise(ErrorCode::ConfigError, "top_n_by_population must be positive");
    // Pool = n most populous non-excluded units, ties broken by unit id;
    // the treated unit occupies a slot if it ranks, then steps aside.
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t i = 0; i < chars.units.size(); ++i) {
      const std::string& unit = chars.units[i];
      if (criteria.exclusions.count(unit)) continue;
      ranked.emplace_back(column_value(chars, static_cast<int>(i), "total_population"), unit);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    if (static_cast<int>(ranked.size()) > n) ranked.resize(n);
    for (const auto& [pop, unit] : ranked) {
      if (unit != treated_unit) donors.push_back(unit);
    }
  }

  std::sort(donors.begin(), donors.end());
  if (donors.empty()) {
    raise(ErrorCode::EmptyDonorPool, "no unit satisfies the donor criteria");
  }
  return donors;
}

std::vector<PoolSummaryRow> pool_summary(const CharacteristicsTable& chars,
                                         const std::vector<std::string>& donors) {
  if (donors.empty()) raise(ErrorCode::EmptyDonorPool, "pool_summary needs at least one donor");
  std::vector<int> rows;
  rows.reserve(donors.size());
  for (const auto& d : donors) {
    int r = chars.unit_row(d);
    if (r < 0) raise(ErrorCode::UnknownUnit, "donor '" + d + "' not in characteristics table");
    rows.push_back(r);
  }
  std::vector<PoolSummaryRow> summary;
  summary.reserve(chars.columns.size());
  std::vector<double> values(rows.size());
  for (std::size_t c = 0; c < chars.columns.size(); ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      values[i] = chars.values(rows[i], static_cast<Eigen::Index>(c));
      total += values[i];
    }
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    double median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    summary.push_back({chars.columns[c], total / static_cast<double>(n), median});
  }
  return summary;
}

}  // namespace sdid
