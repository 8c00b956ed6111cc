#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

namespace sdid {

// Per-city covariate table: one row per unit, named numeric columns
// (population, poverty rate, composition shares, ...). Percentage columns
// must lie in [0,100] and population must be positive; both are enforced at
// load time. Immutable after construction.
struct CharacteristicsTable {
  std::vector<std::string> units;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // units x columns

  int unit_row(const std::string& unit) const;       // -1 if absent
  int column_index(const std::string& column) const; // -1 if absent

  // Throws UnknownUnit / UnknownColumn.
  double at(const std::string& unit, const std::string& column) const;

  static bool is_percentage_column(const std::string& column);
};

// CSV format: `unit,<column>...`, one row per unit.
CharacteristicsTable load_characteristics(std::istream& in);
CharacteristicsTable load_characteristics_file(const std::string& path);

}  // namespace sdid
