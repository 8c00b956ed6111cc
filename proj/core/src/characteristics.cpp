#include "sdid/characteristics.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

int CharacteristicsTable::unit_row(const std::string& unit) const {
  auto it = std::find(units.begin(), units.end(), unit);
  return it == units.end() ? -1 : static_cast<int>(it - units.begin());
}

int CharacteristicsTable::column_index(const std::string& column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

double CharacteristicsTable::at(const std::string& unit, const std::string& column) const {
  int r = unit_row(unit);
  if (r < 0) raise(ErrorCode::UnknownUnit, "unit '" + unit + "' not in characteristics table");
  int c = column_index(column);
  if (c < 0) raise(ErrorCode::UnknownColumn, "column '" + column + "' not in characteristics table");
  return values(r, c);
}

bool CharacteristicsTable::is_percentage_column(const std::string& column) {
  return column == "poverty_rate" || column.rfind("pct_", 0) == 0;
}

CharacteristicsTable load_characteristics(std::istream& in) {
  csv::Table table = csv::read(in);
  int unit_col = table.require_column("unit");
  CharacteristicsTable chars;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) != unit_col) chars.columns.push_back(table.header[c]);
  }
  chars.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(chars.columns.size()));
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string& unit = row[unit_col];
    if (!seen.insert(unit).second) {
      raise(ErrorCode::DuplicateUnit, "duplicate unit '" + unit + "' in characteristics table");
    }
    chars.units.push_back(unit);
    Eigen::Index cc = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (static_cast<int>(c) == unit_col) continue;
      double v = csv::parse_double(row[c], "unit " + unit + ", column " + table.header[c]);
      chars.values(static_cast<Eigen::Index>(r), cc++) = v;
    }
  }
  for (std::size_t c = 0; c < chars.columns.size(); ++c) {
    const std::string& name = chars.columns[c];
    bool pct = CharacteristicsTable::is_percentage_column(name);
    bool pop = name == "total_population";
    if (!pct && !pop) continue;
    for (std::size_t r = 0; r < chars.units.size(); ++r) {
      double v = chars.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (pct && (v < 0.0 || v > 100.0)) {
        raise(ErrorCode::RateOutOfRange, "unit '" + chars.units[r] + "': " + name + " = " +
                                             csv::format_double(v) + " outside [0,100]");
      }
      if (pop && v <= 0.0) {
        raise(ErrorCode::NonPositivePopulation,
              "unit '" + chars.units[r] + "': total_population must be positive");
      }
    }
  }
  return chars;
}

CharacteristicsTable load_characteristics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  return load_characteristics(in);
}

}  // namespace sdid
