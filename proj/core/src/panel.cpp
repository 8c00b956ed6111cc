#include "sdid/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

const char* to_string(OutcomeKind kind) {
  return kind == OutcomeKind::rate ? "rate" : "count";
}

OutcomeKind parse_outcome_kind(const std::string& name) {
  if (name == "rate") return OutcomeKind::rate;
  if (name == "count") return OutcomeKind::count;
  raise(ErrorCode::ConfigError, "unknown outcome kind '" + name + "' (expected rate|count)");
}

int Panel::unit_index(const std::string& unit) const {
  auto it = std::find(units.begin(), units.end(), unit);
  return it == units.end() ? -1 : static_cast<int>(it - units.begin());
}

int Panel::period_index(int period) const {
  auto it = std::find(periods.begin(), periods.end(), period);
  return it == periods.end() ? -1 : static_cast<int>(it - periods.begin());
}

int Panel::treated_index() const {
  int idx = unit_index(treated_unit);
  if (idx < 0) {
    raise(ErrorCode::UnknownUnit, "treated unit '" + treated_unit + "' not in panel");
  }
  return idx;
}

std::vector<int> Panel::pre_indices() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < periods.size(); ++j) {
    if (periods[j] < treatment_start) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> Panel::post_indices() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < periods.size(); ++j) {
    if (periods[j] >= treatment_start) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> Panel::donor_indices() const {
  std::vector<int> out;
  int treated = unit_index(treated_unit);
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (static_cast<int>(i) != treated) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<std::string> Panel::donor_units() const {
  std::vector<std::string> out;
  for (int i : donor_indices()) out.push_back(units[i]);
  return out;
}

double Panel::max_abs_outcome() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < outcomes.size(); ++i) {
    double v = std::abs(outcomes.data()[i]);
    if (std::isfinite(v) && v > m) m = v;
  }
  return m;
}

Panel load_panel(std::istream& in, const PanelSchema& schema, const Assignment& assignment,
                 OutcomeKind kind) {
  csv::Table table = csv::read(in);
  int unit_col = table.require_column(schema.unit);
  int period_col = table.require_column(schema.period);
  int outcome_col = table.column(schema.outcome);
  int num_col = table.column(schema.numerator);
  int den_col = table.column(schema.denominator);
  bool use_ratio = outcome_col < 0;
  if (use_ratio && (num_col < 0 || den_col < 0)) {
    raise(ErrorCode::ParseError,
          "need either an '" + schema.outcome + "' column or '" + schema.numerator + "'/'" +
              schema.denominator + "' columns");
  }

  std::map<std::pair<std::string, int>, double> cells;
  std::set<std::string> unit_set;
  std::set<int> period_set;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string& unit = row[unit_col];
    std::string context = "row " + std::to_string(r + 2);
    int period = static_cast<int>(csv::parse_int(row[period_col], context));
    double outcome;
    if (use_ratio) {
      double num = csv::parse_double(row[num_col], context);
      double den = csv::parse_double(row[den_col], context);
      if (den == 0.0) {
        raise(ErrorCode::DivisionByZero,
              "zero denominator at (" + unit + ", " + std::to_string(period) + ")");
      }
      outcome = 100.0 * num / den;
    } else {
      outcome = csv::parse_double(row[outcome_col], context);
    }
    auto key = std::make_pair(unit, period);
    if (!cells.emplace(key, outcome).second) {
      raise(ErrorCode::DuplicateCell,
            "duplicate cell (" + unit + ", " + std::to_string(period) + ")");
    }
    unit_set.insert(unit);
    period_set.insert(period);
  }

  Panel panel;
  panel.units.assign(unit_set.begin(), unit_set.end());
  panel.periods.assign(period_set.begin(), period_set.end());
  panel.treated_unit = assignment.treated_unit;
  panel.treatment_start = assignment.treatment_start;
  panel.outcome_kind = kind;
  panel.outcomes.resize(static_cast<Eigen::Index>(panel.units.size()),
                        static_cast<Eigen::Index>(panel.periods.size()));
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    for (std::size_t j = 0; j < panel.periods.size(); ++j) {
      auto it = cells.find({panel.units[i], panel.periods[j]});
      if (it == cells.end()) {
        raise(ErrorCode::UnbalancedPanel,
              "missing cell (" + panel.units[i] + ", " + std::to_string(panel.periods[j]) + ")");
      }
      panel.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = it->second;
    }
  }
  if (panel.unit_index(assignment.treated_unit) < 0) {
    raise(ErrorCode::UnknownUnit,
          "treated unit '" + assignment.treated_unit + "' not present in the data");
  }
  return panel;
}

Panel load_panel_file(const std::string& path, const PanelSchema& schema,
                      const Assignment& assignment, OutcomeKind kind) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  return load_panel(in, schema, assignment, kind);
}

void write_panel(std::ostream& out, const Panel& panel) {
  out << "unit,period,outcome\n";
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    for (std::size_t j = 0; j < panel.periods.size(); ++j) {
      out << csv::escape_field(panel.units[i]) << ',' << panel.periods[j] << ','
          << csv::format_double(panel.outcomes(static_cast<Eigen::Index>(i),
                                               static_cast<Eigen::Index>(j)))
          << '\n';
    }
  }
}

ValidationReport validate_panel(const Panel& panel) {
  ValidationReport report;
  auto error = [&report](ErrorCode code, const std::string& unit, std::optional<int> period,
                         const std::string& message) {
    report.errors.push_back({code, unit, period, message});
  };

  if (panel.units.empty() || panel.periods.empty()) {
    error(ErrorCode::UnbalancedPanel, "", std::nullopt, "panel has no units or no periods");
    return report;
  }
  if (panel.outcomes.rows() != static_cast<Eigen::Index>(panel.units.size()) ||
      panel.outcomes.cols() != static_cast<Eigen::Index>(panel.periods.size())) {
    error(ErrorCode::UnbalancedPanel, "", std::nullopt,
          "outcome matrix shape does not match units x periods");
    return report;
  }

  {
    std::set<std::string> seen;
    for (const auto& u : panel.units) {
      if (!seen.insert(u).second) {
        error(ErrorCode::DuplicateUnit, u, std::nullopt, "duplicate unit '" + u + "'");
      }
    }
  }
  for (std::size_t j = 1; j < panel.periods.size(); ++j) {
    if (panel.periods[j] <= panel.periods[j - 1]) {
      error(ErrorCode::DuplicatePeriod, "", panel.periods[j],
            "periods must be strictly ascending");
    }
  }

  if (panel.unit_index(panel.treated_unit) < 0) {
    error(ErrorCode::UnknownUnit, panel.treated_unit, std::nullopt,
          "treated unit not present in panel");
  }
  if (panel.treatment_start <= panel.periods.front()) {
    error(ErrorCode::NoPrePeriod, panel.treated_unit, panel.treatment_start,
          "treatment start must come after the first period");
  }
  if (panel.treatment_start > panel.periods.back()) {
    error(ErrorCode::NoPostPeriod, panel.treated_unit, panel.treatment_start,
          "no period at or after treatment start");
  }

  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    for (std::size_t j = 0; j < panel.periods.size(); ++j) {
      double v = panel.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (std::isnan(v)) {
        error(ErrorCode::UnbalancedPanel, panel.units[i], panel.periods[j], "missing cell");
      } else if (!std::isfinite(v)) {
        error(ErrorCode::NonFiniteOutcome, panel.units[i], panel.periods[j],
              "outcome is not finite");
      } else if (panel.outcome_kind == OutcomeKind::rate && !panel.residual_scale &&
                 (v < 0.0 || v > 100.0)) {
        error(ErrorCode::RateOutOfRange, panel.units[i], panel.periods[j],
              "rate " + csv::format_double(v) + " outside [0,100]");
      } else if (panel.outcome_kind == OutcomeKind::count && v < 0.0) {
        error(ErrorCode::NegativeCount, panel.units[i], panel.periods[j],
              "count " + csv::format_double(v) + " is negative");
      }
    }
  }

  if (report.ok() && panel.pre_indices().size() == 1) {
    report.warnings.push_back({ErrorCode::InsufficientPrePeriods, panel.treated_unit,
                               std::nullopt,
                               "single pre-period: SDID time weights degenerate to (1)"});
  }
  if (report.ok() && panel.donor_indices().empty()) {
    report.warnings.push_back({ErrorCode::InsufficientDonors, panel.treated_unit, std::nullopt,
                               "panel has no donor units"});
  }
  return report;
}

void require_valid(const Panel& panel) {
  ValidationReport report = validate_panel(panel);
  if (!report.ok()) {
    const auto& issue = report.errors.front();
    std::string where = issue.unit;
    if (issue.period) where += "@" + std::to_string(*issue.period);
    raise(issue.code,
          "invalid panel: " + issue.message + (where.empty() ? "" : " [" + where + "]"));
  }
}

PrePostSplit pre_post_split(const Panel& panel) {
  PrePostSplit split;
  for (int period : panel.periods) {
    (period < panel.treatment_start ? split.pre : split.post).push_back(period);
  }
  if (split.post.empty()) {
    raise(ErrorCode::NoPostPeriod, "no period at or after treatment start " +
                                       std::to_string(panel.treatment_start));
  }
  if (split.pre.empty()) {
    raise(ErrorCode::NoPrePeriod, "no period before treatment start " +
                                      std::to_string(panel.treatment_start));
  }
  return split;
}

Panel restrict_periods(const Panel& panel, int first_period) {
  Panel out = panel;
  out.periods.clear();
  std::vector<int> cols;
  for (std::size_t j = 0; j < panel.periods.size(); ++j) {
    if (panel.periods[j] >= first_period) {
      out.periods.push_back(panel.periods[j]);
      cols.push_back(static_cast<int>(j));
    }
  }
  out.outcomes.resize(panel.outcomes.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.outcomes.col(static_cast<Eigen::Index>(j)) = panel.outcomes.col(cols[j]);
  }
  return out;
}

Panel restrict_units(const Panel& panel, const std::vector<std::string>& donors) {
  std::set<std::string> keep(donors.begin(), donors.end());
  keep.insert(panel.treated_unit);
  for (const auto& d : donors) {
    if (panel.unit_index(d) < 0) {
      raise(ErrorCode::UnknownUnit, "donor '" + d + "' not present in panel");
    }
  }
  Panel out = panel;
  out.units.clear();
  std::vector<int> rows;
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    if (keep.count(panel.units[i])) {
      out.units.push_back(panel.units[i]);
      rows.push_back(static_cast<int>(i));
    }
  }
  out.outcomes.resize(static_cast<Eigen::Index>(rows.size()), panel.outcomes.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.outcomes.row(static_cast<Eigen::Index>(i)) = panel.outcomes.row(rows[i]);
  }
  return out;
}

Panel reassign_treated(const Panel& panel, const std::string& pseudo_treated,
                       bool keep_original_as_donor) {
  int pseudo = panel.unit_index(pseudo_treated);
  if (pseudo < 0) {
    raise(ErrorCode::UnknownUnit, "placebo unit '" + pseudo_treated + "' not in panel");
  }
  if (pseudo_treated == panel.treated_unit) {
    raise(ErrorCode::ConfigError, "placebo unit equals the treated unit");
  }
  int treated = panel.unit_index(panel.treated_unit);
  Panel out = panel;
  out.treated_unit = pseudo_treated;
  if (treated >= 0 && !keep_original_as_donor) {
    out.units.clear();
    std::vector<int> rows;
    for (std::size_t i = 0; i < panel.units.size(); ++i) {
      if (static_cast<int>(i) == treated) continue;
      out.units.push_back(panel.units[i]);
      rows.push_back(static_cast<int>(i));
    }
    out.outcomes.resize(static_cast<Eigen::Index>(rows.size()), panel.outcomes.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.outcomes.row(static_cast<Eigen::Index>(i)) = panel.outcomes.row(rows[i]);
    }
  }
  return out;
}

}  // namespace sdid
