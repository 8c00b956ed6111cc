#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdid/errors.hpp"

namespace sdid {

enum class OutcomeKind { rate, count };

const char* to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(const std::string& name);

// Balanced unit x period outcome matrix with a single treated unit and a
// single adoption period. Periods are opaque integers kept in ascending
// order; outcomes are percentages in [0,100] for rate panels and
// nonnegative values for count panels. Immutable by convention once built.
struct Panel {
  std::vector<std::string> units;
  std::vector<int> periods;
  Eigen::MatrixXd outcomes;  // units x periods
  std::string treated_unit;
  int treatment_start = 0;
  OutcomeKind outcome_kind = OutcomeKind::rate;
  // Set after covariate residualization (and by the synthetic generator):
  // outcomes live on an unbounded residual scale and the [0,100] rate check
  // does not apply.
  bool residual_scale = false;

  std::size_t n_units() const { return units.size(); }
  std::size_t n_periods() const { return periods.size(); }

  int unit_index(const std::string& unit) const;    // -1 if absent
  int period_index(int period) const;               // -1 if absent
  int treated_index() const;                        // throws UnknownUnit

  std::vector<int> pre_indices() const;   // column indices with period < treatment_start
  std::vector<int> post_indices() const;  // column indices with period >= treatment_start
  std::vector<int> donor_indices() const; // row indices of all non-treated units
  std::vector<std::string> donor_units() const;

  double max_abs_outcome() const;
};

struct PanelSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string numerator = "numerator";
  std::string denominator = "denominator";
};

struct Assignment {
  std::string treated_unit;
  int treatment_start = 0;
};

// Long-format CSV ingestion. Accepts either an outcome column or a
// numerator/denominator pair (outcome = 100 * numerator / denominator).
// The returned panel is canonical: units sorted lexicographically, periods
// ascending. Errors: UnbalancedPanel, DuplicateCell, DivisionByZero,
// UnknownUnit.
Panel load_panel(std::istream& in, const PanelSchema& schema, const Assignment& assignment,
                 OutcomeKind kind = OutcomeKind::rate);
Panel load_panel_file(const std::string& path, const PanelSchema& schema,
                      const Assignment& assignment, OutcomeKind kind = OutcomeKind::rate);

// Long-format emission, rows sorted by (unit, period); inverse of load_panel.
void write_panel(std::ostream& out, const Panel& panel);

struct ValidationIssue {
  ErrorCode code;
  std::string unit;
  std::optional<int> period;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;
  bool ok() const { return errors.empty(); }
};

// Reports every violated Panel invariant; a valid panel yields empty errors.
ValidationReport validate_panel(const Panel& panel);

// Throws the first validation error, if any. Estimators call this to enforce
// their "valid panel" precondition.
void require_valid(const Panel& panel);

struct PrePostSplit {
  std::vector<int> pre;
  std::vector<int> post;
};

PrePostSplit pre_post_split(const Panel& panel);

// Keeps only periods >= first_period (treatment assignment unchanged).
Panel restrict_periods(const Panel& panel, int first_period);

// Keeps the treated unit plus the given donors, in the panel's unit order.
// Unknown donors throw UnknownUnit.
Panel restrict_units(const Panel& panel, const std::vector<std::string>& donors);

// Relabels `pseudo_treated` (a donor) as treated; the placebo panels of the
// inference module are built this way. By default the truly treated unit is
// removed; keep_original_as_donor leaves it in the pool as a plain donor.
Panel reassign_treated(const Panel& panel, const std::string& pseudo_treated,
                       bool keep_original_as_donor = false);

}  // namespace sdid
