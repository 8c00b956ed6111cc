#include "sdid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sdid/csv.hpp"
#include "sdid/errors.hpp"

namespace sdid {

namespace {
constexpr double kZ975 = 1.959964;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::vector<const PlaceboEntry*> PlaceboDistribution::usable() const {
  std::vector<const PlaceboEntry*> out;
  for (const auto& e : entries) {
    if (!e.failed) out.push_back(&e);
  }
  return out;
}

const char* to_string(InferenceMode mode) {
  return mode == InferenceMode::gaussian_placebo ? "gaussian_placebo" : "permutation";
}

InferenceMode parse_inference_mode(const std::string& name) {
  if (name == "gaussian" || name == "gaussian_placebo") return InferenceMode::gaussian_placebo;
  if (name == "permutation") return InferenceMode::permutation;
  raise(ErrorCode::ConfigError,
        "unknown inference mode '" + name + "' (expected gaussian|permutation)");
}

PlaceboDistribution placebo_distribution(const Panel& panel, const EstimatorConfig& config,
                                         bool keep_treated_in_pool) {
  require_valid(panel);
  std::vector<std::string> donors = panel.donor_units();
  if (donors.size() < 2) {
    raise(ErrorCode::InsufficientDonors,
          "placebo inference needs at least 2 donors, have " + std::to_string(donors.size()));
  }
  std::sort(donors.begin(), donors.end());

  PlaceboDistribution dist;
  dist.outcome_scale = panel.max_abs_outcome();
  dist.epsilon_ratio = 1e-12 * (1.0 + dist.outcome_scale);

  auto to_entry = [&dist](const std::string& unit, const EstimateResult& estimate) {
    PlaceboEntry entry;
    entry.unit = unit;
    entry.tau = estimate.tau_hat;
    entry.pre_rmspe = estimate.pre_rmspe;
    entry.post_rmspe = estimate.post_rmspe;
    entry.rmspe_ratio = estimate.post_rmspe / std::max(estimate.pre_rmspe, dist.epsilon_ratio);
    return entry;
  };

  dist.treated_entry = to_entry(panel.treated_unit, estimate(panel, config));

  for (const auto& donor : donors) {
    Panel placebo = reassign_treated(panel, donor, keep_treated_in_pool);
    try {
      dist.entries.push_back(to_entry(donor, estimate(placebo, config)));
    } catch (const Error& err) {
      PlaceboEntry entry;
      entry.unit = donor;
      entry.failed = true;
      entry.failure = err.what();
      dist.entries.push_back(entry);
      dist.warnings.push_back("placebo re-estimation failed for '" + donor +
                              "': " + err.what());
    }
  }
  return dist;
}

InferenceResult gaussian_placebo_inference(double tau, const PlaceboDistribution& dist) {
  auto usable = dist.usable();
  if (usable.size() < 2) {
    raise(ErrorCode::DegenerateDistribution,
          "gaussian placebo inference needs at least 2 usable placebo entries");
  }
  double mean = 0.0;
  for (const auto* e : usable) mean += e->tau;
  mean /= static_cast<double>(usable.size());
  double ss = 0.0;
  for (const auto* e : usable) ss += (e->tau - mean) * (e->tau - mean);
  double se = std::sqrt(ss / static_cast<double>(usable.size() - 1));
  if (se == 0.0) {
    raise(ErrorCode::DegenerateDistribution, "placebo taus have zero spread");
  }

  InferenceResult result;
  result.mode = InferenceMode::gaussian_placebo;
  result.n_placebos = static_cast<int>(usable.size());
  result.se = se;
  result.ci_low = tau - kZ975 * se;
  result.ci_high = tau + kZ975 * se;
  result.p_gaussian = 2.0 * (1.0 - normal_cdf(std::abs(tau) / se));
  result.p_permutation = permutation_p(tau, dist, /*include_treated=*/false);
  return result;
}

double permutation_p(double tau, const PlaceboDistribution& dist, bool include_treated) {
  auto usable = dist.usable();
  if (usable.empty()) {
    raise(ErrorCode::DegenerateDistribution, "permutation p needs at least 1 placebo entry");
  }
  int count = 0;
  for (const auto* e : usable) {
    if (std::abs(e->tau) >= std::abs(tau)) ++count;
  }
  int numerator = count + (include_treated ? 1 : 0);
  int denominator = static_cast<int>(usable.size()) + (include_treated ? 1 : 0);
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

RmspeRatioTest rmspe_ratio_test(const PlaceboDistribution& dist) {
  auto usable = dist.usable();
  if (usable.empty()) {
    raise(ErrorCode::DegenerateDistribution, "rmspe ratio test has no usable placebo entries");
  }
  RmspeRatioTest test;
  test.treated_ratio = dist.treated_entry.rmspe_ratio;
  test.ratio_min = std::numeric_limits<double>::infinity();
  test.ratio_max = -std::numeric_limits<double>::infinity();
  int count = 0;
  for (const auto* e : usable) {
    test.ratio_min = std::min(test.ratio_min, e->rmspe_ratio);
    test.ratio_max = std::max(test.ratio_max, e->rmspe_ratio);
    if (e->rmspe_ratio >= test.treated_ratio) ++count;
  }
  test.p = static_cast<double>(count) / static_cast<double>(usable.size());
  return test;
}

OverfitReport overfit_diagnostic(const PlaceboDistribution& dist,
                                 const OverfitThresholds& thresholds) {
  OverfitReport report;
  report.treated_pre_rmspe = dist.treated_entry.pre_rmspe;
  report.treated_ratio = dist.treated_entry.rmspe_ratio;
  report.pre_rmspe_trigger = thresholds.epsilon_abs * dist.outcome_scale;
  report.ratio_trigger = thresholds.ratio_threshold;
  report.overfit = report.treated_pre_rmspe < report.pre_rmspe_trigger ||
                   report.treated_ratio > report.ratio_trigger;
  if (report.overfit) {
    report.advisory =
        "pre-period fit is close to interpolation; the RMSPE-ratio reference distribution is "
        "unreliable. Extend the pre-intervention period or trim the donor pool to units that "
        "resemble the treated unit.";
  }
  return report;
}

InferenceResult run_inference(double tau, const PlaceboDistribution& dist, InferenceMode mode,
                              bool include_treated) {
  if (mode == InferenceMode::gaussian_placebo) {
    return gaussian_placebo_inference(tau, dist);
  }
  InferenceResult result;
  result.mode = InferenceMode::permutation;
  result.n_placebos = dist.n_usable();
  result.p_permutation = permutation_p(tau, dist, include_treated);
  // Keep the Gaussian summaries when the spread allows them; otherwise use
  // the zero-se limit so invariants (p in [0,1], ci_low <= ci_high) hold.
  try {
    InferenceResult gaussian = gaussian_placebo_inference(tau, dist);
    result.se = gaussian.se;
    result.ci_low = gaussian.ci_low;
    result.ci_high = gaussian.ci_high;
    result.p_gaussian = gaussian.p_gaussian;
  } catch (const Error&) {
    result.se = 0.0;
    result.ci_low = result.ci_high = tau;
    result.p_gaussian = tau == 0.0 ? 1.0 : 0.0;
  }
  return result;
}

std::string inference_to_json(const InferenceResult& result) {
  nlohmann::json j;
  j["mode"] = to_string(result.mode);
  j["se"] = result.se;
  j["ci_low"] = result.ci_low;
  j["ci_high"] = result.ci_high;
  j["p_gaussian"] = result.p_gaussian;
  j["p_permutation"] = result.p_permutation;
  j["n_placebos"] = result.n_placebos;
  return j.dump(2);
}

void write_placebo_csv(std::ostream& out, const PlaceboDistribution& dist) {
  out << "unit,tau,pre_rmspe,post_rmspe,rmspe_ratio,failed\n";
  auto row = [&out](const PlaceboEntry& e) {
    out << csv::escape_field(e.unit) << ',' << csv::format_double(e.tau) << ','
        << csv::format_double(e.pre_rmspe) << ',' << csv::format_double(e.post_rmspe) << ','
        << csv::format_double(e.rmspe_ratio) << ',' << (e.failed ? "true" : "false") << '\n';
  };
  for (const auto& e : dist.entries) row(e);
}

std::string placebo_to_json(const PlaceboDistribution& dist) {
  nlohmann::json j;
  auto entry_json = [](const PlaceboEntry& e) {
    nlohmann::json je;
    je["unit"] = e.unit;
    je["tau"] = e.tau;
    je["pre_rmspe"] = e.pre_rmspe;
    je["post_rmspe"] = e.post_rmspe;
    je["rmspe_ratio"] = e.rmspe_ratio;
    if (e.failed) je["failure"] = e.failure;
    return je;
  };
  j["treated"] = entry_json(dist.treated_entry);
  j["entries"] = nlohmann::json::array();
  for (const auto& e : dist.entries) j["entries"].push_back(entry_json(e));
  if (!dist.warnings.empty()) j["warnings"] = dist.warnings;
  return j.dump(2);
}

}  // namespace sdid
