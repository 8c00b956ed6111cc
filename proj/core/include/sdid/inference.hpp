#pragma once

#include <string>
#include <vector>

#include "sdid/estimators.hpp"
#include "sdid/panel.hpp"

namespace sdid {

struct PlaceboEntry {
  std::string unit;
  double tau = 0.0;
  double pre_rmspe = 0.0;
  double post_rmspe = 0.0;
  double rmspe_ratio = 0.0;
  bool failed = false;
  std::string failure;
};

// Reference distribution from reassigning treatment to each donor in turn
// (the true treated unit removed). Entries are sorted by unit id.
struct PlaceboDistribution {
  std::vector<PlaceboEntry> entries;
  PlaceboEntry treated_entry;
  double epsilon_ratio = 0.0;   // ratio denominator guard
  double outcome_scale = 0.0;   // max |outcome| of the source panel
  std::vector<std::string> warnings;

  std::vector<const PlaceboEntry*> usable() const;
  int n_usable() const { return static_cast<int>(usable().size()); }
};

// keep_treated_in_pool retains the truly treated unit as a plain donor in
// every placebo panel instead of removing it (the leave-out convention is
// the default).
PlaceboDistribution placebo_distribution(const Panel& panel, const EstimatorConfig& config,
                                         bool keep_treated_in_pool = false);

enum class InferenceMode { gaussian_placebo, permutation };
const char* to_string(InferenceMode mode);
InferenceMode parse_inference_mode(const std::string& name);

struct InferenceResult {
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_gaussian = 1.0;
  double p_permutation = 1.0;
  int n_placebos = 0;
  InferenceMode mode = InferenceMode::gaussian_placebo;
};

// se = sample sd of placebo taus; CI = tau +- 1.959964*se;
// p = 2*(1 - Phi(|tau|/se)). Throws DegenerateDistribution when fewer than
// 2 usable entries or se = 0.
InferenceResult gaussian_placebo_inference(double tau, const PlaceboDistribution& dist);

// Exact rank p-value: share of placebo |tau| at least as extreme as |tau|.
// include_treated adds the treated unit to numerator and denominator.
double permutation_p(double tau, const PlaceboDistribution& dist, bool include_treated);

struct RmspeRatioTest {
  double treated_ratio = 0.0;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  double p = 1.0;
};

RmspeRatioTest rmspe_ratio_test(const PlaceboDistribution& dist);

struct OverfitThresholds {
  double epsilon_abs = 1e-8;      // near-interpolation trigger, times outcome scale
  double ratio_threshold = 1e3;   // RMSPE-ratio trigger
};

struct OverfitReport {
  bool overfit = false;
  double treated_pre_rmspe = 0.0;
  double treated_ratio = 0.0;
  double pre_rmspe_trigger = 0.0;
  double ratio_trigger = 0.0;
  std::string advisory;
};

OverfitReport overfit_diagnostic(const PlaceboDistribution& dist,
                                 const OverfitThresholds& thresholds = {});

// Convenience wrapper the CLI and harnesses use: fills every field the
// requested mode can support; in permutation mode a degenerate spread maps
// to the limiting Gaussian p instead of an error.
InferenceResult run_inference(double tau, const PlaceboDistribution& dist, InferenceMode mode,
                              bool include_treated = false);

double normal_cdf(double z);

std::string inference_to_json(const InferenceResult& result);
void write_placebo_csv(std::ostream& out, const PlaceboDistribution& dist);
std::string placebo_to_json(const PlaceboDistribution& dist);

}  // namespace sdid
