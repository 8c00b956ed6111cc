// Acceptance suite: every release criterion in one binary, one printed
// PASS/FAIL line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sdid/donor_pool.hpp"
#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"
#include "sdid/panel.hpp"
#include "sdid/simgen.hpp"
#include "sdid/weight_solver.hpp"

using namespace sdid;

namespace {

std::string fixture(const std::string& name) {
  return std::string(SDID_FIXTURES_DIR) + "/" + name;
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

Panel make_panel(std::vector<std::string> units, std::vector<int> periods,
                 const std::vector<double>& outcomes, const std::string& treated, int start,
                 bool residual_scale = false) {
  Panel panel;
  panel.units = std::move(units);
  panel.periods = std::move(periods);
  panel.treated_unit = treated;
  panel.treatment_start = start;
  panel.residual_scale = residual_scale;
  panel.outcomes.resize(static_cast<Eigen::Index>(panel.units.size()),
                        static_cast<Eigen::Index>(panel.periods.size()));
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    for (std::size_t j = 0; j < panel.periods.size(); ++j) {
      panel.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          outcomes[i * panel.periods.size() + j];
    }
  }
  return panel;
}

// --- criterion 1: CI <-> p internal consistency --------------------------

Check criterion_ci_p_consistency() {
  Check check;
  struct Row {
    double estimate, ci_low, ci_high, published_p;
  };
  const std::vector<Row> rows = {
      {-7.0, -12.9, -1.0, 0.021}, {-5.8, -10.0, -1.5, 0.008}, {-6.3, -11.7, -0.9, 0.022},
      {-7.9, -12.5, -3.4, 0.001}, {-3.6, -8.2, 1.0, 0.13},    {-3.4, -9.0, 2.3, 0.24},
      {96.7, 35.0, 158.4, 0.002},
  };
  for (const auto& row : rows) {
    double se = (row.ci_high - row.ci_low) / 2.0 / 1.959964;
    double p = 2.0 * (1.0 - normal_cdf(std::abs(row.estimate) / se));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "estimate %.1f: p %.4f vs published %.3f", row.estimate, p,
                  row.published_p);
    check.require(std::abs(p - row.published_p) <= 0.03, buf);
  }
  return check;
}

// --- criterion 2: DID cell arithmetic ------------------------------------

Check criterion_did_cells() {
  Check check;
  Panel panel = make_panel({"Controls", "Flint"}, {2021, 2022, 2023, 2024},
                           {19.5, 19.5, 19.5, 20.6,
                            21.7, 21.7, 21.7, 15.5},
                           "Flint", 2024);
  double tau = estimate_did(panel).tau_hat;
  check.require(std::abs(tau - (-7.3)) <= 0.05,
                "did on published cell means gave " + std::to_string(tau));
  return check;
}

// --- criterion 3: published weight fixtures -------------------------------

Check criterion_weight_fixtures() {
  Check check;
  std::ifstream unit_in(fixture("published_unit_weights.csv"));
  auto unit_weights = read_weights_csv(unit_in);
  check.require(unit_weights.size() == 21, "expected 21 unit weights");
  double unit_sum = 0.0;
  for (const auto& [city, weight] : unit_weights) {
    check.require(weight >= 0.0, "negative unit weight for " + city);
    unit_sum += weight;
  }
  check.require(std::abs(unit_sum - 1.0) <= 5e-4,
                "unit weights sum " + std::to_string(unit_sum));

  std::ifstream time_in(fixture("published_time_weights.csv"));
  auto time_weights = read_weights_csv(time_in);
  check.require(time_weights.size() == 3, "expected 3 time weights");
  double time_sum = 0.0;
  for (const auto& [year, weight] : time_weights) {
    check.require(weight >= 0.0, "negative time weight for " + year);
    time_sum += weight;
  }
  check.require(std::abs(time_sum - 1.0) <= 1e-6,
                "time weights sum " + std::to_string(time_sum));

  const std::vector<double> flint_pre = {22.7, 21.7, 20.8};
  double baseline = 0.0;
  for (std::size_t t = 0; t < time_weights.size(); ++t) {
    baseline += time_weights[t].second * flint_pre[t];
  }
  check.require(std::abs(baseline - 21.75) <= 0.02,
                "lambda-weighted pre baseline " + std::to_string(baseline));
  double change = 15.5 - baseline;
  check.require(std::abs(change - (-6.25)) <= 0.02,
                "treated-side change " + std::to_string(change));
  return check;
}

// --- criterion 4: donor filter vs fixture and oracle ----------------------

std::vector<std::string> oracle_filter(const CharacteristicsTable& chars,
                                       const DonorCriteria& criteria,
                                       const std::string& treated) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < chars.units.size(); ++i) {
    const std::string& unit = chars.units[i];
    if (unit == treated || criteria.exclusions.count(unit)) continue;
    auto value = [&](const char* column) {
      return chars.values(static_cast<Eigen::Index>(i), chars.column_index(column));
    };
    if (value("total_population") < criteria.population_min) continue;
    if (value("total_population") > criteria.population_max) continue;
    if (value("poverty_rate") < criteria.poverty_rate_min) continue;
    if (value("pct_nh_black") < criteria.pct_nh_black_min) continue;
    out.push_back(unit);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Check criterion_donor_filter() {
  Check check;
  const std::vector<std::string> expected = {
      "Albion",        "Benton Harbor",   "Benton Township",   "Bridgeport Township",
      "Buena Vista Township", "Eastpointe", "Ecorse",          "Harper Woods",
      "Highland Park", "Inkster",         "Jackson",           "Lansing",
      "Muskegon",      "Muskegon Heights", "Pontiac",          "River Rouge",
      "Saginaw",       "St. Louis",       "Wayne",             "Ypsilanti",
      "Ypsilanti Township"};
  CharacteristicsTable chars =
      load_characteristics_file(fixture("michigan_characteristics.csv"));
  DonorCriteria criteria;
  criteria.population_min = 5000;
  criteria.population_max = 125000;
  criteria.poverty_rate_min = 15;
  criteria.pct_nh_black_min = 20;
  criteria.exclusions = {"Beecher", "Flint Township", "Kalamazoo"};
  auto donors = filter_donors(chars, criteria, "Flint");
  check.require(donors == expected, "fixture pool does not match the 21 published cities");

  Rng rng(424242);
  for (int trial = 0; trial < 100; ++trial) {
    CharacteristicsTable random;
    random.columns = {"total_population", "poverty_rate", "pct_nh_black"};
    int n = 20 + static_cast<int>(rng.next_u64() % 60);
    random.values.resize(n, 3);
    for (int i = 0; i < n; ++i) {
      random.units.push_back("c" + std::to_string(i));
      random.values(i, 0) = 1000.0 + rng.uniform01() * 200000.0;
      random.values(i, 1) = rng.uniform01() * 50.0;
      random.values(i, 2) = rng.uniform01() * 100.0;
    }
    DonorCriteria rc;
    rc.population_min = rng.uniform01() * 50000;
    rc.population_max = rc.population_min + rng.uniform01() * 150000;
    rc.poverty_rate_min = rng.uniform01() * 30;
    rc.pct_nh_black_min = rng.uniform01() * 40;
    rc.exclusions = {"c1"};
    auto expected_random = oracle_filter(random, rc, "c0");
    if (expected_random.empty()) continue;
    auto actual = filter_donors(random, rc, "c0");
    if (actual != expected_random) {
      check.require(false, "random table " + std::to_string(trial) + " mismatch");
      break;
    }
  }
  return check;
}

// --- criterion 5: solver vs grid oracle -----------------------------------

Check criterion_oracle_equivalence() {
  Check check;
  Rng rng(50505);
  int worst_trial = -1;
  double worst_excess = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    int cols = 1 + static_cast<int>(rng.next_u64() % 3);
    int rows = 2 + static_cast<int>(rng.next_u64() % 4);  // up to 5 pre-periods
    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd target(rows);
    for (int r = 0; r < rows; ++r) {
      target(r) = 10.0 * rng.normal();
      for (int c = 0; c < cols; ++c) design(r, c) = 10.0 * rng.normal();
    }
    double zeta = rng.uniform01() * 3.0;
    bool intercept = (trial % 2) == 0;
    WeightSolution solver = solve_simplex_regression(design, target, zeta, intercept);
    WeightSolution oracle = brute_force_weights(design, target, zeta, 1e-3, intercept);
    double excess = solver.objective_value - oracle.objective_value;
    if (excess > worst_excess) {
      worst_excess = excess;
      worst_trial = trial;
    }
  }
  check.require(worst_excess <= 1e-5, "worst solver-over-oracle excess " +
                                          std::to_string(worst_excess) + " at trial " +
                                          std::to_string(worst_trial));
  return check;
}

// --- criterion 6: estimator identities ------------------------------------

Check criterion_estimator_identities() {
  Check check;
  Rng rng(606060);

  for (int trial = 0; trial < 100; ++trial) {
    FactorModelSpec spec;
    spec.n_donors = 2 + static_cast<int>(rng.next_u64() % 6);
    spec.n_pre = 2 + static_cast<int>(rng.next_u64() % 4);
    spec.n_post = 1 + static_cast<int>(rng.next_u64() % 3);
    spec.noise_sd = 2.0;
    spec.unit_effect_sd = 5.0;
    spec.time_effect_sd = 1.0;
    spec.seed = rng.next_u64();
    Panel panel = generate_panel(spec).panel;
    auto donors = panel.donor_indices();
    auto pre = panel.pre_indices();
    Eigen::VectorXd omega = Eigen::VectorXd::Constant(
        static_cast<Eigen::Index>(donors.size()), 1.0 / static_cast<double>(donors.size()));
    Eigen::VectorXd lambda = Eigen::VectorXd::Constant(
        static_cast<Eigen::Index>(pre.size()), 1.0 / static_cast<double>(pre.size()));
    double forced = sdid_tau_given_weights(panel, omega, lambda);
    double did = estimate_did(panel).tau_hat;
    if (std::abs(forced - did) > 1e-10) {
      check.require(false, "uniform-weight collapse off by " + std::to_string(forced - did));
      break;
    }
  }

  Panel witness = make_panel({"T", "A", "B"}, {1, 2, 3, 4},
                             {10, 11, 12, 14,
                              10, 11, 12, 13,
                              30, 31, 32, 40},
                             "T", 4, true);
  double sdid_base = estimate_sdid(witness).tau_hat;
  double scm_base = estimate_scm(witness).tau_hat;
  Panel shifted = witness;
  const std::vector<double> shifts = {0.0, 25.0, 0.0};
  for (std::size_t i = 0; i < shifted.n_units(); ++i) {
    shifted.outcomes.row(static_cast<Eigen::Index>(i)).array() += shifts[i];
  }
  check.require(std::abs(estimate_sdid(shifted).tau_hat - sdid_base) <= 1e-8,
                "sdid moved under per-unit additive shifts");
  check.require(std::abs(estimate_scm(shifted).tau_hat - scm_base) > 1e-3,
                "scm witness failed to move under per-unit shifts");

  // Dyadic factors keep the solver's floating-point path exactly
  // homogeneous, so any scale-dependent branch or absolute threshold in the
  // pipeline would surface as a deviation here.
  Rng scale_rng(616161);
  for (int trial = 0; trial < 20; ++trial) {
    FactorModelSpec spec;
    spec.n_donors = 4;
    spec.n_pre = 3;
    spec.n_post = 2;
    spec.noise_sd = 1.0;
    spec.unit_effect_sd = 3.0;
    spec.seed = scale_rng.next_u64();
    Panel panel = generate_panel(spec).panel;
    for (double k : {2.0, 0.5, 4.0}) {
      Panel scaled = panel;
      scaled.outcomes *= k;
      for (Method method : {Method::did, Method::scm, Method::sdid}) {
        EstimatorConfig config;
        config.method = method;
        double base = estimate(panel, config).tau_hat;
        double scaled_tau = estimate(scaled, config).tau_hat;
        if (std::abs(scaled_tau - k * base) > 1e-10 * std::max(1.0, std::abs(k * base))) {
          check.require(false, std::string("scale equivariance failed for ") +
                                   to_string(method) + " at k=" + std::to_string(k));
        }
      }
    }
  }
  return check;
}

// --- criterion 7: synthetic recovery --------------------------------------

Check criterion_synthetic_recovery() {
  Check check;
  FactorModelSpec spec;
  spec.n_donors = 20;
  spec.n_pre = 3;
  spec.n_post = 1;
  spec.noise_sd = 0.5;
  spec.unit_effect_sd = 10.0;
  spec.time_effect_sd = 2.0;
  spec.true_tau = -5.0;
  spec.seed = 777;
  EstimatorConfig config;
  config.method = Method::sdid;

  MonteCarloSummary effect = monte_carlo(spec, 500, config);
  check.require(std::abs(effect.mean_bias) <= 0.1,
                "mean bias " + std::to_string(effect.mean_bias));
  check.require(effect.coverage_95 >= 0.90 && effect.coverage_95 <= 0.99,
                "coverage " + std::to_string(effect.coverage_95));
  check.require(effect.n_failures == 0,
                std::to_string(effect.n_failures) + " replications failed");

  FactorModelSpec null_spec = spec;
  null_spec.true_tau = 0.0;
  null_spec.seed = 778;
  MonteCarloSummary null_run = monte_carlo(null_spec, 500, config);
  check.require(null_run.rejection_rate_at_null <= 0.08,
                "null rejection " + std::to_string(null_run.rejection_rate_at_null));
  return check;
}

// --- criterion 8: short-panel overfitting pathology ------------------------

double overfit_flag_rate(int n_donors, int n_pre, int reps, std::uint64_t seed,
                         double* ratio_above_1e3_rate) {
  FactorModelSpec spec;
  spec.n_donors = n_donors;
  spec.n_pre = n_pre;
  spec.n_post = 1;
  spec.noise_sd = 1.0;  // pure noise: no effects, no factors
  spec.true_tau = 0.0;
  int flagged = 0;
  int explosive = 0;
  Rng root(seed);
  for (int rep = 0; rep < reps; ++rep) {
    spec.seed = root.split(static_cast<std::uint64_t>(rep)).next_u64();
    Panel panel = generate_panel(spec).panel;
    EstimateResult scm = estimate_scm(panel);
    PlaceboDistribution dist;
    dist.outcome_scale = panel.max_abs_outcome();
    dist.epsilon_ratio = 1e-12 * (1.0 + dist.outcome_scale);
    dist.treated_entry.unit = panel.treated_unit;
    dist.treated_entry.tau = scm.tau_hat;
    dist.treated_entry.pre_rmspe = scm.pre_rmspe;
    dist.treated_entry.post_rmspe = scm.post_rmspe;
    dist.treated_entry.rmspe_ratio =
        scm.post_rmspe / std::max(scm.pre_rmspe, dist.epsilon_ratio);
    if (dist.treated_entry.rmspe_ratio > 1e3) ++explosive;
    if (overfit_diagnostic(dist).overfit) ++flagged;
  }
  if (ratio_above_1e3_rate != nullptr) {
    *ratio_above_1e3_rate = static_cast<double>(explosive) / reps;
  }
  return static_cast<double>(flagged) / reps;
}

Check criterion_overfitting_reproduction() {
  Check check;
  double explosive_rate = 0.0;
  double flag_rate_large = overfit_flag_rate(63, 3, 200, 880000, &explosive_rate);
  check.require(explosive_rate >= 0.5,
                "3 pre / 63 donors: ratio > 1e3 in only " + std::to_string(explosive_rate));
  check.require(flag_rate_large >= explosive_rate,
                "diagnostic missed explosive ratios");

  // The long-run flag rate for this arm sits near 0.087; 1000 replications
  // keep the Monte Carlo error well away from the 10% line.
  double flag_rate_small = overfit_flag_rate(21, 5, 1000, 990000, nullptr);
  check.require(flag_rate_small < 0.10,
                "5 pre / 21 donors flag rate " + std::to_string(flag_rate_small));
  return check;
}

// --- criterion 9: headline estimate is out of desk-scale reach -------------

Check criterion_headline_statement() {
  Check check;
  std::cout << "  note: the published -7.0 pp estimate needs confidential donor-city yearly\n"
               "  rates and is NOT reproducible here; criteria 1-3 and 5-8 stand in via\n"
               "  internal-consistency and property-based checks.\n";
  return check;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "CI<->p internal consistency", criterion_ci_p_consistency},
      {2, "DID cell arithmetic", criterion_did_cells},
      {3, "published weight fixtures", criterion_weight_fixtures},
      {4, "donor filter vs fixture and oracle", criterion_donor_filter},
      {5, "solver vs simplex grid oracle", criterion_oracle_equivalence},
      {6, "estimator identities", criterion_estimator_identities},
      {7, "synthetic recovery (bias, coverage, null rejection)",
       criterion_synthetic_recovery},
      {8, "short-panel overfitting reproduction", criterion_overfitting_reproduction},
      {9, "headline estimate irreproducibility statement", criterion_headline_statement},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto start = std::chrono::steady_clock::now();
    Check check;
    try {
      check = criterion.run();
    } catch (const std::exception& ex) {
      check.ok = false;
      check.detail = std::string("exception: ") + ex.what();
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    std::printf("%s criterion %d: %s (%lld ms)%s%s\n", check.ok ? "PASS" : "FAIL", criterion.id,
                criterion.name, static_cast<long long>(elapsed), check.ok ? "" : " - ",
                check.detail.c_str());
    if (!check.ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
