#include <benchmark/benchmark.h>

#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"
#include "sdid/simgen.hpp"
#include "sdid/weight_solver.hpp"

namespace {

sdid::Panel panel_for(int n_donors, int n_pre, int n_post, std::uint64_t seed) {
  sdid::FactorModelSpec spec;
  spec.n_donors = n_donors;
  spec.n_pre = n_pre;
  spec.n_post = n_post;
  spec.noise_sd = 1.0;
  spec.unit_effect_sd = 5.0;
  spec.time_effect_sd = 1.0;
  spec.true_tau = -2.0;
  spec.seed = seed;
  return sdid::generate_panel(spec).panel;
}

void unit_weight_problem(const sdid::Panel& panel, Eigen::MatrixXd& design,
                         Eigen::VectorXd& target) {
  auto pre_idx = panel.pre_indices();
  auto donor_idx = panel.donor_indices();
  int treated = panel.treated_index();
  design.resize(pre_idx.size(), donor_idx.size());
  target.resize(pre_idx.size());
  for (std::size_t t = 0; t < pre_idx.size(); ++t) {
    target(t) = panel.outcomes(treated, pre_idx[t]);
    for (std::size_t i = 0; i < donor_idx.size(); ++i) {
      design(t, i) = panel.outcomes(donor_idx[i], pre_idx[t]);
    }
  }
}

void BM_SimplexRegression(benchmark::State& state) {
  sdid::Panel panel = panel_for(static_cast<int>(state.range(0)),
                                static_cast<int>(state.range(1)), 1, 42);
  Eigen::MatrixXd design;
  Eigen::VectorXd target;
  unit_weight_problem(panel, design, target);
  for (auto _ : state) {
    auto solution = sdid::solve_simplex_regression(design, target, 1.0, true);
    benchmark::DoNotOptimize(solution.objective_value);
  }
}
BENCHMARK(BM_SimplexRegression)->Args({21, 3})->Args({63, 3})->Args({21, 5})->Args({63, 10});

void BM_EstimateSdid(benchmark::State& state) {
  sdid::Panel panel = panel_for(static_cast<int>(state.range(0)), 3, 1, 43);
  for (auto _ : state) {
    auto result = sdid::estimate_sdid(panel);
    benchmark::DoNotOptimize(result.tau_hat);
  }
}
BENCHMARK(BM_EstimateSdid)->Arg(21)->Arg(63);

void BM_PlaceboDistribution(benchmark::State& state) {
  sdid::Panel panel = panel_for(static_cast<int>(state.range(0)), 3, 1, 44);
  sdid::EstimatorConfig config;
  config.method = sdid::Method::sdid;
  for (auto _ : state) {
    auto dist = sdid::placebo_distribution(panel, config);
    benchmark::DoNotOptimize(dist.entries.size());
  }
}
BENCHMARK(BM_PlaceboDistribution)->Arg(21)->Arg(63);

void BM_GeneratePanel(benchmark::State& state) {
  sdid::FactorModelSpec spec;
  spec.n_donors = static_cast<int>(state.range(0));
  spec.n_pre = 5;
  spec.n_post = 1;
  spec.n_factors = 2;
  spec.noise_sd = 1.0;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    spec.seed = seed++;
    auto generated = sdid::generate_panel(spec);
    benchmark::DoNotOptimize(generated.panel.outcomes.sum());
  }
}
BENCHMARK(BM_GeneratePanel)->Arg(21)->Arg(200);

void BM_BruteForceOracle(benchmark::State& state) {
  sdid::Panel panel = panel_for(3, 5, 1, 45);
  Eigen::MatrixXd design;
  Eigen::VectorXd target;
  unit_weight_problem(panel, design, target);
  const double step = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto solution = sdid::brute_force_weights(design, target, 0.5, step, true);
    benchmark::DoNotOptimize(solution.objective_value);
  }
}
BENCHMARK(BM_BruteForceOracle)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
