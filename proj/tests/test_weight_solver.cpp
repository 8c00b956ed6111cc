#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "sdid/errors.hpp"
#include "sdid/simgen.hpp"
#include "sdid/weight_solver.hpp"
#include "test_support.hpp"

using namespace sdid;
using test_support::make_panel;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 10.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

double simplex_objective(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                         const Eigen::VectorXd& w, double intercept, double zeta) {
  Eigen::VectorXd fit = design * w;
  fit.array() += intercept;
  return (fit - target).squaredNorm() +
         zeta * zeta * static_cast<double>(design.rows()) * w.squaredNorm();
}

}  // namespace

TEST_CASE("first_difference_sd by hand on a 2x3 matrix") {
  Eigen::MatrixXd pre(2, 3);
  pre << 1.0, 3.0, 2.0,
         5.0, 5.5, 7.5;
  // differences: 2, -1, 0.5, 2 -> mean 0.875, sample var = (sum of sq dev)/3
  double mean = (2.0 - 1.0 + 0.5 + 2.0) / 4.0;
  double ss = std::pow(2.0 - mean, 2) + std::pow(-1.0 - mean, 2) + std::pow(0.5 - mean, 2) +
              std::pow(2.0 - mean, 2);
  double expected = std::sqrt(ss / 3.0);
  CHECK(first_difference_sd(pre) == doctest::Approx(expected).epsilon(1e-12));

  SUBCASE("zeta scales by (n_treated*n_post)^(1/4)") {
    CHECK(compute_zeta(pre, 1, 1) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(compute_zeta(pre, 1, 16) == doctest::Approx(2.0 * expected).epsilon(1e-12));
  }
}

TEST_CASE("compute_zeta degenerate cases") {
  SUBCASE("constant matrix floors at 1e-9*(1+max)") {
    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(3, 4, 7.0);
    CHECK(compute_zeta(constant, 1, 1) == doctest::Approx(1e-9 * 8.0).epsilon(1e-12));
  }
  SUBCASE("fewer than 2 pre-periods") {
    Eigen::MatrixXd one_col(3, 1);
    one_col << 1, 2, 3;
    try {
      compute_zeta(one_col, 1, 1);
      FAIL("expected InsufficientPrePeriods");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientPrePeriods);
    }
  }
}

TEST_CASE("perfect single donor: weight one, zero objective") {
  Eigen::MatrixXd design(4, 1);
  design << 3, 1, 4, 1;
  WeightSolution sol = solve_simplex_regression(design, design.col(0), 0.0, false);
  CHECK(sol.weights(0) == doctest::Approx(1.0));
  CHECK(sol.intercept == 0.0);
  CHECK(sol.objective_value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(sol.converged);
}

TEST_CASE("two columns, target equals column A") {
  Rng rng(5);
  Eigen::MatrixXd design = random_matrix(rng, 5, 2);
  WeightSolution sol = solve_simplex_regression(design, design.col(0), 0.0, false);
  CHECK(sol.weights(0) >= 0.999);
  WeightSolution oracle = brute_force_weights(design, design.col(0), 0.0, 1e-4, false);
  CHECK(sol.objective_value <= oracle.objective_value + 1e-5);
}

TEST_CASE("growing zeta pushes weights toward uniform") {
  Rng rng(17);
  Eigen::MatrixXd design = random_matrix(rng, 6, 4);
  Eigen::VectorXd target = random_matrix(rng, 6, 1);
  double sigma = first_difference_sd(design);
  double previous_deviation = std::numeric_limits<double>::infinity();
  for (double scale : {1e2, 1e3, 1e4}) {
    WeightSolution sol = solve_simplex_regression(design, target, scale * sigma, true);
    double deviation = (sol.weights.array() - 0.25).abs().maxCoeff();
    CHECK(deviation < previous_deviation);
    previous_deviation = deviation;
  }
  CHECK(previous_deviation < 1e-3);
}

TEST_CASE("solver beats the grid oracle on random small instances") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    int cols = 1 + static_cast<int>(rng.next_u64() % 3);
    int rows = 2 + static_cast<int>(rng.next_u64() % 4);
    Eigen::MatrixXd design = random_matrix(rng, rows, cols);
    Eigen::VectorXd target = random_matrix(rng, rows, 1);
    double zeta = rng.uniform01() * 2.0;
    bool intercept = (trial % 2) == 0;
    WeightSolution sol = solve_simplex_regression(design, target, zeta, intercept);
    WeightSolution oracle = brute_force_weights(design, target, zeta, 1e-3, intercept);
    CHECK(sol.objective_value <= oracle.objective_value + 1e-5);
  }
}

TEST_CASE("feasibility: weights nonnegative and summing to one") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    int cols = 1 + static_cast<int>(rng.next_u64() % 8);
    int rows = 1 + static_cast<int>(rng.next_u64() % 8);
    Eigen::MatrixXd design = random_matrix(rng, rows, cols);
    Eigen::VectorXd target = random_matrix(rng, rows, 1);
    WeightSolution sol =
        solve_simplex_regression(design, target, rng.uniform01(), (trial % 2) == 0);
    CHECK(sol.weights.minCoeff() >= 0.0);
    CHECK(std::abs(sol.weights.sum() - 1.0) <= 1e-6);
    CHECK(sol.objective_value >= 0.0);
  }
}

TEST_CASE("objective at solution never exceeds uniform weights") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    int cols = 2 + static_cast<int>(rng.next_u64() % 5);
    int rows = 3 + static_cast<int>(rng.next_u64() % 5);
    Eigen::MatrixXd design = random_matrix(rng, rows, cols);
    Eigen::VectorXd target = random_matrix(rng, rows, 1);
    double zeta = rng.uniform01();
    WeightSolution sol = solve_simplex_regression(design, target, zeta, true);
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(cols, 1.0 / cols);
    double c = (target - design * uniform).mean();
    CHECK(sol.objective_value <=
          simplex_objective(design, target, uniform, c, zeta) + 1e-9);
  }
}

TEST_CASE("monotone descent across iteration budgets") {
  Rng rng(41);
  Eigen::MatrixXd design = random_matrix(rng, 6, 5);
  Eigen::VectorXd target = random_matrix(rng, 6, 1);
  double previous = std::numeric_limits<double>::infinity();
  for (int budget : {1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144}) {
    SolverOptions options;
    options.max_iter = budget;
    WeightSolution sol = solve_simplex_regression(design, target, 0.3, true, options);
    CHECK(sol.objective_value <= previous + 1e-9);
    previous = sol.objective_value;
  }
}

TEST_CASE("permutation equivariance") {
  Rng rng(43);
  Eigen::MatrixXd design = random_matrix(rng, 5, 4);
  Eigen::VectorXd target = random_matrix(rng, 5, 1);
  WeightSolution base = solve_simplex_regression(design, target, 0.7, true);
  std::vector<int> perm = {2, 0, 3, 1};
  Eigen::MatrixXd permuted(5, 4);
  for (int c = 0; c < 4; ++c) permuted.col(c) = design.col(perm[c]);
  WeightSolution shuffled = solve_simplex_regression(permuted, target, 0.7, true);
  for (int c = 0; c < 4; ++c) {
    CHECK(shuffled.weights(c) == doctest::Approx(base.weights(perm[c])).epsilon(1e-9));
  }
}

TEST_CASE("intercept absorbs constant target shifts") {
  Rng rng(47);
  Eigen::MatrixXd design = random_matrix(rng, 6, 3);
  Eigen::VectorXd target = random_matrix(rng, 6, 1);
  WeightSolution base = solve_simplex_regression(design, target, 0.5, true);
  Eigen::VectorXd shifted = target.array() + 123.0;
  WeightSolution moved = solve_simplex_regression(design, shifted, 0.5, true);
  CHECK(moved.intercept == doctest::Approx(base.intercept + 123.0).epsilon(1e-9));
  CHECK((moved.weights - base.weights).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("non-finite inputs are rejected") {
  Eigen::MatrixXd design(2, 1);
  design << 1.0, std::numeric_limits<double>::infinity();
  Eigen::VectorXd target(2);
  target << 1.0, 2.0;
  try {
    solve_simplex_regression(design, target, 0.0, false);
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteInput);
  }
}

TEST_CASE("unit weights lock onto an exact-match donor") {
  Panel panel = make_panel({"T", "Match", "Other"}, {1, 2, 3, 4},
                           {10, 12, 11, 9,
                            10, 12, 11, 20,
                            30, 35, 28, 33},
                           "T", 4);
  WeightSolution omega = solve_unit_weights(panel, 0.0);
  CHECK(omega.weights(0) >= 0.999);  // donors ordered (Match, Other)
}

TEST_CASE("unit weights on a 3-donor random panel match the grid oracle") {
  Rng rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    Panel panel = test_support::random_panel(rng, 3, 3, 1);
    double zeta = 0.5 + rng.uniform01();
    WeightSolution omega = solve_unit_weights(panel, zeta);
    auto pre = panel.pre_indices();
    auto donors = panel.donor_indices();
    int treated = panel.treated_index();
    Eigen::MatrixXd design(pre.size(), donors.size());
    Eigen::VectorXd target(pre.size());
    for (std::size_t t = 0; t < pre.size(); ++t) {
      target(t) = panel.outcomes(treated, pre[t]);
      for (std::size_t i = 0; i < donors.size(); ++i) {
        design(t, i) = panel.outcomes(donors[i], pre[t]);
      }
    }
    WeightSolution oracle = brute_force_weights(design, target, zeta, 1e-3, true);
    CHECK(omega.objective_value <= oracle.objective_value + 1e-6);
  }
}

TEST_CASE("unit weights stay on the simplex for the city fixture") {
  Panel panel = load_panel_file(test_support::fixture_path("flint_panel.csv"), PanelSchema{},
                                {"Flint", 2024});
  double zeta = 1.0;
  WeightSolution omega = solve_unit_weights(panel, zeta);
  CHECK(omega.weights.size() == 21);
  CHECK(omega.weights.minCoeff() >= 0.0);
  CHECK(std::abs(omega.weights.sum() - 1.0) <= 1e-6);
}

TEST_CASE("time weights") {
  SUBCASE("single pre-period forces lambda = (1)") {
    Panel panel = make_panel({"T", "A", "B"}, {1, 2}, {10, 9, 11, 12, 13, 14}, "T", 2);
    WeightSolution lambda = solve_time_weights(panel);
    REQUIRE(lambda.weights.size() == 1);
    CHECK(lambda.weights(0) == 1.0);
    CHECK(lambda.converged);
  }
  SUBCASE("post mean equal to the first pre-period concentrates lambda there") {
    // donor post mean == first pre value; later pre columns are noise
    Panel panel = make_panel({"T", "A", "B", "C"}, {1, 2, 3, 4},
                             {5, 6, 7, 8,
                              10, 23, 31, 10,
                              20, 17, 2, 20,
                              15, 29, 8, 15},
                             "T", 4);
    WeightSolution lambda = solve_time_weights(panel);
    CHECK(lambda.weights(0) >= 0.99);
    Eigen::MatrixXd design(3, 3);
    design << 10, 23, 31, 20, 17, 2, 15, 29, 8;
    Eigen::VectorXd target(3);
    target << 10, 20, 15;
    WeightSolution oracle = brute_force_weights(design, target, lambda.zeta, 1e-3, true);
    CHECK(lambda.objective_value <= oracle.objective_value + 1e-5);
  }
  SUBCASE("published time weights satisfy the simplex invariant") {
    std::ifstream in(test_support::fixture_path("published_time_weights.csv"));
    auto rows = read_weights_csv(in);
    REQUIRE(rows.size() == 3);
    double total = 0.0;
    for (const auto& [label, weight] : rows) {
      CHECK(weight >= 0.0);
      total += weight;
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("emitted weights snap dust to zero and renormalize") {
  Eigen::VectorXd w(3);
  w << 1.0 - 1e-12 - 0.25, 0.25, 1e-12;
  Eigen::VectorXd emitted = emitted_weights(w);
  CHECK(emitted(2) == 0.0);
  CHECK(emitted.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weight csv round trip") {
  Eigen::VectorXd w(2);
  w << 0.25, 0.75;
  std::ostringstream out;
  write_weights_csv(out, "unit", {"A", "B"}, w);
  std::istringstream in(out.str());
  auto rows = read_weights_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].first == "A");
  CHECK(rows[0].second == 0.25);
  CHECK(rows[1].second == 0.75);
}
