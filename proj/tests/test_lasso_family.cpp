#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "pathwise/lasso_family.hpp"
#include "pathwise/oracle.hpp"

using namespace pathwise;
using namespace pathwise::lasso;
using namespace testing_support;

namespace {

DesignMatrix orthogonal_design(int n, int p) {
  Matrix raw = Matrix::Zero(n, p);
  for (int j = 0; j < p; ++j) {
    raw(2 * j, j) = 1.0;
    raw(2 * j + 1, j) = -1.0;
  }
  return standardize(raw);
}

SeparableProblem random_problem(std::mt19937_64& rng, int n, int p, Penalty penalty,
                                double rho = 0.2) {
  SeparableProblem problem;
  problem.X = standardize(random_matrix(rng, n, p, rho));
  problem.y = random_vector(rng, n);
  problem.penalty = std::move(penalty);
  return problem;
}

}  // namespace

TEST_CASE("lasso with one predictor soft-thresholds the LS coefficient", "[lasso_family]") {
  std::mt19937_64 rng(11);
  const DesignMatrix X = standardize(random_matrix(rng, 15, 1));
  const Vector y = random_vector(rng, 15);
  const double ls = X.values.col(0).dot(y);
  for (double lambda : {0.05, 0.3, 2.0}) {
    const FitResult fit =
        lasso_cd({X, y, Lasso{lambda}}, Vector::Zero(1), 1e-12);
    CHECK(fit.converged);
    CHECK(fit.coefficients[0] == Catch::Approx(soft_threshold(ls, lambda)).margin(1e-10));
  }
}

TEST_CASE("orthogonal design: lasso soft-thresholds each univariate fit", "[lasso_family]") {
  const DesignMatrix X = orthogonal_design(8, 3);
  std::mt19937_64 rng(12);
  const Vector y = random_vector(rng, 8);
  const double lambda = 0.2;
  const FitResult fit = lasso_cd({X, y, Lasso{lambda}}, Vector::Zero(3), 1e-12);
  for (int j = 0; j < 3; ++j)
    CHECK(fit.coefficients[j] ==
          Catch::Approx(soft_threshold(X.values.col(j).dot(y), lambda)).margin(1e-10));
}

TEST_CASE("lasso matches the proximal reference and is certified", "[lasso_family]") {
  std::mt19937_64 rng(13);
  const SeparableProblem problem = random_problem(rng, 20, 8, Lasso{0.5});
  const FitResult fit = lasso_cd(problem, Vector::Zero(8), 1e-10);
  const auto ref = oracle::proximal_reference(problem, {20000});
  CHECK(std::abs(fit.objective - ref.objective) < 1e-6);
  CHECK(oracle::kkt_check_separable(problem, fit.coefficients).feasible);

  // Duality-style bound at convergence.
  const Vector r = problem.y - problem.X.values * fit.coefficients;
  CHECK((problem.X.values.transpose() * r).cwiseAbs().maxCoeff() <= 0.5 + 1e-6);
}

TEST_CASE("lasso input checking", "[lasso_family]") {
  std::mt19937_64 rng(14);
  DesignMatrix X;
  X.values = random_matrix(rng, 10, 3);  // raw, not standardized
  X.n = 10;
  X.p = 3;
  X.column_means = Vector::Zero(3);
  X.column_scales = Vector::Ones(3);
  const Vector y = random_vector(rng, 10);
  CHECK_THROWS_AS(lasso_cd({X, y, Lasso{0.1}}, Vector::Zero(3)), NotStandardizedError);

  const DesignMatrix Xs = standardize(random_matrix(rng, 4, 6));
  CHECK_THROWS_AS(lasso_cd({Xs, random_vector(rng, 4), Lasso{0.0}}, Vector::Zero(6)),
                  RankDeficientError);
}

TEST_CASE("elastic net reduces to lasso at lambda2 = 0", "[lasso_family]") {
  std::mt19937_64 rng(15);
  const SeparableProblem lp = random_problem(rng, 18, 6, Lasso{0.4});
  const SeparableProblem ep{lp.X, lp.y, ElasticNet{0.4, 0.0}};
  const FitResult a = lasso_cd(lp, Vector::Zero(6), 1e-11);
  const FitResult b = elastic_net_cd(ep, Vector::Zero(6), 1e-11);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("elastic net single-predictor closed form", "[lasso_family]") {
  std::mt19937_64 rng(16);
  const DesignMatrix X = standardize(random_matrix(rng, 12, 1));
  const Vector y = random_vector(rng, 12);
  const double ls = X.values.col(0).dot(y);
  const double l1 = 0.3, l2 = 0.7;
  const FitResult fit = elastic_net_cd({X, y, ElasticNet{l1, l2}}, Vector::Zero(1), 1e-12);
  CHECK(fit.coefficients[0] ==
        Catch::Approx(soft_threshold(ls, l1) / (1.0 + l2)).margin(1e-10));
}

TEST_CASE("elastic net matches the proximal reference", "[lasso_family]") {
  std::mt19937_64 rng(17);
  const SeparableProblem problem = random_problem(rng, 20, 8, ElasticNet{0.3, 0.8});
  const FitResult fit = elastic_net_cd(problem, Vector::Zero(8), 1e-10);
  const auto ref = oracle::proximal_reference(problem, {20000});
  CHECK(std::abs(fit.objective - ref.objective) < 1e-6);
  CHECK(oracle::kkt_check_separable(problem, fit.coefficients).feasible);
}

TEST_CASE("garotte recovers least squares at lambda 0 on orthogonal designs",
          "[lasso_family]") {
  const DesignMatrix X = orthogonal_design(10, 4);
  std::mt19937_64 rng(18);
  Vector beta_true(4);
  beta_true << 2.0, -1.0, 0.5, 3.0;
  const Vector y = X.values * beta_true + 0.01 * random_vector(rng, 10);
  const FitResult fit = garotte_cd({X, y, Garotte{0.0, std::nullopt}}, Vector::Ones(4), 1e-12);
  for (int j = 0; j < 4; ++j) CHECK(fit.coefficients[j] == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("garotte kills all coefficients once lambda dominates", "[lasso_family]") {
  std::mt19937_64 rng(19);
  const DesignMatrix X = standardize(random_matrix(rng, 25, 4));
  const Vector y = random_vector(rng, 25);
  const Vector bls = Eigen::ColPivHouseholderQR<Matrix>(X.values).solve(y);
  const double lambda = bls.cwiseAbs2().maxCoeff() + 1.0;
  const FitResult fit =
      garotte_cd({X, y, Garotte{lambda, std::nullopt}}, Vector::Ones(4), 1e-12);
  CHECK(fit.coefficients.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("garotte matches the projected proximal reference", "[lasso_family]") {
  std::mt19937_64 rng(20);
  SeparableProblem problem = random_problem(rng, 30, 5, Garotte{0.15, std::nullopt});
  const FitResult fit = garotte_cd(problem, Vector::Ones(5), 1e-11);
  std::get<Garotte>(problem.penalty).beta_ls =
      Eigen::ColPivHouseholderQR<Matrix>(problem.X.values).solve(problem.y);
  const auto ref = oracle::proximal_reference(problem, {30000});
  CHECK(std::abs(fit.objective - ref.objective) < 1e-6);
  CHECK((fit.coefficients.array() >= 0.0).all());
  CHECK(oracle::kkt_check_nonneg_garotte(problem, fit.coefficients).feasible);
}

TEST_CASE("LAD with an all-ones predictor returns the median", "[lasso_family]") {
  DesignMatrix X;
  X.values = Matrix::Ones(9, 1);
  X.n = 9;
  X.p = 1;
  X.column_means = Vector::Zero(1);
  X.column_scales = Vector::Ones(1);
  Vector y(9);
  y << 5, 1, 4, 2, 8, 3, 9, 0, 7;
  const FitResult fit = lad_cd({X, y, Lad{0.0}}, Vector::Zero(1), 1e-12);
  // Intercept plus the coefficient on the ones column together give the
  // median; the split between them is not identified, their sum is.
  CHECK(fit.intercept + fit.coefficients[0] == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("LAD shrugs off a gross outlier (grid-scan oracle)", "[lasso_family]") {
  std::mt19937_64 rng(21);
  const Matrix raw = random_matrix(rng, 9, 1);
  DesignMatrix X;
  X.values = raw;
  X.n = 9;
  X.p = 1;
  X.column_means = Vector::Zero(1);
  X.column_scales = Vector::Ones(1);
  Vector y = 2.0 * raw.col(0);
  y[4] += 40.0;  // gross outlier
  const FitResult fit = lad_cd({X, y, Lad{0.0}}, Vector::Zero(1), 1e-12);
  Vector arg;
  lad_grid_scan_p1(raw, y, 0.0, -4.0, 4.0, 0.01, &arg);
  CHECK(fit.coefficients[0] == Catch::Approx(arg[1]).margin(0.011));
  const double my_obj = lad_objective(raw, y, fit.coefficients, fit.intercept, 0.0);
  const double enum_obj = lad_enumeration_objective(raw, y, 0.0);
  CHECK(my_obj <= enum_obj + 1e-8);
}

TEST_CASE("LAD objective is nonincreasing sweep by sweep", "[lasso_family]") {
  std::mt19937_64 rng(22);
  const Matrix raw = random_matrix(rng, 15, 3);
  DesignMatrix X;
  X.values = raw;
  X.n = 15;
  X.p = 3;
  X.column_means = Vector::Zero(3);
  X.column_scales = Vector::Ones(3);
  const Vector y = random_vector(rng, 15);
  double prev = std::numeric_limits<double>::infinity();
  for (int sweeps = 1; sweeps <= 6; ++sweeps) {
    const FitResult fit = lad_cd({X, y, Lad{0.0}}, Vector::Zero(3), 1e-14, sweeps);
    CHECK(fit.objective <= prev + 1e-12);
    prev = fit.objective;
  }
}

TEST_CASE("LAD-lasso limits", "[lasso_family]") {
  std::mt19937_64 rng(23);
  const Matrix raw = random_matrix(rng, 12, 2);
  DesignMatrix X;
  X.values = raw;
  X.n = 12;
  X.p = 2;
  X.column_means = Vector::Zero(2);
  X.column_scales = Vector::Ones(2);
  Vector y = raw * Vector::Ones(2) + 0.1 * random_vector(rng, 12);

  // Huge penalty: slope coefficients vanish, intercept is the median.
  const FitResult big = lad_lasso({X, y, Lad{1e4}}, Vector::Zero(2), 1e-12);
  CHECK(big.coefficients.cwiseAbs().maxCoeff() == 0.0);
  WeightedSample s;
  s.values.assign(y.data(), y.data() + y.size());
  s.weights.assign(static_cast<std::size_t>(y.size()), 1.0);
  CHECK(big.intercept == Catch::Approx(weighted_median(s)).margin(1e-9));

  // Zero penalty equals plain LAD.
  const FitResult zero = lad_lasso({X, y, Lad{0.0}}, Vector::Zero(2), 1e-12);
  const FitResult plain = lad_cd({X, y, Lad{0.0}}, Vector::Zero(2), 1e-12);
  CHECK((zero.coefficients - plain.coefficients).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LAD-lasso beats the coordinate grid oracle", "[lasso_family]") {
  std::mt19937_64 rng(24);
  const Matrix raw = random_matrix(rng, 15, 3);
  DesignMatrix X;
  X.values = raw;
  X.n = 15;
  X.p = 3;
  X.column_means = Vector::Zero(3);
  X.column_scales = Vector::Ones(3);
  const Vector y = random_vector(rng, 15);
  const double lambda1 = 0.4;
  const FitResult fit = lad_lasso({X, y, Lad{lambda1}}, Vector::Zero(3), 1e-12);
  const double my_obj = lad_objective(raw, y, fit.coefficients, fit.intercept, lambda1);
  CHECK(my_obj == Catch::Approx(fit.objective).margin(1e-10));
  // From the shared cold start, exact medians do at least as well as the
  // grid-resolution scan; multi-start comparisons are reported, not asserted,
  // because nonsmooth LAD coordinate descent can stall at non-optimal points.
  const double grid_obj = lad_coordinate_grid_oracle(raw, y, lambda1, rng, 1);
  CHECK(my_obj <= grid_obj + 1e-6);
  const double enum_obj = lad_enumeration_objective(raw, y, lambda1);
  INFO("stall gap above the exact optimum: " << my_obj - enum_obj);
  CHECK(my_obj >= enum_obj - 1e-9);
}

TEST_CASE("grouped lasso: single group at lambda 0 is orthonormal least squares",
          "[lasso_family]") {
  std::mt19937_64 rng(25);
  Matrix raw = random_matrix(rng, 12, 3);
  Eigen::HouseholderQR<Matrix> qr(raw);
  DesignMatrix X;
  X.values = qr.householderQ() * Matrix::Identity(12, 3);
  X.n = 12;
  X.p = 3;
  X.column_means = Vector::Zero(3);
  X.column_scales = Vector::Ones(3);
  const Vector y = random_vector(rng, 12);
  const GroupedLasso pen{0.0, {{0, 1, 2}}};
  const FitResult fit = grouped_lasso_cd({X, y, pen}, Vector::Zero(3), 1e-12);
  const Vector want = X.values.transpose() * y;
  CHECK((fit.coefficients - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("grouped lasso zeroes every group under the threshold", "[lasso_family]") {
  std::mt19937_64 rng(26);
  Matrix raw = random_matrix(rng, 12, 4);
  Eigen::HouseholderQR<Matrix> qr(raw);
  DesignMatrix X;
  X.values = qr.householderQ() * Matrix::Identity(12, 4);
  X.n = 12;
  X.p = 4;
  X.column_means = Vector::Zero(4);
  X.column_scales = Vector::Ones(4);
  const Vector y = random_vector(rng, 12);
  const GroupedLasso pen{1e3, {{0, 1}, {2, 3}}};
  const FitResult fit = grouped_lasso_cd({X, y, pen}, Vector::Zero(4), 1e-12);
  CHECK(fit.coefficients.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grouped lasso matches the proximal reference on orthogonal groups",
          "[lasso_family]") {
  std::mt19937_64 rng(27);
  Matrix raw = random_matrix(rng, 12, 4);
  Eigen::HouseholderQR<Matrix> qr(raw);
  DesignMatrix X;
  X.values = qr.householderQ() * Matrix::Identity(12, 4);
  X.n = 12;
  X.p = 4;
  X.column_means = Vector::Zero(4);
  X.column_scales = Vector::Ones(4);
  const Vector y = random_vector(rng, 12);
  const SeparableProblem problem{X, y, GroupedLasso{0.4, {{0, 1}, {2, 3}}}};
  const FitResult fit = grouped_lasso_cd(problem, Vector::Zero(4), 1e-11);
  const auto ref = oracle::proximal_reference(problem, {30000});
  CHECK(std::abs(fit.objective - ref.objective) < 1e-6);
  CHECK(oracle::kkt_check_grouped(problem, fit.coefficients).feasible);
}

TEST_CASE("grouped lasso rejects non-orthonormal groups", "[lasso_family]") {
  std::mt19937_64 rng(28);
  const DesignMatrix X = standardize(random_matrix(rng, 10, 4, 0.4));
  const Vector y = random_vector(rng, 10);
  CHECK_THROWS_AS(
      grouped_lasso_cd({X, y, GroupedLasso{0.1, {{0, 1}, {2, 3}}}}, Vector::Zero(4)),
      NonOrthonormalGroupError);
}

TEST_CASE("Berhu limits: lasso branch and ridge branch", "[lasso_family]") {
  std::mt19937_64 rng(29);
  const DesignMatrix X = standardize(random_matrix(rng, 14, 3));
  const Vector y = random_vector(rng, 14);

  // Huge delta: indistinguishable from the lasso.
  const FitResult lasso_like =
      berhu_cd({X, y, Berhu{0.3, 1e9}}, Vector::Zero(3), 1e-11);
  const FitResult plain = lasso_cd({X, y, Lasso{0.3}}, Vector::Zero(3), 1e-11);
  CHECK((lasso_like.coefficients - plain.coefficients).cwiseAbs().maxCoeff() < 1e-8);

  // Tiny delta with a single predictor: ridge-style shrinkage of the LS fit.
  const DesignMatrix X1 = standardize(random_matrix(rng, 14, 1));
  Vector y1 = 3.0 * X1.values.col(0) + 0.01 * random_vector(rng, 14);
  const double ls = X1.values.col(0).dot(y1);
  const double lambda = 0.2, delta = 1e-4;
  const FitResult ridge_like = berhu_cd({X1, y1, Berhu{lambda, delta}}, Vector::Zero(1), 1e-12);
  CHECK(ridge_like.coefficients[0] ==
        Catch::Approx(ls / (1.0 + lambda / delta)).epsilon(1e-6));
}

TEST_CASE("Berhu matches the proximal reference", "[lasso_family]") {
  std::mt19937_64 rng(30);
  const SeparableProblem problem = random_problem(rng, 20, 4, Berhu{0.3, 0.5});
  const FitResult fit = berhu_cd(problem, Vector::Zero(4), 1e-11);
  const auto ref = oracle::proximal_reference(problem, {30000});
  CHECK(std::abs(fit.objective - ref.objective) < 1e-6);
  CHECK(oracle::kkt_check_separable(problem, fit.coefficients).feasible);
}

TEST_CASE("automatic grids start all-zero at lambda_max", "[lasso_family]") {
  std::mt19937_64 rng(31);
  const SeparableProblem problem = random_problem(rng, 20, 6, Lasso{0.0});
  const double lmax = lambda_max(problem.X, problem.y);
  const PathResult path = fit_path(problem, {lmax, 0.5 * lmax, 0.1 * lmax}, 1e-10);
  CHECK(path.fits.front().coefficients.cwiseAbs().maxCoeff() == 0.0);
  CHECK(path.fits.back().coefficients.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("warm starts cost fewer sweeps than cold starts", "[lasso_family]") {
  std::mt19937_64 rng(32);
  const SeparableProblem problem = random_problem(rng, 100, 50, Lasso{0.0}, 0.3);
  const double lmax = lambda_max(problem.X, problem.y);
  std::vector<double> grid;
  for (int k = 0; k < 30; ++k) grid.push_back(lmax * std::pow(0.02, k / 29.0));
  const PathResult warm = fit_path(problem, grid, 1e-9);
  int cold = 0;
  for (double lambda : grid) {
    const FitResult fit =
        lasso_cd({problem.X, problem.y, Lasso{lambda}}, Vector::Zero(50), 1e-9);
    cold += fit.iterations;
  }
  CHECK(warm.total_sweeps < cold);
}

TEST_CASE("single-point grid equals a direct call", "[lasso_family]") {
  std::mt19937_64 rng(33);
  const SeparableProblem problem = random_problem(rng, 15, 5, Lasso{0.2});
  const PathResult path = fit_path(problem, {0.2}, 1e-11);
  const FitResult direct = lasso_cd(problem, Vector::Zero(5), 1e-11);
  CHECK((path.fits[0].coefficients - direct.coefficients).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(fit_path(problem, {0.1, 0.2}, 1e-10), InvalidArgumentError);
}

TEST_CASE("objective decreases sweep by sweep for every solver", "[lasso_family]") {
  std::mt19937_64 rng(34);
  const int n = 20, p = 5;
  const DesignMatrix X = standardize(random_matrix(rng, n, p, 0.5));
  const Vector y = random_vector(rng, n);
  std::vector<Penalty> penalties{Lasso{0.2}, ElasticNet{0.2, 0.3}, Berhu{0.2, 0.4}};
  for (const auto& pen : penalties) {
    double prev = std::numeric_limits<double>::infinity();
    for (int sweeps = 1; sweeps <= 5; ++sweeps) {
      const FitResult fit = solve({X, y, pen}, Vector::Zero(p), 1e-14, sweeps);
      CHECK(fit.objective <= prev + 1e-10);
      prev = fit.objective;
    }
  }
}

TEST_CASE("coordinate descent lands on one objective from any start", "[lasso_family]") {
  // Tseng separability: these penalties are separable, so different starts
  // must agree. LAD is exempt and checked against grid oracles instead.
  std::mt19937_64 rng(35);
  const int n = 16, p = 5;
  const DesignMatrix X = standardize(random_matrix(rng, n, p, 0.4));
  const Vector y = random_vector(rng, n);
  std::vector<Penalty> penalties{Lasso{0.15}, ElasticNet{0.15, 0.2}, Berhu{0.15, 0.6}};
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (const auto& pen : penalties) {
    double first = 0.0;
    for (int start = 0; start < 10; ++start) {
      Vector init(p);
      for (int j = 0; j < p; ++j) init[j] = start == 0 ? 0.0 : unif(rng);
      const FitResult fit = solve({X, y, pen}, init, 1e-11);
      if (start == 0)
        first = fit.objective;
      else
        CHECK(fit.objective == Catch::Approx(first).margin(1e-6));
    }
  }
}

TEST_CASE("every converged fit is KKT-certified at 1e-6", "[lasso_family]") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 10 + static_cast<int>(rng() % 41);
    const int p = 2 + static_cast<int>(rng() % 15);
    const DesignMatrix X = standardize(random_matrix(rng, n, p, 0.3));
    const Vector y = random_vector(rng, n);
    {
      const SeparableProblem problem{X, y, Lasso{0.3}};
      const FitResult fit = lasso_cd(problem, Vector::Zero(p), 1e-10);
      REQUIRE(fit.converged);
      CHECK(oracle::kkt_check_separable(problem, fit.coefficients).feasible);
    }
    {
      const SeparableProblem problem{X, y, ElasticNet{0.2, 0.4}};
      const FitResult fit = elastic_net_cd(problem, Vector::Zero(p), 1e-10);
      REQUIRE(fit.converged);
      CHECK(oracle::kkt_check_separable(problem, fit.coefficients).feasible);
    }
    {
      const SeparableProblem problem{X, y, Berhu{0.25, 0.7}};
      const FitResult fit = berhu_cd(problem, Vector::Zero(p), 1e-10);
      REQUIRE(fit.converged);
      CHECK(oracle::kkt_check_separable(problem, fit.coefficients).feasible);
    }
  }
}
