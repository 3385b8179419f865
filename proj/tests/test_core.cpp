#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "pathwise/core.hpp"

using namespace pathwise;
using namespace testing_support;

TEST_CASE("soft threshold matches the three cases", "[core]") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double z = gauss(rng);
    CHECK(soft_threshold(z, 0.0) == z);
  }
}

TEST_CASE("soft threshold is odd and a contraction", "[core]") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 3.0);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    const double z = gauss(rng), z2 = gauss(rng), g = unif(rng);
    CHECK(soft_threshold(-z, g) == -soft_threshold(z, g));
    CHECK(std::abs(soft_threshold(z, g) - soft_threshold(z2, g)) <=
          std::abs(z - z2) + 1e-15);
  }
}

TEST_CASE("standardize centers and scales to unit sum of squares", "[core]") {
  Matrix raw(3, 1);
  raw << 1.0, 2.0, 3.0;
  const DesignMatrix X = standardize(raw);
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(X.values(0, 0) == Catch::Approx(-s).margin(1e-15));
  CHECK(X.values(1, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(X.values(2, 0) == Catch::Approx(s).margin(1e-15));
  CHECK(X.column_means[0] == Catch::Approx(2.0));
  CHECK(X.is_standardized());

  // Idempotence.
  const DesignMatrix X2 = standardize(X.values);
  CHECK((X2.values - X.values).cwiseAbs().maxCoeff() < 1e-12);

  Matrix constant(4, 2);
  constant.col(0) = Vector::LinSpaced(4, 0.0, 1.0);
  constant.col(1).setConstant(7.0);
  CHECK_THROWS_AS(standardize(constant), ConstantColumnError);

  Matrix bad(2, 1);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(standardize(bad), NonFiniteError);
}

TEST_CASE("weighted median on the named examples", "[core]") {
  CHECK(weighted_median({{1, 2, 3}, {1, 1, 1}}) == 2.0);
  {
    // Brute-force scan confirms 0 minimizes before we assert it.
    const WeightedSample s{{0, 10}, {3, 1}};
    CHECK(brute_force_weighted_median(s) == 0.0);
    CHECK(weighted_median(s) == 0.0);
  }
  // Tie rule: lower endpoint of the minimizing interval.
  CHECK(weighted_median({{0, 10}, {1, 1}}) == 0.0);
  CHECK(weighted_median({{10, 0}, {1, 1}}) == 0.0);
  CHECK_THROWS_AS(weighted_median({{}, {}}), EmptySampleError);
  CHECK_THROWS_AS(weighted_median({{1.0}, {0.0}}), InvalidArgumentError);
}

TEST_CASE("weighted median equals the brute-force argmin", "[core]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(0.1, 3.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 12);
    WeightedSample s;
    for (int i = 0; i < m; ++i) {
      s.values.push_back(gauss(rng));
      s.weights.push_back(wdist(rng));
    }
    const double got = weighted_median(s);
    const double want = brute_force_weighted_median(s);
    CHECK(got == want);
  }
}

TEST_CASE("inner product cache activation stores exact products", "[core]") {
  std::mt19937_64 rng(4);
  const Matrix raw = random_matrix(rng, 12, 5);
  const DesignMatrix X = standardize(raw);
  const Vector y = random_vector(rng, 12);
  InnerProductCache cache(X, y);
  for (Eigen::Index j = 0; j < 5; ++j)
    CHECK(cache.xty()[j] ==
          Catch::Approx(X.values.col(j).dot(y)).epsilon(1e-12).margin(1e-15));

  cache.activate(X, 2);
  for (Eigen::Index j = 0; j < 5; ++j)
    CHECK(cache.xtx(j, 2) ==
          Catch::Approx(X.values.col(j).dot(X.values.col(2))).epsilon(1e-12).margin(1e-15));
  CHECK_THROWS_AS(cache.activate(X, 2), AlreadyActiveError);
}

TEST_CASE("orthogonal design has zero cached cross products", "[core]") {
  Matrix raw = Matrix::Zero(6, 3);
  raw(0, 0) = 1;
  raw(1, 0) = -1;
  raw(2, 1) = 1;
  raw(3, 1) = -1;
  raw(4, 2) = 1;
  raw(5, 2) = -1;
  const DesignMatrix X = standardize(raw);
  InnerProductCache cache(X, Vector::Ones(6));
  cache.activate(X, 0);
  CHECK(std::abs(cache.xtx(1, 0)) < 1e-12);
  CHECK(std::abs(cache.xtx(2, 0)) < 1e-12);
}

TEST_CASE("cached gradient matches the direct partial-residual form", "[core]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 46);
    const int p = 2 + static_cast<int>(rng() % std::min(n - 1, 49));
    const DesignMatrix X = standardize(random_matrix(rng, n, p));
    const Vector y = random_vector(rng, n);
    Vector beta = Vector::Zero(p);
    InnerProductCache cache(X, y);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int j = 0; j < p; j += 2) {
      beta[j] = unif(rng);
      cache.activate(X, j);
    }
    const Vector residual = y - X.values * beta;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double direct = X.values.col(j).dot(residual);
      CHECK(cache.gradient(j, beta) == Catch::Approx(direct).margin(1e-10));
    }
  }
}

TEST_CASE("piecewise quadratic minimizer agrees with a dense scan", "[core]") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 1.5);
  std::uniform_real_distribution<double> wdist(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 0.2 + wdist(rng);
    const double c = gauss(rng);
    const double q = wdist(rng);
    std::vector<AbsTerm> terms;
    const int nt = static_cast<int>(rng() % 4);
    for (int m = 0; m < nt; ++m) terms.push_back({wdist(rng), gauss(rng)});
    const double got = piecewise_quadratic_min(a, c, q, terms);
    auto value = [&](double g) {
      double v = 0.5 * a * (g - c) * (g - c) + q * std::abs(g);
      for (const auto& t : terms) v += t.weight * std::abs(g - t.location);
      return v;
    };
    double scan_best = -6.0;
    for (double g = -6.0; g <= 6.0; g += 1e-3)
      if (value(g) < value(scan_best)) scan_best = g;
    CHECK(value(got) <= value(scan_best) + 1e-9);
  }
}
