#pragma once

// Test-only helpers: random instance builders and the independent brute-force
// oracles the implementation is checked against. Nothing here may call into
// the code path it verifies.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/lasso_family.hpp"

namespace testing_support {

using pathwise::Matrix;
using pathwise::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, int n, int p, double rho = 0.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i) {
    const double common = gauss(rng);
    for (int j = 0; j < p; ++j)
      X(i, j) = std::sqrt(rho) * common + std::sqrt(1.0 - rho) * gauss(rng);
  }
  return X;
}

inline Vector random_vector(std::mt19937_64& rng, int n, double sd = 1.0) {
  std::normal_distribution<double> gauss(0.0, sd);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = gauss(rng);
  return y;
}

/// Brute-force weighted-median objective scan over the sample points
/// (candidates suffice: the objective is piecewise linear with breaks there).
inline double weighted_abs_loss(const pathwise::WeightedSample& s, double m) {
  double v = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i)
    v += s.weights[i] * std::abs(s.values[i] - m);
  return v;
}

inline double brute_force_weighted_median(const pathwise::WeightedSample& s) {
  double best = s.values.front();
  double best_v = weighted_abs_loss(s, best);
  std::vector<double> candidates = s.values;
  std::sort(candidates.begin(), candidates.end());
  for (double c : candidates) {
    const double v = weighted_abs_loss(s, c);
    if (v < best_v - 1e-15 || (std::abs(v - best_v) <= 1e-12 && c < best)) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

/// LAD(-lasso) objective with explicit intercept.
inline double lad_objective(const Matrix& X, const Vector& y, const Vector& beta,
                            double intercept, double lambda1) {
  return (y.array() - intercept - (X * beta).array()).abs().sum() +
         lambda1 * beta.lpNorm<1>();
}

/// Exact LAD oracle: the optimum of an LAD problem in general position
/// interpolates p+1 observations (LP vertex), so enumerating all
/// interpolation subsets and keeping the best objective is exact.
inline double lad_enumeration_objective(const Matrix& X, const Vector& y, double lambda1) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  Matrix Xa;  // augmented rows for the L1 penalty
  Vector ya;
  if (lambda1 > 0.0) {
    Xa.resize(n + p, p);
    Xa.topRows(n) = X;
    Xa.bottomRows(p) = lambda1 * Matrix::Identity(p, p);
    ya = Vector::Zero(n + p);
    ya.head(n) = y;
  } else {
    Xa = X;
    ya = y;
  }
  const int m = static_cast<int>(Xa.rows());
  const int dim = p + 1;  // + intercept (intercept column is 0 on augmented rows)
  Matrix design(m, dim);
  design.col(0) = Vector::Zero(m);
  design.col(0).head(n).setOnes();
  design.rightCols(p) = Xa;

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(dim));
  std::function<void(int, int)> rec = [&](int start, int chosen) {
    if (chosen == dim) {
      Matrix A(dim, dim);
      Vector b(dim);
      for (int r = 0; r < dim; ++r) {
        A.row(r) = design.row(pick[static_cast<std::size_t>(r)]);
        b[r] = ya[pick[static_cast<std::size_t>(r)]];
      }
      const Eigen::FullPivLU<Matrix> lu(A);
      if (!lu.isInvertible()) return;
      const Vector sol = lu.solve(b);
      const double obj =
          lad_objective(X, y, sol.tail(X.cols()), sol[0], lambda1);
      best = std::min(best, obj);
      return;
    }
    for (int i = start; i <= m - (dim - chosen); ++i) {
      pick[static_cast<std::size_t>(chosen)] = i;
      rec(i + 1, chosen + 1);
    }
  };
  rec(0, 0);
  return best;
}

/// Grid-scan LAD oracle for p = 1 (intercept + slope over a 2D grid).
inline double lad_grid_scan_p1(const Matrix& X, const Vector& y, double lambda1, double lo,
                               double hi, double step, Vector* arg = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  Vector beta(1);
  for (double b0 = lo; b0 <= hi; b0 += step)
    for (double b1 = lo; b1 <= hi; b1 += step) {
      beta[0] = b1;
      const double obj = lad_objective(X, y, beta, b0, lambda1);
      if (obj < best) {
        best = obj;
        if (arg) {
          arg->resize(2);
          (*arg)[0] = b0;
          (*arg)[1] = b1;
        }
      }
    }
  return best;
}

/// Coordinate-wise grid-scan LAD oracle: cyclic sweeps where every coordinate
/// update is a scan over a fine grid, run from each given (intercept, beta)
/// start; returns the best objective reached.
inline double lad_grid_oracle_from(const Matrix& X, const Vector& y, double lambda1,
                                   const std::vector<std::pair<double, Vector>>& starts,
                                   double span = 4.0, double step = 0.005) {
  const int p = static_cast<int>(X.cols());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [start_intercept, start_beta] : starts) {
    Vector beta = start_beta;
    double intercept = start_intercept;
    double obj = lad_objective(X, y, beta, intercept, lambda1);
    for (int sweep = 0; sweep < 60; ++sweep) {
      double improved = 0.0;
      for (int coord = -1; coord < p; ++coord) {
        const double center = coord < 0 ? intercept : beta[coord];
        double local_best = obj;
        double local_arg = center;
        for (double v = center - span; v <= center + span; v += step) {
          if (coord < 0)
            intercept = v;
          else
            beta[coord] = v;
          const double o = lad_objective(X, y, beta, intercept, lambda1);
          if (o < local_best) {
            local_best = o;
            local_arg = v;
          }
        }
        if (coord < 0)
          intercept = local_arg;
        else
          beta[coord] = local_arg;
        improved += obj - local_best;
        obj = local_best;
      }
      if (improved < 1e-12) break;
    }
    best = std::min(best, obj);
  }
  return best;
}

inline std::vector<std::pair<double, Vector>> lad_starts(std::mt19937_64& rng, int p,
                                                         int count) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<std::pair<double, Vector>> starts;
  starts.emplace_back(0.0, Vector::Zero(p));
  for (int s = 1; s < count; ++s) {
    Vector beta(p);
    for (int j = 0; j < p; ++j) beta[j] = unif(rng);
    starts.emplace_back(unif(rng), beta);
  }
  return starts;
}

inline double lad_coordinate_grid_oracle(const Matrix& X, const Vector& y, double lambda1,
                                         std::mt19937_64& rng, int starts = 5,
                                         double span = 4.0, double step = 0.005) {
  return lad_grid_oracle_from(X, y, lambda1, lad_starts(rng, static_cast<int>(X.cols()), starts),
                              span, step);
}

/// Dense scan of the two-point FLSA objective, the oracle for the n = 2
/// closed form.
inline std::pair<double, double> flsa_two_point_scan(double a, double b, double lambda1,
                                                     double lambda2, double step = 1e-3) {
  const double lo = std::min({a, b, 0.0}) - 1.0;
  const double hi = std::max({a, b, 0.0}) + 1.0;
  double best = std::numeric_limits<double>::infinity();
  std::pair<double, double> arg{0.0, 0.0};
  for (double b1 = lo; b1 <= hi; b1 += step)
    for (double b2 = lo; b2 <= hi; b2 += step) {
      const double obj = 0.5 * ((a - b1) * (a - b1) + (b - b2) * (b - b2)) +
                         lambda1 * (std::abs(b1) + std::abs(b2)) +
                         lambda2 * std::abs(b2 - b1);
      if (obj < best) {
        best = obj;
        arg = {b1, b2};
      }
    }
  return arg;
}

}  // namespace testing_support
