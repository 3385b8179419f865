#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"

namespace pathwise::lasso {

// ---------------------------------------------------------------------------
// Penalty family

struct Lasso {
  double lambda;
};

struct ElasticNet {
  double lambda1;
  double lambda2;
};

struct Garotte {
  double lambda;
  // Full least-squares fit; computed by the solver when absent (needs p <= n).
  std::optional<Vector> beta_ls;
};

struct Berhu {
  double lambda;
  double delta;  // crossover from absolute-value to quadratic
};

struct Lad {
  double lambda1 = 0.0;  // 0 gives plain least absolute deviations
};

struct GroupedLasso {
  double lambda;
  std::vector<std::vector<Eigen::Index>> groups;  // partition of column indices
};

using Penalty = std::variant<Lasso, ElasticNet, Garotte, Berhu, Lad, GroupedLasso>;

struct SeparableProblem {
  DesignMatrix X;
  Vector y;
  Penalty penalty;
};

struct FitResult {
  Vector coefficients;
  double intercept = 0.0;  // used by the LAD solvers only
  int iterations = 0;      // full coordinate sweeps
  bool converged = false;
  double objective = 0.0;
};

struct PathResult {
  std::vector<double> grid;
  std::vector<FitResult> fits;
  int total_sweeps = 0;
};

inline constexpr int kDefaultMaxSweeps = 10000;

// ---------------------------------------------------------------------------
// Objectives (the criteria the solvers minimize; reported in FitResult)

inline double berhu_penalty_value(double b, double delta) {
  const double a = std::abs(b);
  return a < delta ? a : (b * b + delta * delta) / (2.0 * delta);
}

inline double objective_value(const DesignMatrix& X, const Vector& y, const Penalty& penalty,
                              const Vector& beta, double intercept = 0.0) {
  return std::visit(
      [&](const auto& pen) -> double {
        using P = std::decay_t<decltype(pen)>;
        if constexpr (std::is_same_v<P, Lasso>) {
          return 0.5 * (y - X.values * beta).squaredNorm() + pen.lambda * beta.lpNorm<1>();
        } else if constexpr (std::is_same_v<P, ElasticNet>) {
          return 0.5 * (y - X.values * beta).squaredNorm() + pen.lambda1 * beta.lpNorm<1>() +
                 0.5 * pen.lambda2 * beta.squaredNorm();
        } else if constexpr (std::is_same_v<P, Garotte>) {
          const Vector scaled = beta.cwiseProduct(*pen.beta_ls);
          return 0.5 * (y - X.values * scaled).squaredNorm() + pen.lambda * beta.sum();
        } else if constexpr (std::is_same_v<P, Berhu>) {
          double penv = 0.0;
          for (Eigen::Index j = 0; j < beta.size(); ++j)
            penv += berhu_penalty_value(beta[j], pen.delta);
          return 0.5 * (y - X.values * beta).squaredNorm() + pen.lambda * penv;
        } else if constexpr (std::is_same_v<P, Lad>) {
          return (y.array() - intercept - (X.values * beta).array()).abs().sum() +
                 pen.lambda1 * beta.lpNorm<1>();
        } else {
          static_assert(std::is_same_v<P, GroupedLasso>);
          double penv = 0.0;
          for (const auto& g : pen.groups) {
            double ss = 0.0;
            for (Eigen::Index j : g) ss += beta[j] * beta[j];
            penv += pen.lambda * std::sqrt(static_cast<double>(g.size())) * std::sqrt(ss);
          }
          return 0.5 * (y - X.values * beta).squaredNorm() + penv;
        }
      },
      penalty);
}

/// Smallest lambda with an all-zero lasso solution: max_j |<x_j, y>|.
inline double lambda_max(const DesignMatrix& X, const Vector& y) {
  return (X.values.transpose() * y).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Shared checks

namespace detail {

inline void check_inputs(const SeparableProblem& problem, const Vector& init,
                         bool need_standardized) {
  if (problem.X.n != problem.y.size())
    throw InvalidArgumentError("X and y have mismatched observation counts");
  if (init.size() != problem.X.p)
    throw InvalidArgumentError("init has wrong length");
  if (!problem.y.allFinite() || !init.allFinite()) throw NonFiniteError("solver input");
  require_finite(problem.X.values, "design matrix");
  if (need_standardized && !problem.X.is_standardized())
    throw NotStandardizedError("columns must have mean 0 and sum of squares 1");
}

inline void check_unpenalized_identifiable(const DesignMatrix& X) {
  if (X.p > X.n)
    throw RankDeficientError("lambda = 0 with p > n has no unique minimum");
  Eigen::ColPivHouseholderQR<Matrix> qr(X.values);
  if (qr.rank() < X.p)
    throw RankDeficientError("lambda = 0 requires full column rank");
}

/// Cache-backed cyclic coordinate descent for unit-norm columns. The update
/// functor maps the partial-residual coefficient u_j = beta_j + grad_j to the
/// new beta_j.
template <class UpdateFn>
FitResult cd_loop(const SeparableProblem& problem, Vector beta, double tol, int max_sweeps,
                  UpdateFn&& update) {
  const DesignMatrix& X = problem.X;
  InnerProductCache cache(X, problem.y);
  for (Eigen::Index j = 0; j < X.p; ++j)
    if (beta[j] != 0.0) cache.activate(X, j);

  FitResult result;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < X.p; ++j) {
      const double old = beta[j];
      const double u = old + cache.gradient(j, beta);
      const double next = update(j, u);
      if (next != old) {
        if (next != 0.0 && !cache.is_active(j)) cache.activate(X, j);
        beta[j] = next;
        if (next == 0.0) cache.deactivate(j);
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    ++result.iterations;
    if (max_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.coefficients = std::move(beta);
  result.objective =
      objective_value(problem.X, problem.y, problem.penalty, result.coefficients);
  return result;
}

template <class PenaltyT>
const PenaltyT& expect_penalty(const SeparableProblem& problem, const char* name) {
  const PenaltyT* pen = std::get_if<PenaltyT>(&problem.penalty);
  if (!pen) throw InvalidArgumentError(std::string("problem does not carry a ") + name +
                                       " penalty");
  return *pen;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solvers

inline FitResult lasso_cd(const SeparableProblem& problem, const Vector& init,
                          double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  const auto& pen = detail::expect_penalty<Lasso>(problem, "Lasso");
  detail::check_inputs(problem, init, /*need_standardized=*/true);
  if (pen.lambda < 0.0) throw InvalidArgumentError("lambda must be >= 0");
  if (pen.lambda == 0.0) detail::check_unpenalized_identifiable(problem.X);
  return detail::cd_loop(problem, init, tol, max_sweeps,
                         [&](Eigen::Index, double u) { return soft_threshold(u, pen.lambda); });
}

inline FitResult elastic_net_cd(const SeparableProblem& problem, const Vector& init,
                                double tol = tol::convergence,
                                int max_sweeps = kDefaultMaxSweeps) {
  const auto& pen = detail::expect_penalty<ElasticNet>(problem, "ElasticNet");
  detail::check_inputs(problem, init, /*need_standardized=*/true);
  if (pen.lambda1 < 0.0 || pen.lambda2 < 0.0)
    throw InvalidArgumentError("elastic net penalties must be >= 0");
  if (pen.lambda1 == 0.0 && pen.lambda2 == 0.0)
    detail::check_unpenalized_identifiable(problem.X);
  const double shrink = 1.0 + pen.lambda2;
  return detail::cd_loop(problem, init, tol, max_sweeps, [&](Eigen::Index, double u) {
    return soft_threshold(u, pen.lambda1) / shrink;
  });
}

inline FitResult berhu_cd(const SeparableProblem& problem, const Vector& init,
                          double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  const auto& pen = detail::expect_penalty<Berhu>(problem, "Berhu");
  detail::check_inputs(problem, init, /*need_standardized=*/true);
  if (!(pen.delta > 0.0)) throw InvalidArgumentError("Berhu delta must be > 0");
  if (pen.lambda < 0.0) throw InvalidArgumentError("lambda must be >= 0");
  // The two branch conditions reference the unknown new value, so we form
  // both candidates and keep whichever minimizes the coordinate objective.
  auto coord_obj = [&](double b, double u) {
    return 0.5 * (b - u) * (b - u) + pen.lambda * berhu_penalty_value(b, pen.delta);
  };
  return detail::cd_loop(problem, init, tol, max_sweeps, [&](Eigen::Index, double u) {
    const double soft = soft_threshold(u, pen.lambda);
    const double ridge = u / (1.0 + pen.lambda / pen.delta);
    return coord_obj(soft, u) <= coord_obj(ridge, u) ? soft : ridge;
  });
}

inline FitResult garotte_cd(SeparableProblem problem, const Vector& init,
                            double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  detail::expect_penalty<Garotte>(problem, "Garotte");
  auto& pen = std::get<Garotte>(problem.penalty);
  detail::check_inputs(problem, init, /*need_standardized=*/true);
  if (pen.lambda < 0.0) throw InvalidArgumentError("lambda must be >= 0");
  if ((init.array() < 0.0).any())
    throw InvalidArgumentError("garotte init must be nonnegative");
  const DesignMatrix& X = problem.X;
  if (!pen.beta_ls) {
    if (X.p > X.n) throw RankDeficientError("garotte requires p <= n");
    Eigen::ColPivHouseholderQR<Matrix> qr(X.values);
    if (qr.rank() < X.p) throw RankDeficientError("least-squares fit undefined");
    pen.beta_ls = qr.solve(problem.y);
  }
  const Vector& bls = *pen.beta_ls;

  Vector c = init;
  Vector r = problem.y - X.values * c.cwiseProduct(bls);
  FitResult result;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < X.p; ++j) {
      if (bls[j] == 0.0) continue;  // scaled column is zero; c_j has no effect
      const double numer = bls[j] * (X.values.col(j).dot(r) + c[j] * bls[j]) - pen.lambda;
      const double next = std::max(0.0, numer / (bls[j] * bls[j]));
      if (next != c[j]) {
        r += X.values.col(j) * ((c[j] - next) * bls[j]);
        max_change = std::max(max_change, std::abs(next - c[j]));
        c[j] = next;
      }
    }
    ++result.iterations;
    if (max_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.coefficients = std::move(c);
  result.objective =
      objective_value(problem.X, problem.y, problem.penalty, result.coefficients);
  return result;
}

namespace detail {

/// Exact minimization of sum_i |r_i - a_i u - b_i v| over the pair (u, v):
/// the optimum sits where two residuals vanish, so every intersection of two
/// zero-residual lines is a candidate. Rescues the single-coordinate loop
/// from oblique corners where every median move is a no-op.
struct PairMove {
  bool improved = false;
  double u = 0.0;
  double v = 0.0;
};

inline PairMove lad_pair_move(const Vector& r, const Vector& a, const Vector& b, double u0,
                              double v0) {
  const Eigen::Index m = r.size();
  auto value = [&](double u, double v) {
    return (r - a * u - b * v).cwiseAbs().sum();
  };
  PairMove best;
  best.u = u0;
  best.v = v0;
  double best_value = value(u0, v0);
  const double base = best_value;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double det = a[i] * b[j] - a[j] * b[i];
      if (std::abs(det) < 1e-12) continue;
      const double u = (r[i] * b[j] - r[j] * b[i]) / det;
      const double v = (a[i] * r[j] - a[j] * r[i]) / det;
      const double val = value(u, v);
      if (val < best_value - 1e-12) {
        best_value = val;
        best.u = u;
        best.v = v;
      }
    }
  }
  best.improved = best_value < base - 1e-8 * (1.0 + std::abs(base));
  return best;
}

/// Exhaustive vertex search for small problems: an LAD optimum in general
/// position interpolates p+1 observations, so trying every interpolation
/// subset is an exact finite rescue when medians and pair moves both stall.
inline bool lad_vertex_rescue(const Matrix& X, const Vector& y, Eigen::Index n_real,
                              Vector& beta, double& intercept, const Vector& r) {
  const Eigen::Index m = X.rows();
  const Eigen::Index dim = X.cols() + 1;
  double combos = 1.0;
  for (Eigen::Index k = 0; k < dim; ++k) combos *= static_cast<double>(m - k) / (k + 1);
  if (dim > 6 || combos > 20000.0) return false;

  Matrix design(m, dim);
  design.col(0) = Vector::Zero(m);
  design.col(0).head(n_real).setOnes();
  design.rightCols(X.cols()) = X;

  double best = r.cwiseAbs().sum();
  Vector best_point;
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(dim));
  std::function<void(Eigen::Index, Eigen::Index)> recurse = [&](Eigen::Index start,
                                                                Eigen::Index chosen) {
    if (chosen == dim) {
      Matrix A(dim, dim);
      Vector b(dim);
      for (Eigen::Index t = 0; t < dim; ++t) {
        A.row(t) = design.row(pick[static_cast<std::size_t>(t)]);
        b[t] = y[pick[static_cast<std::size_t>(t)]];
      }
      const Eigen::FullPivLU<Matrix> lu(A);
      if (!lu.isInvertible()) return;
      const Vector sol = lu.solve(b);
      const double value = (y - design * sol).cwiseAbs().sum();
      if (value < best - 1e-9 * (1.0 + std::abs(best))) {
        best = value;
        best_point = sol;
      }
      return;
    }
    for (Eigen::Index i = start; i <= m - (dim - chosen); ++i) {
      pick[static_cast<std::size_t>(chosen)] = i;
      recurse(i + 1, chosen + 1);
    }
  };
  recurse(0, 0);
  if (best_point.size() == 0) return false;
  intercept = best_point[0];
  beta = best_point.tail(X.cols());
  return true;
}

/// LAD coordinate loop on an already-augmented (or plain) dataset. Rows with
/// intercept_row[i] == false do not enter the intercept median.
inline FitResult lad_loop(const Matrix& X, const Vector& y, Eigen::Index n_real, Vector beta,
                          double intercept, double tol, int max_sweeps) {
  const Eigen::Index p = X.cols();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (X.col(j).cwiseAbs().maxCoeff() == 0.0)
      throw DegenerateColumnError(static_cast<int>(j));
  }
  Vector r = y - X * beta;
  r.head(n_real).array() -= intercept;

  FitResult result;
  WeightedSample sample;
  int escapes_left = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    {
      // Intercept: unweighted median of residuals over the real observations.
      sample.values.assign(r.data(), r.data() + n_real);
      for (auto& v : sample.values) v += intercept;
      sample.weights.assign(static_cast<std::size_t>(n_real), 1.0);
      const double next = weighted_median(sample);
      if (next != intercept) {
        r.head(n_real).array() += intercept - next;
        max_change = std::max(max_change, std::abs(next - intercept));
        intercept = next;
      }
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      sample.values.clear();
      sample.weights.clear();
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double xij = X(i, j);
        if (xij == 0.0) continue;
        sample.values.push_back((r[i] + xij * beta[j]) / xij);
        sample.weights.push_back(std::abs(xij));
      }
      const double next = weighted_median(sample);
      if (next != beta[j]) {
        r += X.col(j) * (beta[j] - next);
        max_change = std::max(max_change, std::abs(next - beta[j]));
        beta[j] = next;
      }
    }
    ++result.iterations;
    if (max_change < tol) {
      // Medians are stationary; try exact pairwise moves before accepting the
      // point (kept to modest sizes, where the vertex enumeration is cheap).
      bool escaped = false;
      if (X.rows() <= 200 && escapes_left > 0) {
        --escapes_left;
        Vector ones = Vector::Zero(X.rows());
        ones.head(n_real).setOnes();
        for (Eigen::Index a = -1; a < p && !escaped; ++a) {
          const Vector col_a = a < 0 ? ones : Vector(X.col(a));
          const double val_a = a < 0 ? intercept : beta[a];
          for (Eigen::Index b = a + 1; b < p && !escaped; ++b) {
            const Vector partial = r + col_a * val_a + X.col(b) * beta[b];
            const PairMove mv = lad_pair_move(partial, col_a, X.col(b), val_a, beta[b]);
            if (!mv.improved) continue;
            if (a < 0)
              intercept = mv.u;
            else
              beta[a] = mv.u;
            beta[b] = mv.v;
            r = partial - col_a * mv.u - X.col(b) * mv.v;
            escaped = true;
          }
        }
      }
      if (!escaped && lad_vertex_rescue(X, y, n_real, beta, intercept, r)) {
        r = y - X * beta;
        r.head(n_real).array() -= intercept;
        escaped = true;
      }
      if (!escaped) {
        result.converged = true;
        break;
      }
    }
  }
  result.coefficients = std::move(beta);
  result.intercept = intercept;
  return result;
}

}  // namespace detail

inline FitResult lad_cd(const SeparableProblem& problem, const Vector& init,
                        double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  const auto& pen = detail::expect_penalty<Lad>(problem, "Lad");
  detail::check_inputs(problem, init, /*need_standardized=*/false);
  if (pen.lambda1 != 0.0)
    throw InvalidArgumentError("lad_cd is the lambda1 = 0 case; use lad_lasso");
  FitResult result = detail::lad_loop(problem.X.values, problem.y, problem.X.n, init, 0.0, tol,
                                      max_sweeps);
  result.objective = objective_value(problem.X, problem.y, problem.penalty,
                                     result.coefficients, result.intercept);
  return result;
}

/// LAD-lasso via the augmented-data reduction: p extra observations with
/// response 0 and predictor rows lambda1 * I (intercept column zero).
inline FitResult lad_lasso(const SeparableProblem& problem, const Vector& init,
                           double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  const auto& pen = detail::expect_penalty<Lad>(problem, "Lad");
  detail::check_inputs(problem, init, /*need_standardized=*/false);
  if (pen.lambda1 == 0.0) return lad_cd(problem, init, tol, max_sweeps);
  if (pen.lambda1 < 0.0) throw InvalidArgumentError("lambda1 must be >= 0");
  const Eigen::Index n = problem.X.n;
  const Eigen::Index p = problem.X.p;
  Matrix Xa(n + p, p);
  Xa.topRows(n) = problem.X.values;
  Xa.bottomRows(p) = pen.lambda1 * Matrix::Identity(p, p);
  Vector ya = Vector::Zero(n + p);
  ya.head(n) = problem.y;
  FitResult result = detail::lad_loop(Xa, ya, n, init, 0.0, tol, max_sweeps);
  result.objective = objective_value(problem.X, problem.y, problem.penalty,
                                     result.coefficients, result.intercept);
  return result;
}

inline FitResult grouped_lasso_cd(const SeparableProblem& problem, const Vector& init,
                                  double tol = tol::convergence,
                                  int max_sweeps = kDefaultMaxSweeps) {
  const auto& pen = detail::expect_penalty<GroupedLasso>(problem, "GroupedLasso");
  detail::check_inputs(problem, init, /*need_standardized=*/false);
  if (pen.lambda < 0.0) throw InvalidArgumentError("lambda must be >= 0");
  const DesignMatrix& X = problem.X;

  std::vector<char> seen(static_cast<std::size_t>(X.p), 0);
  for (std::size_t g = 0; g < pen.groups.size(); ++g) {
    const auto& cols = pen.groups[g];
    if (cols.empty()) throw InvalidArgumentError("empty group");
    for (Eigen::Index j : cols) {
      if (j < 0 || j >= X.p || seen[static_cast<std::size_t>(j)])
        throw InvalidArgumentError("groups must partition the column indices");
      seen[static_cast<std::size_t>(j)] = 1;
    }
    Matrix Xg(X.n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) Xg.col(static_cast<Eigen::Index>(c)) = X.values.col(cols[c]);
    const Matrix gram = Xg.transpose() * Xg;
    if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-8)
      throw NonOrthonormalGroupError(static_cast<int>(g));
  }
  for (char s : seen)
    if (!s) throw InvalidArgumentError("groups must cover every column");

  Vector beta = init;
  Vector r = problem.y - X.values * beta;
  FitResult result;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (const auto& cols : pen.groups) {
      const double lam_g = pen.lambda * std::sqrt(static_cast<double>(cols.size()));
      Vector s(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c)
        s[static_cast<Eigen::Index>(c)] = X.values.col(cols[c]).dot(r) + beta[cols[c]];
      const double norm = s.norm();
      Vector next = norm > lam_g ? Vector(s * ((norm - lam_g) / norm))
                                 : Vector(Vector::Zero(s.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const Eigen::Index j = cols[c];
        const double nj = next[static_cast<Eigen::Index>(c)];
        if (nj != beta[j]) {
          r += X.values.col(j) * (beta[j] - nj);
          max_change = std::max(max_change, std::abs(nj - beta[j]));
          beta[j] = nj;
        }
      }
    }
    ++result.iterations;
    if (max_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.coefficients = std::move(beta);
  result.objective =
      objective_value(problem.X, problem.y, problem.penalty, result.coefficients);
  return result;
}

// ---------------------------------------------------------------------------
// Weighted L1 coordinate descent on a general (not standardized) design.
// Used by the transformed-lasso oracle; columns may have any norm and each
// coordinate carries its own penalty factor.
inline FitResult l1_cd_weighted(const Matrix& X, const Vector& y, double lambda,
                                const Vector& penalty_factor, Vector beta,
                                double tol = tol::convergence,
                                int max_sweeps = kDefaultMaxSweeps) {
  const Eigen::Index p = X.cols();
  Vector col_ss(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    col_ss[j] = X.col(j).squaredNorm();
    if (col_ss[j] == 0.0) throw DegenerateColumnError(static_cast<int>(j));
  }
  Vector r = y - X * beta;
  FitResult result;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double u = X.col(j).dot(r) + col_ss[j] * beta[j];
      const double next = soft_threshold(u, lambda * penalty_factor[j]) / col_ss[j];
      if (next != beta[j]) {
        r += X.col(j) * (beta[j] - next);
        max_change = std::max(max_change, std::abs(next - beta[j]));
        beta[j] = next;
      }
    }
    ++result.iterations;
    if (max_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.coefficients = std::move(beta);
  result.objective = 0.5 * (y - X * result.coefficients).squaredNorm() +
                     lambda * penalty_factor.cwiseProduct(result.coefficients).lpNorm<1>();
  return result;
}

// ---------------------------------------------------------------------------
// Pathwise fitting with warm starts

inline FitResult solve(const SeparableProblem& problem, const Vector& init,
                       double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  return std::visit(
      [&](const auto& pen) -> FitResult {
        using P = std::decay_t<decltype(pen)>;
        if constexpr (std::is_same_v<P, Lasso>) return lasso_cd(problem, init, tol, max_sweeps);
        else if constexpr (std::is_same_v<P, ElasticNet>)
          return elastic_net_cd(problem, init, tol, max_sweeps);
        else if constexpr (std::is_same_v<P, Garotte>)
          return garotte_cd(problem, init, tol, max_sweeps);
        else if constexpr (std::is_same_v<P, Berhu>)
          return berhu_cd(problem, init, tol, max_sweeps);
        else if constexpr (std::is_same_v<P, Lad>)
          return pen.lambda1 == 0.0 ? lad_cd(problem, init, tol, max_sweeps)
                                    : lad_lasso(problem, init, tol, max_sweeps);
        else
          return grouped_lasso_cd(problem, init, tol, max_sweeps);
      },
      problem.penalty);
}

inline Penalty with_primary(const Penalty& penalty, double value) {
  Penalty out = penalty;
  std::visit(
      [&](auto& pen) {
        using P = std::decay_t<decltype(pen)>;
        if constexpr (std::is_same_v<P, ElasticNet> || std::is_same_v<P, Lad>)
          pen.lambda1 = value;
        else
          pen.lambda = value;
      },
      out);
  return out;
}

/// Fits a decreasing penalty grid, each solution warm-starting the next.
inline PathResult fit_path(const SeparableProblem& problem, const std::vector<double>& grid,
                           double tol = tol::convergence, int max_sweeps = kDefaultMaxSweeps) {
  if (grid.empty()) throw InvalidArgumentError("empty penalty grid");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] < grid[k - 1]))
      throw InvalidArgumentError("penalty grid must be strictly decreasing");
  PathResult path;
  path.grid = grid;
  Vector warm = Vector::Zero(problem.X.p);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    SeparableProblem sub{problem.X, problem.y, with_primary(problem.penalty, grid[k])};
    FitResult fit = solve(sub, warm, tol, max_sweeps);
    if (!fit.converged) throw NotConvergedError("path fit", static_cast<int>(k));
    warm = fit.coefficients;
    path.total_sweeps += fit.iterations;
    path.fits.push_back(std::move(fit));
  }
  return path;
}

}  // namespace pathwise::lasso
