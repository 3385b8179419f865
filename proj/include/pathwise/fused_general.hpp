#pragma once

#include <cmath>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"
#include "pathwise/flsa1d.hpp"
#include "pathwise/oracle.hpp"

namespace pathwise::fused {

/// Squared-error loss with a general design plus sparsity and
/// chain-fusion penalties on the coefficients. Coefficient order 1..p defines
/// the fusion chain.
struct GeneralFusedProblem {
  DesignMatrix X;
  Vector y;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

struct FusedFitResult {
  Vector coefficients;
  int iterations = 0;  // passes summed over the lambda2 grid
  bool converged = false;
  double objective = 0.0;
  bool certified = false;        // subgradient check outcome at the target
  double certificate_violation = 0.0;
  std::vector<std::pair<int, int>> fused_runs;
};

inline double general_fused_objective(const GeneralFusedProblem& prob, const Vector& beta) {
  double obj = 0.5 * (prob.y - prob.X.values * beta).squaredNorm() +
               prob.lambda1 * beta.lpNorm<1>();
  for (Eigen::Index j = 1; j < beta.size(); ++j)
    obj += prob.lambda2 * std::abs(beta[j] - beta[j - 1]);
  return obj;
}

namespace detail {

/// Joint move of the coefficient block [a, b] at a common value gamma: the
/// merged predictor is the sum of the member columns and the L1 weight
/// counts the members.
struct BlockMove {
  double gamma = 0.0;
  double delta_objective = 0.0;  // new minus old, local terms only
};

inline BlockMove block_candidate(const GeneralFusedProblem& prob, const Vector& beta,
                                 const Vector& residual, int a, int b) {
  const Matrix& X = prob.X.values;
  const Eigen::Index p = X.cols();
  Vector z = Vector::Zero(X.rows());
  for (int j = a; j <= b; ++j) z += X.col(j);
  // Residual with the block's contribution removed.
  Vector r_out = residual;
  for (int j = a; j <= b; ++j) r_out += X.col(j) * beta[j];
  double ss = z.squaredNorm();
  double center = 0.0;
  if (ss < 1e-12) {
    ss = 1e-12;  // cancelling columns: the data term no longer pins gamma
  } else {
    center = z.dot(r_out) / ss;
  }
  const double count = static_cast<double>(b - a + 1);
  std::vector<AbsTerm> terms;
  if (a > 0) terms.push_back({prob.lambda2, beta[a - 1]});
  if (b + 1 < p) terms.push_back({prob.lambda2, beta[b + 1]});
  BlockMove move;
  move.gamma = piecewise_quadratic_min(ss, center, prob.lambda1 * count, terms);

  auto local = [&](bool merged) {
    Vector r = r_out;
    double pen = 0.0;
    if (merged) {
      r -= z * move.gamma;
      pen += prob.lambda1 * count * std::abs(move.gamma);
    } else {
      for (int j = a; j <= b; ++j) {
        r -= X.col(j) * beta[j];
        pen += prob.lambda1 * std::abs(beta[j]);
      }
      for (int j = a + 1; j <= b; ++j) pen += prob.lambda2 * std::abs(beta[j] - beta[j - 1]);
    }
    if (a > 0)
      pen += prob.lambda2 * std::abs((merged ? move.gamma : beta[a]) - beta[a - 1]);
    if (b + 1 < p)
      pen += prob.lambda2 * std::abs(beta[b + 1] - (merged ? move.gamma : beta[b]));
    return 0.5 * r.squaredNorm() + pen;
  };
  move.delta_objective = local(true) - local(false);
  return move;
}

}  // namespace detail

struct FusedSolveOptions {
  double tol = tol::convergence;
  int max_passes = 10000;  // per lambda2 grid point
};

/// Pathwise descent/fusion cycles for the general fused lasso,
/// run over an increasing lambda2 grid with warm starts. Fusion moves set
/// coefficient pairs (or already-equal runs) to a common value; fused sets are
/// never carried across grid points as constraints, so every grid point may
/// unfuse what the previous one joined. Best-effort: the certified flag
/// reports whether the subgradient system accepts the final point.
inline FusedFitResult fused_cd_solve(const GeneralFusedProblem& problem, double delta,
                                     const FusedSolveOptions& opts = {}) {
  const Matrix& X = problem.X.values;
  const Eigen::Index p = X.cols();
  if (problem.y.size() != X.rows()) throw InvalidArgumentError("X and y size mismatch");
  if (!problem.y.allFinite()) throw NonFiniteError("fused response");
  require_finite(X, "fused design");
  if (problem.lambda1 < 0.0 || problem.lambda2 < 0.0)
    throw InvalidArgumentError("penalties must be >= 0");
  if (!(delta > 0.0)) throw InvalidArgumentError("delta must be > 0");

  Vector col_ss(p);
  for (Eigen::Index j = 0; j < p; ++j) col_ss[j] = X.col(j).squaredNorm();

  // lambda2 = 0 start: plain weighted-column lasso on this design.
  GeneralFusedProblem sub = problem;
  sub.lambda2 = 0.0;
  Vector beta = Vector::Zero(p);
  {
    const lasso::FitResult init = lasso::l1_cd_weighted(
        X, problem.y, problem.lambda1, Vector::Ones(p), beta, opts.tol, opts.max_passes);
    beta = init.coefficients;
  }

  FusedFitResult result;

  // One lambda2 grid point: descent sweeps with pair-fusion attempts, then
  // joint moves of maximal equal-valued runs, until a pass changes nothing.
  auto run_point = [&](double lambda2_value, double tol_value) -> bool {
    sub.lambda2 = lambda2_value;
    Vector residual = problem.y - X * beta;
    for (int pass = 0; pass < opts.max_passes; ++pass) {
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        // Descent: exact single-coordinate minimizer.
        const double old = beta[j];
        double ss = col_ss[j];
        double center = 0.0;
        const double u = X.col(j).dot(residual) + ss * old;
        if (ss < 1e-12)
          ss = 1e-12;
        else
          center = u / ss;
        std::vector<AbsTerm> terms;
        if (j > 0) terms.push_back({sub.lambda2, beta[j - 1]});
        if (j + 1 < p) terms.push_back({sub.lambda2, beta[j + 1]});
        const double next = piecewise_quadratic_min(ss, center, sub.lambda1, terms);
        if (next != old) {
          residual += X.col(j) * (old - next);
          beta[j] = next;
          max_change = std::max(max_change, std::abs(next - old));
        }
        if (std::abs(next - old) <= tol_value && j > 0) {
          // Fusion: try moving the (j-1, j) pair to a common value.
          const detail::BlockMove mv =
              detail::block_candidate(sub, beta, residual, static_cast<int>(j - 1),
                                      static_cast<int>(j));
          if (mv.delta_objective < -1e-14) {
            const double cl = std::abs(mv.gamma - beta[j - 1]);
            const double cr = std::abs(mv.gamma - beta[j]);
            residual += X.col(j - 1) * (beta[j - 1] - mv.gamma) + X.col(j) * (beta[j] - mv.gamma);
            beta[j - 1] = mv.gamma;
            beta[j] = mv.gamma;
            max_change = std::max({max_change, cl, cr});
          }
        }
      }
      // Joint moves of maximal equal-valued runs.
      int a = 0;
      for (int j = 1; j <= static_cast<int>(p); ++j) {
        if (j == static_cast<int>(p) || std::abs(beta[j] - beta[a]) > tol::equality) {
          if (j - 1 > a) {
            const detail::BlockMove mv =
                detail::block_candidate(sub, beta, residual, a, j - 1);
            if (mv.delta_objective < -1e-14) {
              for (int t = a; t <= j - 1; ++t) {
                residual += X.col(t) * (beta[t] - mv.gamma);
                max_change = std::max(max_change, std::abs(beta[t] - mv.gamma));
                beta[t] = mv.gamma;
              }
            }
          }
          a = j;
        }
      }
      ++result.iterations;
      if (max_change < tol_value) return true;
    }
    return false;
  };

  int grid_index = 0;
  double lambda2 = 0.0;
  while (true) {
    if (!run_point(lambda2, opts.tol)) throw NotConvergedError("fused cycles", grid_index);
    if (lambda2 >= problem.lambda2) break;
    ++grid_index;
    lambda2 = std::min(problem.lambda2, static_cast<double>(grid_index) * delta);
  }
  // Per-pass change understates the distance to the fixed point when
  // convergence is slow; polish at a tighter tolerance before certifying.
  if (!run_point(problem.lambda2, std::max(opts.tol * 1e-3, 1e-13)))
    throw NotConvergedError("fused polish", grid_index);

  result.coefficients = beta;
  result.converged = true;
  result.objective = general_fused_objective(problem, beta);
  result.fused_runs = flsa::constant_runs(beta);
  const Vector grad = X.transpose() * (X * beta - problem.y);
  const oracle::KktCertificate cert = oracle::kkt_check_graph_grad(
      grad, beta, Vector::Constant(p, problem.lambda1),
      oracle::chain_edges(p, problem.lambda2));
  result.certified = cert.feasible;
  result.certificate_violation = cert.max_violation;
  return result;
}

}  // namespace pathwise::fused
