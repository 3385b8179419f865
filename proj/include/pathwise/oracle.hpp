#pragma once

#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"
#include "pathwise/lasso_family.hpp"

namespace pathwise::oracle {

// ---------------------------------------------------------------------------
// Subgradient variables and certificates

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
  bool fixed() const { return lo == hi; }
};

/// The (s, t) variables of the subgradient equations with their admissible
/// intervals: s_j pinned to sign(beta_j) when beta_j != 0, t pinned to the
/// sign of the corresponding difference when nonzero.
struct SubgradientVars {
  std::vector<Interval> s;
  std::vector<Interval> t;
};

struct KktCertificate {
  enum class Status { Feasible, Infeasible, Undecided };
  Status status = Status::Undecided;
  bool feasible = false;
  Vector s_witness;
  Vector t_witness;
  double max_violation = 0.0;

  static KktCertificate ok(Vector s, Vector t) {
    KktCertificate c;
    c.status = Status::Feasible;
    c.feasible = true;
    c.s_witness = std::move(s);
    c.t_witness = std::move(t);
    return c;
  }
  static KktCertificate bad(double violation) {
    KktCertificate c;
    c.status = Status::Infeasible;
    c.max_violation = violation;
    return c;
  }
  static KktCertificate undecided() { return KktCertificate{}; }
};

namespace detail {

inline Interval sign_interval(double v, double eq_tol) {
  if (v > eq_tol) return {1.0, 1.0};
  if (v < -eq_tol) return {-1.0, -1.0};
  return {-1.0, 1.0};
}

/// Chain propagation at a given per-equation slack. Feasible iff every
/// propagated interval stays consistent and the final boundary t_{n+1} = 0
/// is reachable.
struct ChainPass {
  bool feasible = false;
  double max_violation = 0.0;
  Vector s;
  Vector t;  // length n+1, t[0] = t[n] boundary zeros
};

inline ChainPass chain_pass(const Vector& y, const Vector& beta, double lambda1, double lambda2,
                            double eps, double eq_tol) {
  const Eigen::Index n = y.size();
  ChainPass out;
  out.s = Vector::Zero(n);
  out.t = Vector::Zero(n + 1);

  if (lambda2 == 0.0) {
    // Equations decouple: beta_j - y_j + lambda1 s_j = 0.
    double viol = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Interval sj = sign_interval(beta[j], eq_tol);
      const double target = y[j] - beta[j];
      const double lo = lambda1 * sj.lo, hi = lambda1 * sj.hi;
      const double v = std::max(0.0, std::max(lo - target, target - hi));
      viol = std::max(viol, v);
      out.s[j] = lambda1 > 0.0 ? std::clamp(target / lambda1, sj.lo, sj.hi) : 0.0;
    }
    out.feasible = viol <= eps;
    out.max_violation = viol;
    return out;
  }

  std::vector<Interval> admissible(static_cast<std::size_t>(n) + 1);  // t_1..t_{n+1}
  admissible[0] = {0.0, 0.0};
  for (Eigen::Index j = 1; j < n; ++j)
    admissible[static_cast<std::size_t>(j)] = sign_interval(beta[j] - beta[j - 1], eq_tol);
  admissible[static_cast<std::size_t>(n)] = {0.0, 0.0};

  std::vector<Interval> svars(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    svars[static_cast<std::size_t>(j)] = sign_interval(beta[j], eq_tol);

  // Forward pass: F_{j+1} from F_j through equation j, remembering the
  // feasible window of each t.
  std::vector<Interval> feas(static_cast<std::size_t>(n) + 1);
  feas[0] = {0.0, 0.0};
  double viol = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    // lambda2 t_{j+1} = lambda2 t_j + (beta_j - y_j) + lambda1 s_j, slack eps.
    const Interval& tj = feas[static_cast<std::size_t>(j)];
    const Interval& sj = svars[static_cast<std::size_t>(j)];
    const double base = beta[j] - y[j];
    double lo = lambda2 * tj.lo + base + lambda1 * sj.lo - eps;
    double hi = lambda2 * tj.hi + base + lambda1 * sj.hi + eps;
    lo /= lambda2;
    hi /= lambda2;
    const Interval& adm = admissible[static_cast<std::size_t>(j + 1)];
    const double ilo = std::max(lo, adm.lo);
    const double ihi = std::min(hi, adm.hi);
    if (ilo > ihi) {
      viol = std::max(viol, (ilo - ihi) * lambda2);
      // Project and continue so the reported violation covers the whole chain.
      const double mid = (lo > adm.hi) ? adm.hi : adm.lo;
      feas[static_cast<std::size_t>(j + 1)] = {mid, mid};
    } else {
      feas[static_cast<std::size_t>(j + 1)] = {ilo, ihi};
    }
  }
  if (viol > 0.0) {
    out.feasible = false;
    out.max_violation = viol;
    return out;
  }

  // Backward witness: pick each t_j consistent with the already-chosen
  // t_{j+1} and some admissible s_j.
  out.t[n] = 0.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const Interval& sj = svars[static_cast<std::size_t>(j)];
    const double base = beta[j] - y[j];
    // t_j = t_{j+1} - (base + lambda1 s_j)/lambda2 over s_j in S_j.
    double blo = out.t[j + 1] - (base + lambda1 * sj.hi) / lambda2;
    double bhi = out.t[j + 1] - (base + lambda1 * sj.lo) / lambda2;
    if (blo > bhi) std::swap(blo, bhi);
    const Interval& fj = feas[static_cast<std::size_t>(j)];
    const double lo = std::max(blo, fj.lo);
    const double hi = std::min(bhi, fj.hi);
    double tj;
    if (lo <= hi)
      tj = std::clamp(0.0, lo, hi);
    else
      tj = std::clamp(0.5 * (blo + bhi), fj.lo, fj.hi);
    out.t[j] = tj;
    if (lambda1 > 0.0)
      out.s[j] = std::clamp((lambda2 * (out.t[j + 1] - tj) - base) / lambda1, sj.lo, sj.hi);
    else
      out.s[j] = sj.fixed() ? sj.lo : 0.0;
  }
  out.feasible = true;
  return out;
}

}  // namespace detail

/// Subgradient feasibility for the FLSA chain, decided exactly by forward
/// interval propagation. A machine-slack pass runs first so witnesses from
/// tightly converged solutions zero the equations to rounding error; the
/// caller's tolerance is only used when that fails.
inline KktCertificate kkt_check_chain(const Vector& y, const Vector& beta, double lambda1,
                                      double lambda2, double tol = tol::kkt,
                                      double eq_tol = tol::equality) {
  if (y.size() != beta.size()) throw InvalidArgumentError("kkt_check_chain: length mismatch");
  const detail::ChainPass tight = detail::chain_pass(y, beta, lambda1, lambda2, 1e-12, eq_tol);
  if (tight.feasible)
    return KktCertificate::ok(tight.s, tight.t.segment(1, std::max<Eigen::Index>(y.size() - 1, 0)));
  const detail::ChainPass loose = detail::chain_pass(y, beta, lambda1, lambda2, tol, eq_tol);
  if (loose.feasible)
    return KktCertificate::ok(loose.s, loose.t.segment(1, std::max<Eigen::Index>(y.size() - 1, 0)));
  return KktCertificate::bad(loose.max_violation);
}

// ---------------------------------------------------------------------------
// General penalty graphs (covers 2D grids and the general fused lasso)

struct Edge {
  int i;
  int j;
  double weight;  // penalty on |beta_i - beta_j|
};

inline std::vector<Edge> chain_edges(Eigen::Index n, double lambda2) {
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(n - 1, 0)));
  for (Eigen::Index i = 1; i < n; ++i)
    edges.push_back({static_cast<int>(i - 1), static_cast<int>(i), lambda2});
  return edges;
}

/// Four-neighborhood edges of an n1 x n2 grid in row-major order; horizontal
/// edges weighted lambda2, vertical edges lambda3.
inline std::vector<Edge> grid_edges(int n1, int n2, double lambda2, double lambda3) {
  std::vector<Edge> edges;
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) {
      const int p = r * n2 + c;
      if (c + 1 < n2) edges.push_back({p, p + 1, lambda2});
      if (r + 1 < n1) edges.push_back({p, p + n2, lambda3});
    }
  return edges;
}

struct GraphKktOptions {
  double tol = tol::kkt;
  double eq_tol = tol::equality;
  int max_iters = 20000;
};

/// Subgradient feasibility for a general penalty graph in gradient form:
///   smooth_grad_i + l1_weight_i s_i + sum_{e=(i,j)} w_e t_e
///                 - sum_{e=(j,i)} w_e t_e = 0.
/// Free variables (s_i at zero coefficients, t_e across equal neighbors) are
/// solved as a box-constrained linear feasibility problem by iterative
/// projection; single-equation range checks give definite infeasibility.
inline KktCertificate kkt_check_graph_grad(const Vector& smooth_grad, const Vector& beta,
                                           const Vector& l1_weight,
                                           const std::vector<Edge>& edges,
                                           const GraphKktOptions& opts = {}) {
  const Eigen::Index n = beta.size();
  const Eigen::Index ne = static_cast<Eigen::Index>(edges.size());

  Vector s_val = Vector::Zero(n);
  Vector t_val = Vector::Zero(ne);

  // Variable layout: free s first, then free t.
  std::vector<int> s_free_idx(static_cast<std::size_t>(n), -1);
  std::vector<int> t_free_idx(static_cast<std::size_t>(ne), -1);
  int nfree = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Interval si = detail::sign_interval(beta[i], opts.eq_tol);
    if (si.fixed() || l1_weight[i] == 0.0)
      s_val[i] = si.fixed() ? si.lo : 0.0;
    else
      s_free_idx[static_cast<std::size_t>(i)] = nfree++;
  }
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto& ed = edges[static_cast<std::size_t>(e)];
    if (ed.weight == 0.0) continue;
    const Interval te = detail::sign_interval(beta[ed.i] - beta[ed.j], opts.eq_tol);
    if (te.fixed())
      t_val[e] = te.lo;
    else
      t_free_idx[static_cast<std::size_t>(e)] = nfree++;
  }

  // Equation rows over the free variables.
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(n));
  Vector rhs = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs[i] = -smooth_grad[i];
    if (s_free_idx[static_cast<std::size_t>(i)] >= 0)
      rows[static_cast<std::size_t>(i)].push_back({s_free_idx[static_cast<std::size_t>(i)], l1_weight[i]});
    else
      rhs[i] -= l1_weight[i] * s_val[i];
  }
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto& ed = edges[static_cast<std::size_t>(e)];
    if (ed.weight == 0.0) continue;
    const int f = t_free_idx[static_cast<std::size_t>(e)];
    if (f >= 0) {
      rows[static_cast<std::size_t>(ed.i)].push_back({f, ed.weight});
      rows[static_cast<std::size_t>(ed.j)].push_back({f, -ed.weight});
    } else {
      rhs[ed.i] -= ed.weight * t_val[e];
      rhs[ed.j] += ed.weight * t_val[e];
    }
  }

  // Range check per equation: the achievable interval of the free part is
  // [-sum|w|, sum|w|].
  double definite_violation = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double reach = 0.0;
    for (const auto& [f, w] : rows[static_cast<std::size_t>(i)]) reach += std::abs(w);
    const double excess = std::abs(rhs[i]) - reach;
    if (excess > opts.tol) definite_violation = std::max(definite_violation, excess);
  }
  if (definite_violation > 0.0) return KktCertificate::bad(definite_violation);

  // Presolve: an equation whose free part is a single variable determines it
  // outright; pinning and substituting cascades through chains and trees and
  // leaves the projection step only the truly coupled remainder.
  std::vector<char> pinned(static_cast<std::size_t>(nfree), 0);
  Vector pinned_value = Vector::Zero(nfree);
  {
    std::vector<char> row_done(static_cast<std::size_t>(n), 0);
    bool changed = true;
    while (changed) {
      changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (row_done[static_cast<std::size_t>(i)]) continue;
        double residual = rhs[i];
        int free_count = 0;
        int free_idx = -1;
        double free_w = 0.0;
        for (const auto& [f, w] : rows[static_cast<std::size_t>(i)]) {
          if (pinned[static_cast<std::size_t>(f)]) {
            residual -= w * pinned_value[f];
          } else {
            ++free_count;
            free_idx = f;
            free_w = w;
          }
        }
        if (free_count == 0) {
          if (std::abs(residual) > opts.tol) return KktCertificate::bad(std::abs(residual));
          row_done[static_cast<std::size_t>(i)] = 1;
          changed = true;
        } else if (free_count == 1) {
          const double value = residual / free_w;
          const double excess = (std::abs(value) - 1.0) * std::abs(free_w);
          if (excess > opts.tol) return KktCertificate::bad(excess);
          pinned[static_cast<std::size_t>(free_idx)] = 1;
          pinned_value[free_idx] = std::clamp(value, -1.0, 1.0);
          row_done[static_cast<std::size_t>(i)] = 1;
          changed = true;
        }
      }
    }
    bool all_done = true;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!row_done[static_cast<std::size_t>(i)]) all_done = false;
    if (all_done) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (s_free_idx[static_cast<std::size_t>(i)] >= 0)
          s_val[i] = pinned_value[s_free_idx[static_cast<std::size_t>(i)]];
      for (Eigen::Index e = 0; e < ne; ++e)
        if (t_free_idx[static_cast<std::size_t>(e)] >= 0)
          t_val[e] = pinned_value[t_free_idx[static_cast<std::size_t>(e)]];
      return KktCertificate::ok(s_val, t_val);
    }
  }

  // Iterative projection onto each equation's hyperplane, clipped to the box.
  Vector x = pinned_value;
  double worst = 0.0;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      if (row.empty()) {
        worst = std::max(worst, std::abs(rhs[i]));
        continue;
      }
      double dot = 0.0, norm2 = 0.0;
      for (const auto& [f, w] : row) {
        dot += w * x[f];
        norm2 += w * w;
      }
      const double resid = rhs[i] - dot;
      worst = std::max(worst, std::abs(resid));
      const double step = resid / norm2;
      for (const auto& [f, w] : row) x[f] = std::clamp(x[f] + step * w, -1.0, 1.0);
    }
    if (worst <= opts.tol * 0.1) break;
  }
  // Evaluate the residuals at the final clipped point.
  double final_worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double dot = 0.0;
    for (const auto& [f, w] : rows[static_cast<std::size_t>(i)]) dot += w * x[f];
    final_worst = std::max(final_worst, std::abs(rhs[i] - dot));
  }
  if (final_worst <= opts.tol) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (s_free_idx[static_cast<std::size_t>(i)] >= 0)
        s_val[i] = x[s_free_idx[static_cast<std::size_t>(i)]];
    for (Eigen::Index e = 0; e < ne; ++e)
      if (t_free_idx[static_cast<std::size_t>(e)] >= 0)
        t_val[e] = x[t_free_idx[static_cast<std::size_t>(e)]];
    return KktCertificate::ok(s_val, t_val);
  }
  return KktCertificate::undecided();
}

/// Identity-design form: smooth gradient is beta - y.
inline KktCertificate kkt_check_graph(const Vector& y, const Vector& beta, double lambda1,
                                      const std::vector<Edge>& edges,
                                      const GraphKktOptions& opts = {}) {
  return kkt_check_graph_grad(beta - y, beta, Vector::Constant(beta.size(), lambda1), edges,
                              opts);
}

// ---------------------------------------------------------------------------
// Transformed-lasso oracle for FLSA chains

/// Exact FLSA solution at lambda1 = 0 via the theta_j = beta_j - beta_{j-1}
/// reparametrization: a lasso on the dense cumulative-sum design with
/// theta_1 unpenalized. Slow but independent of the pathwise machinery.
inline Vector flsa_oracle_transformed(const Vector& y, double lambda2, double tol = 1e-10,
                                      int max_sweeps = 100000) {
  const Eigen::Index n = y.size();
  if (n < 1) throw InvalidArgumentError("empty response");
  Matrix L = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) L.col(j).tail(n - j).setOnes();
  Vector penalty_factor = Vector::Ones(n);
  penalty_factor[0] = 0.0;
  Vector theta = Vector::Zero(n);
  theta[0] = y.mean();
  const lasso::FitResult fit =
      lasso::l1_cd_weighted(L, y, lambda2, penalty_factor, theta, tol, max_sweeps);
  if (!fit.converged) throw NotConvergedError("transformed-lasso oracle");
  Vector beta(n);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += fit.coefficients[j];
    beta[j] = acc;
  }
  return beta;
}

/// Exact FLSA solution at any (lambda1, lambda2): soft-thresholds
/// the lambda1 = 0 oracle solution.
inline Vector flsa_oracle(const Vector& y, double lambda1, double lambda2, double tol = 1e-10) {
  Vector beta = flsa_oracle_transformed(y, lambda2, tol);
  for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = soft_threshold(beta[i], lambda1);
  return beta;
}

// ---------------------------------------------------------------------------
// Proximal reference solvers (objective upper-bound certificates)

struct ProxResult {
  Vector beta;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// Fused chain objective with a general design (identity X gives
/// the FLSA objective).
struct FusedChainProblem {
  Matrix X;
  Vector y;
  double lambda1;
  double lambda2;
};

/// 2D grid objective with per-orientation fusion weights.
struct FusedGridProblem {
  Matrix y;  // n1 x n2 pixel values
  double lambda1;
  double lambda2;  // horizontal differences
  double lambda3;  // vertical differences
};

using ReferenceProblem = std::variant<lasso::SeparableProblem, FusedChainProblem, FusedGridProblem>;

namespace detail {

inline double power_iteration_norm(const Matrix& A, int iters = 200) {
  // Largest eigenvalue of A^T A.
  Vector v = Vector::Ones(A.cols()).normalized();
  double lam = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector w = A.transpose() * (A * v);
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return lam;
}

/// FISTA on smooth-plus-prox composites; the returned objective is the best
/// true objective over the iterate sequence.
template <class GradFn, class ProxFn, class ObjFn>
ProxResult fista(Eigen::Index dim, double lipschitz, int iterations, GradFn&& grad,
                 ProxFn&& prox, ObjFn&& objective) {
  const double step = 1.0 / std::max(lipschitz, 1e-12);
  Vector beta = Vector::Zero(dim);
  Vector momentum = beta;
  double t_acc = 1.0;
  ProxResult out;
  out.beta = beta;
  out.objective = objective(beta);
  for (int k = 0; k < iterations; ++k) {
    Vector next = prox(momentum - step * grad(momentum), step);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    momentum = next + ((t_acc - 1.0) / t_next) * (next - beta);
    beta = std::move(next);
    t_acc = t_next;
    const double obj = objective(beta);
    if (!std::isfinite(obj)) throw DivergedError("fista objective is not finite");
    if (obj < out.objective) {
      out.objective = obj;
      out.beta = beta;
    }
    out.iterations = k + 1;
  }
  return out;
}

inline ProxResult prox_separable(const lasso::SeparableProblem& problem, int iterations) {
  const Matrix* X = &problem.X.values;
  Matrix scaled;  // garotte works on columns scaled by the least-squares fit
  const Vector& y = problem.y;

  struct PenaltyOps {
    std::function<Vector(const Vector&, double)> prox;
    std::function<double(const Vector&)> value;
    bool nonneg = false;
  } ops;

  const auto& pen = problem.penalty;
  if (const auto* p = std::get_if<lasso::Lasso>(&pen)) {
    const double l = p->lambda;
    ops.prox = [l](const Vector& z, double t) {
      Vector out(z.size());
      for (Eigen::Index j = 0; j < z.size(); ++j) out[j] = soft_threshold(z[j], l * t);
      return out;
    };
  } else if (const auto* p = std::get_if<lasso::ElasticNet>(&pen)) {
    const double l1 = p->lambda1, l2 = p->lambda2;
    ops.prox = [l1, l2](const Vector& z, double t) {
      Vector out(z.size());
      for (Eigen::Index j = 0; j < z.size(); ++j)
        out[j] = soft_threshold(z[j], l1 * t) / (1.0 + l2 * t);
      return out;
    };
  } else if (const auto* p = std::get_if<lasso::Berhu>(&pen)) {
    const double l = p->lambda, d = p->delta;
    ops.prox = [l, d](const Vector& z, double t) {
      Vector out(z.size());
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double soft = soft_threshold(z[j], l * t);
        const double ridge = z[j] / (1.0 + l * t / d);
        const auto val = [&](double b) {
          return 0.5 * (b - z[j]) * (b - z[j]) + l * t * lasso::berhu_penalty_value(b, d);
        };
        out[j] = val(soft) <= val(ridge) ? soft : ridge;
      }
      return out;
    };
  } else if (const auto* p = std::get_if<lasso::Garotte>(&pen)) {
    if (!p->beta_ls) throw InvalidArgumentError("garotte reference needs beta_ls");
    scaled = problem.X.values;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) scaled.col(j) *= (*p->beta_ls)[j];
    X = &scaled;
    const double l = p->lambda;
    ops.prox = [l](const Vector& z, double t) {
      Vector out(z.size());
      for (Eigen::Index j = 0; j < z.size(); ++j) out[j] = std::max(0.0, z[j] - l * t);
      return out;
    };
  } else if (const auto* p = std::get_if<lasso::GroupedLasso>(&pen)) {
    const auto groups = p->groups;
    const double l = p->lambda;
    ops.prox = [groups, l](const Vector& z, double t) {
      Vector out = z;
      for (const auto& g : groups) {
        double ss = 0.0;
        for (Eigen::Index j : g) ss += z[j] * z[j];
        const double norm = std::sqrt(ss);
        const double lam_g = l * std::sqrt(static_cast<double>(g.size())) * t;
        const double scale = norm > lam_g ? (norm - lam_g) / norm : 0.0;
        for (Eigen::Index j : g) out[j] = z[j] * scale;
      }
      return out;
    };
  } else {
    throw InvalidArgumentError("no proximal reference for this penalty");
  }

  const Matrix& Xr = *X;
  const double lipschitz = power_iteration_norm(Xr);
  auto grad = [&](const Vector& b) -> Vector { return Xr.transpose() * (Xr * b - y); };
  auto obj = [&](const Vector& b) {
    return lasso::objective_value(problem.X, y, problem.penalty, b);
  };
  return fista(Xr.cols(), lipschitz, iterations, grad, ops.prox, obj);
}

/// ADMM on 0.5||y - X b||^2 + sum_k w_k |(A b)_k| with A = [I; D] stacked and
/// per-row weights; the beta update solves a fixed SPD system.
inline ProxResult admm_l1_analysis(const Matrix& X, const Vector& y,
                                   const Eigen::SparseMatrix<double>& D, const Vector& weights,
                                   std::function<double(const Vector&)> objective,
                                   int iterations, double rho, double stop_tol) {
  const Eigen::Index p = X.cols();
  const Eigen::Index m = D.rows();
  Eigen::SparseMatrix<double> identity(p, p);
  identity.setIdentity();
  Eigen::SparseMatrix<double> XtX = (X.transpose() * X).sparseView();
  Eigen::SparseMatrix<double> M = XtX + rho * identity + rho * Eigen::SparseMatrix<double>(D.transpose() * D);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(M);
  if (solver.info() != Eigen::Success) throw DivergedError("ADMM factorization failed");

  const Vector Xty = X.transpose() * y;
  Vector beta = Vector::Zero(p);
  Vector z1 = Vector::Zero(p), u1 = Vector::Zero(p);
  Vector z2 = Vector::Zero(m), u2 = Vector::Zero(m);

  ProxResult out;
  out.beta = beta;
  out.objective = objective(beta);
  for (int k = 0; k < iterations; ++k) {
    beta = solver.solve(Xty + rho * (z1 - u1) + rho * (D.transpose() * (z2 - u2)));
    const Vector Db = D * beta;
    Vector z1_old = z1, z2_old = z2;
    for (Eigen::Index j = 0; j < p; ++j) z1[j] = soft_threshold(beta[j] + u1[j], weights[j] / rho);
    for (Eigen::Index e = 0; e < m; ++e)
      z2[e] = soft_threshold(Db[e] + u2[e], weights[p + e] / rho);
    u1 += beta - z1;
    u2 += Db - z2;
    const double primal = std::sqrt((beta - z1).squaredNorm() + (Db - z2).squaredNorm());
    const double dual = rho * std::sqrt((z1 - z1_old).squaredNorm() + (z2 - z2_old).squaredNorm());
    const double obj = objective(beta);
    if (!std::isfinite(obj)) throw DivergedError("ADMM objective is not finite");
    if (obj < out.objective) {
      out.objective = obj;
      out.beta = beta;
    }
    const double obj_z = objective(z1);
    if (obj_z < out.objective) {
      out.objective = obj_z;
      out.beta = z1;
    }
    out.iterations = k + 1;
    if (primal < stop_tol && dual < stop_tol) break;
  }
  return out;
}

inline Eigen::SparseMatrix<double> chain_diff(Eigen::Index n) {
  Eigen::SparseMatrix<double> D(std::max<Eigen::Index>(n - 1, 0), n);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 1; i < n; ++i) {
    trip.emplace_back(i - 1, i - 1, -1.0);
    trip.emplace_back(i - 1, i, 1.0);
  }
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

inline Eigen::SparseMatrix<double> grid_diff(int n1, int n2, std::vector<double>* edge_weights,
                                             double lambda2, double lambda3) {
  std::vector<Eigen::Triplet<double>> trip;
  int row = 0;
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) {
      const int pidx = r * n2 + c;
      if (c + 1 < n2) {
        trip.emplace_back(row, pidx, -1.0);
        trip.emplace_back(row, pidx + 1, 1.0);
        edge_weights->push_back(lambda2);
        ++row;
      }
      if (r + 1 < n1) {
        trip.emplace_back(row, pidx, -1.0);
        trip.emplace_back(row, pidx + n2, 1.0);
        edge_weights->push_back(lambda3);
        ++row;
      }
    }
  Eigen::SparseMatrix<double> D(row, n1 * n2);
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

}  // namespace detail

struct ReferenceOptions {
  int iterations = 20000;
  double rho = 1.0;         // ADMM penalty parameter
  double stop_tol = 1e-10;  // ADMM residual early stop
};

inline double fused_chain_objective(const FusedChainProblem& prob, const Vector& beta) {
  double obj = 0.5 * (prob.y - prob.X * beta).squaredNorm() + prob.lambda1 * beta.lpNorm<1>();
  for (Eigen::Index i = 1; i < beta.size(); ++i)
    obj += prob.lambda2 * std::abs(beta[i] - beta[i - 1]);
  return obj;
}

inline double fused_grid_objective(const FusedGridProblem& prob,
                                   const Eigen::Ref<const Vector>& beta) {
  const int n1 = static_cast<int>(prob.y.rows());
  const int n2 = static_cast<int>(prob.y.cols());
  double obj = 0.0;
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) {
      const double b = beta[r * n2 + c];
      const double d = b - prob.y(r, c);
      obj += 0.5 * d * d + prob.lambda1 * std::abs(b);
      if (c + 1 < n2) obj += prob.lambda2 * std::abs(beta[r * n2 + c + 1] - b);
      if (r + 1 < n1) obj += prob.lambda3 * std::abs(beta[(r + 1) * n2 + c] - b);
    }
  return obj;
}

/// Generic reference solver: proximal gradient (FISTA) for the separable
/// penalties, ADMM splitting for the fused objectives. The reported
/// objective is attained by an actual iterate, so it is always a valid upper
/// bound on the optimum.
inline ProxResult proximal_reference(const ReferenceProblem& problem,
                                     const ReferenceOptions& opts = {}) {
  if (const auto* sep = std::get_if<lasso::SeparableProblem>(&problem))
    return detail::prox_separable(*sep, opts.iterations);
  if (const auto* chain = std::get_if<FusedChainProblem>(&problem)) {
    const Eigen::Index p = chain->X.cols();
    Vector weights(p + std::max<Eigen::Index>(p - 1, 0));
    weights.head(p).setConstant(chain->lambda1);
    weights.tail(std::max<Eigen::Index>(p - 1, 0)).setConstant(chain->lambda2);
    auto obj = [chain](const Vector& b) { return fused_chain_objective(*chain, b); };
    return detail::admm_l1_analysis(chain->X, chain->y, detail::chain_diff(p), weights, obj,
                                    opts.iterations, opts.rho, opts.stop_tol);
  }
  const auto& grid = std::get<FusedGridProblem>(problem);
  const int n1 = static_cast<int>(grid.y.rows());
  const int n2 = static_cast<int>(grid.y.cols());
  std::vector<double> edge_weights;
  const Eigen::SparseMatrix<double> D =
      detail::grid_diff(n1, n2, &edge_weights, grid.lambda2, grid.lambda3);
  Vector weights(n1 * n2 + static_cast<Eigen::Index>(edge_weights.size()));
  weights.head(n1 * n2).setConstant(grid.lambda1);
  for (std::size_t e = 0; e < edge_weights.size(); ++e)
    weights[n1 * n2 + static_cast<Eigen::Index>(e)] = edge_weights[e];
  Vector yv(n1 * n2);
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) yv[r * n2 + c] = grid.y(r, c);
  auto obj = [&grid](const Vector& b) { return fused_grid_objective(grid, b); };
  return detail::admm_l1_analysis(Matrix::Identity(n1 * n2, n1 * n2), yv, D, weights, obj,
                                  opts.iterations, opts.rho, opts.stop_tol);
}

// ---------------------------------------------------------------------------
// Separable-family certificates (used by solver post-condition checks)

/// Lasso/elastic-net/Berhu stationarity via the graph check with no edges;
/// the quadratic tail of the Berhu penalty folds into the smooth gradient.
inline KktCertificate kkt_check_separable(const lasso::SeparableProblem& problem,
                                          const Vector& beta, double tol = tol::kkt) {
  const Matrix& X = problem.X.values;
  Vector grad = X.transpose() * (X * beta - problem.y);
  Vector l1w(beta.size());
  if (const auto* p = std::get_if<lasso::Lasso>(&problem.penalty)) {
    l1w.setConstant(p->lambda);
  } else if (const auto* p = std::get_if<lasso::ElasticNet>(&problem.penalty)) {
    grad += p->lambda2 * beta;
    l1w.setConstant(p->lambda1);
  } else if (const auto* p = std::get_if<lasso::Berhu>(&problem.penalty)) {
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (std::abs(beta[j]) >= p->delta) {
        grad[j] += p->lambda * beta[j] / p->delta;
        l1w[j] = 0.0;
      } else {
        l1w[j] = p->lambda;
      }
    }
  } else {
    throw InvalidArgumentError("kkt_check_separable handles lasso/enet/berhu");
  }
  return kkt_check_graph_grad(grad, beta, l1w, {}, {tol, tol::equality, 1});
}

/// Grouped lasso blockwise optimality: ||S_g|| <= lambda_g at zero groups,
/// S_g = beta_g (1 + lambda_g/||beta_g||) otherwise.
inline KktCertificate kkt_check_grouped(const lasso::SeparableProblem& problem,
                                        const Vector& beta, double tol = tol::kkt) {
  const auto& pen = std::get<lasso::GroupedLasso>(problem.penalty);
  const Matrix& X = problem.X.values;
  const Vector r = problem.y - X * beta;
  double viol = 0.0;
  for (const auto& g : pen.groups) {
    const double lam_g = pen.lambda * std::sqrt(static_cast<double>(g.size()));
    Vector s(static_cast<Eigen::Index>(g.size()));
    Vector bg(static_cast<Eigen::Index>(g.size()));
    for (std::size_t c = 0; c < g.size(); ++c) {
      s[static_cast<Eigen::Index>(c)] = X.col(g[c]).dot(r) + beta[g[c]];
      bg[static_cast<Eigen::Index>(c)] = beta[g[c]];
    }
    const double bnorm = bg.norm();
    if (bnorm <= tol::equality) {
      viol = std::max(viol, s.norm() - lam_g);
    } else {
      viol = std::max(viol, (s - bg * (1.0 + lam_g / bnorm)).cwiseAbs().maxCoeff());
    }
  }
  if (viol <= tol) {
    KktCertificate c;
    c.status = KktCertificate::Status::Feasible;
    c.feasible = true;
    return c;
  }
  return KktCertificate::bad(viol);
}

/// Garotte nonnegative stationarity: gradient of the fit term plus lambda is
/// zero at positive coordinates and >= 0 at zero coordinates.
inline KktCertificate kkt_check_nonneg_garotte(const lasso::SeparableProblem& problem,
                                               const Vector& c, double tol = tol::kkt) {
  const auto& pen = std::get<lasso::Garotte>(problem.penalty);
  if (!pen.beta_ls) throw InvalidArgumentError("garotte certificate needs beta_ls");
  const Matrix& X = problem.X.values;
  const Vector& bls = *pen.beta_ls;
  const Vector r = problem.y - X * c.cwiseProduct(bls);
  double viol = 0.0;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    const double g = -bls[j] * X.col(j).dot(r) + pen.lambda;
    if (c[j] > tol::equality)
      viol = std::max(viol, std::abs(g));
    else
      viol = std::max(viol, -g);
  }
  if (viol <= tol) {
    KktCertificate cert;
    cert.status = KktCertificate::Status::Feasible;
    cert.feasible = true;
    return cert;
  }
  return KktCertificate::bad(viol);
}

}  // namespace pathwise::oracle
