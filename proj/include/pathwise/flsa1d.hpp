#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"

namespace pathwise::flsa {

struct PathSchedule {
  double delta;            // lambda2 increment, > 0
  double lambda2_target;   // >= 0
  double lambda1;          // fixed, >= 0
};

/// delta defaults to lambda2_target / 1000 when not supplied.
inline PathSchedule make_schedule(double lambda1, double lambda2_target, double delta = -1.0) {
  if (delta <= 0.0) delta = lambda2_target > 0.0 ? lambda2_target / 1000.0 : 1.0;
  return PathSchedule{delta, lambda2_target, lambda1};
}

/// The collapsed problem after m fusions: weighted pseudo-observations plus
/// the map back to original indices. Weights count the original observations
/// each collapsed coordinate represents.
struct FusionState1D {
  std::vector<double> yw;  // weighted segment means
  std::vector<double> w;   // positive integer-valued weights, sums to n
  std::vector<std::pair<int, int>> segments;  // inclusive original index ranges
  int m = 0;               // fusion count: n - yw.size()
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  int size() const { return static_cast<int>(yw.size()); }
  int original_n() const { return size() + m; }

  static FusionState1D from_response(const Vector& y, double lambda1, double lambda2) {
    FusionState1D s;
    const int n = static_cast<int>(y.size());
    s.yw.assign(y.data(), y.data() + n);
    s.w.assign(static_cast<std::size_t>(n), 1.0);
    s.segments.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s.segments.emplace_back(i, i);
    s.lambda1 = lambda1;
    s.lambda2 = lambda2;
    return s;
  }
};

struct FlsaSolution {
  Vector beta;  // expanded to the original n indices
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<std::pair<int, int>> fused_sets;  // maximal constant runs, inclusive
  int passes = 0;            // descent/fusion passes spent at this grid point
  bool a1_violation = false; // a permanent merge joined 3+ pre-existing groups
};

inline double flsa_objective(const Vector& y, const Vector& beta, double lambda1,
                             double lambda2) {
  double obj = 0.5 * (y - beta).squaredNorm() + lambda1 * beta.lpNorm<1>();
  for (Eigen::Index i = 1; i < beta.size(); ++i) obj += lambda2 * std::abs(beta[i] - beta[i - 1]);
  return obj;
}

/// Objective of the collapsed problem, without the dropped within-segment constant.
inline double collapsed_objective(const FusionState1D& s, const std::vector<double>& beta) {
  double obj = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    const double d = beta[static_cast<std::size_t>(i)] - s.yw[static_cast<std::size_t>(i)];
    obj += 0.5 * s.w[static_cast<std::size_t>(i)] * d * d +
           s.lambda1 * s.w[static_cast<std::size_t>(i)] * std::abs(beta[static_cast<std::size_t>(i)]);
    if (i > 0)
      obj += s.lambda2 * std::abs(beta[static_cast<std::size_t>(i)] - beta[static_cast<std::size_t>(i - 1)]);
  }
  return obj;
}

inline Vector expand(const FusionState1D& s, const std::vector<double>& beta) {
  Vector full(s.original_n());
  for (int i = 0; i < s.size(); ++i) {
    const auto [lo, hi] = s.segments[static_cast<std::size_t>(i)];
    for (int j = lo; j <= hi; ++j) full[j] = beta[static_cast<std::size_t>(i)];
  }
  return full;
}

inline std::vector<std::pair<int, int>> constant_runs(const Vector& beta,
                                                      double eq_tol = tol::equality) {
  std::vector<std::pair<int, int>> runs;
  const int n = static_cast<int>(beta.size());
  int start = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || std::abs(beta[i] - beta[i - 1]) > eq_tol) {
      runs.emplace_back(start, i - 1);
      start = i;
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Descent and fusion moves on the collapsed problem

/// Exact single-coordinate minimizer for collapsed coordinate i: the
/// derivative is piecewise linear with breaks at 0 and the neighbor values.
inline double descent_step(const FusionState1D& s, const std::vector<double>& beta, int i) {
  AbsTerm terms[2];
  std::size_t nterms = 0;
  if (i > 0) terms[nterms++] = {s.lambda2, beta[static_cast<std::size_t>(i - 1)]};
  if (i + 1 < s.size()) terms[nterms++] = {s.lambda2, beta[static_cast<std::size_t>(i + 1)]};
  return piecewise_quadratic_min(s.w[static_cast<std::size_t>(i)],
                                 s.yw[static_cast<std::size_t>(i)],
                                 s.lambda1 * s.w[static_cast<std::size_t>(i)], terms, nterms);
}

struct FusionProposal {
  bool accepted = false;
  double gamma = 0.0;
};

namespace detail {

/// Objective terms touching coordinates i-1 and i only.
inline double pair_local_objective(const FusionState1D& s, const std::vector<double>& beta,
                                   int i, double left_value, double right_value) {
  const auto wi = s.w[static_cast<std::size_t>(i)];
  const auto wl = s.w[static_cast<std::size_t>(i - 1)];
  const double dl = left_value - s.yw[static_cast<std::size_t>(i - 1)];
  const double dr = right_value - s.yw[static_cast<std::size_t>(i)];
  double obj = 0.5 * wl * dl * dl + 0.5 * wi * dr * dr +
               s.lambda1 * (wl * std::abs(left_value) + wi * std::abs(right_value)) +
               s.lambda2 * std::abs(right_value - left_value);
  if (i - 2 >= 0) obj += s.lambda2 * std::abs(left_value - beta[static_cast<std::size_t>(i - 2)]);
  if (i + 1 < s.size())
    obj += s.lambda2 * std::abs(beta[static_cast<std::size_t>(i + 1)] - right_value);
  return obj;
}

}  // namespace detail

/// Tries the fusion move: force beta[i-1] = beta[i] = gamma and minimize
/// over gamma. Applied (both coordinates set) only when the criterion
/// strictly decreases; the state itself is not collapsed.
inline FusionProposal fusion_step(const FusionState1D& s, std::vector<double>& beta, int i) {
  FusionProposal out;
  if (i <= 0 || i >= s.size()) return out;
  const double wl = s.w[static_cast<std::size_t>(i - 1)];
  const double wi = s.w[static_cast<std::size_t>(i)];
  const double wm = wl + wi;
  const double ym =
      (wl * s.yw[static_cast<std::size_t>(i - 1)] + wi * s.yw[static_cast<std::size_t>(i)]) / wm;
  AbsTerm terms[2];
  std::size_t nterms = 0;
  if (i - 2 >= 0) terms[nterms++] = {s.lambda2, beta[static_cast<std::size_t>(i - 2)]};
  if (i + 1 < s.size()) terms[nterms++] = {s.lambda2, beta[static_cast<std::size_t>(i + 1)]};
  const double gamma = piecewise_quadratic_min(wm, ym, s.lambda1 * wm, terms, nterms);

  const double before = detail::pair_local_objective(s, beta, i, beta[static_cast<std::size_t>(i - 1)],
                                                     beta[static_cast<std::size_t>(i)]);
  const double after = detail::pair_local_objective(s, beta, i, gamma, gamma);
  if (after < before - 1e-13 * (1.0 + std::abs(before))) {
    beta[static_cast<std::size_t>(i - 1)] = gamma;
    beta[static_cast<std::size_t>(i)] = gamma;
    out.accepted = true;
    out.gamma = gamma;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Permanent collapsing

struct CollapseResult {
  FusionState1D state;
  std::vector<double> beta;
  int merges = 0;         // collapsed coordinates removed
  int max_joined = 1;     // most pre-existing groups joined into one new group
};

/// Merges maximal runs of equal nonzero adjacent coefficients into weighted
/// pseudo-observations. Zero-valued neighbors stay separate so the
/// soft-threshold path in lambda1 remains valid.
inline CollapseResult collapse(const FusionState1D& s, const std::vector<double>& beta,
                               double eq_tol = tol::equality) {
  CollapseResult out;
  out.state.lambda1 = s.lambda1;
  out.state.lambda2 = s.lambda2;
  const int k = s.size();
  int i = 0;
  while (i < k) {
    int j = i;
    if (std::abs(beta[static_cast<std::size_t>(i)]) > eq_tol) {
      while (j + 1 < k &&
             std::abs(beta[static_cast<std::size_t>(j + 1)]) > eq_tol &&
             std::abs(beta[static_cast<std::size_t>(j + 1)] - beta[static_cast<std::size_t>(i)]) <= eq_tol)
        ++j;
    }
    double wsum = 0.0, ysum = 0.0;
    for (int t = i; t <= j; ++t) {
      wsum += s.w[static_cast<std::size_t>(t)];
      ysum += s.w[static_cast<std::size_t>(t)] * s.yw[static_cast<std::size_t>(t)];
    }
    out.state.yw.push_back(ysum / wsum);
    out.state.w.push_back(wsum);
    out.state.segments.emplace_back(s.segments[static_cast<std::size_t>(i)].first,
                                    s.segments[static_cast<std::size_t>(j)].second);
    out.beta.push_back(beta[static_cast<std::size_t>(i)]);
    out.merges += j - i;
    out.max_joined = std::max(out.max_joined, j - i + 1);
    i = j + 1;
  }
  out.state.m = s.original_n() - out.state.size();
  return out;
}

// ---------------------------------------------------------------------------
// Cycles

struct CycleOptions {
  double tol = tol::convergence;
  int max_passes = 10000;
  bool enable_fusion = true;
};

struct CycleOutcome {
  int passes = 0;
  bool converged = false;
};

namespace detail {

/// Joint descent move for a maximal run of equal-valued coordinates [a, b]:
/// the run already shares one value, so descending in the shared gamma is a
/// legal move whether or not the run is permanently collapsed. Zero-valued
/// runs are never collapsed, and this is the only move that can lift one.
inline double equal_run_move(const FusionState1D& s, std::vector<double>& beta, int a, int b) {
  double wsum = 0.0, ysum = 0.0, old_local = 0.0;
  const double old_value = beta[static_cast<std::size_t>(a)];
  for (int i = a; i <= b; ++i) {
    const double wi = s.w[static_cast<std::size_t>(i)];
    wsum += wi;
    ysum += wi * s.yw[static_cast<std::size_t>(i)];
  }
  AbsTerm terms[2];
  std::size_t nterms = 0;
  if (a > 0) terms[nterms++] = {s.lambda2, beta[static_cast<std::size_t>(a - 1)]};
  if (b + 1 < s.size()) terms[nterms++] = {s.lambda2, beta[static_cast<std::size_t>(b + 1)]};
  const double gamma = piecewise_quadratic_min(wsum, ysum / wsum, s.lambda1 * wsum, terms, nterms);

  auto local = [&](double g) {
    double v = 0.0;
    for (int i = a; i <= b; ++i) {
      const double wi = s.w[static_cast<std::size_t>(i)];
      const double d = g - s.yw[static_cast<std::size_t>(i)];
      v += 0.5 * wi * d * d + s.lambda1 * wi * std::abs(g);
    }
    for (std::size_t m = 0; m < nterms; ++m)
      v += terms[m].weight * std::abs(g - terms[m].location);
    return v;
  };
  old_local = local(old_value);
  const double new_local = local(gamma);
  if (new_local < old_local - 1e-13 * (1.0 + std::abs(old_local))) {
    for (int i = a; i <= b; ++i) beta[static_cast<std::size_t>(i)] = gamma;
    return std::abs(gamma - old_value);
  }
  return 0.0;
}

/// Exact split of an equal-valued run [a, b] at every internal boundary: in a
/// chain the cut is a single edge, and within each ordering regime the cross
/// term is linear, so both blocks reduce to tilted scalar problems. This is
/// the move that lets part of a zero run rise while the rest stays.
inline double equal_run_split(const FusionState1D& s, std::vector<double>& beta, int a,
                              int b) {
  const double v = beta[static_cast<std::size_t>(a)];
  const int len = b - a + 1;
  std::vector<double> cum_w(static_cast<std::size_t>(len) + 1, 0.0);
  std::vector<double> cum_wy(static_cast<std::size_t>(len) + 1, 0.0);
  for (int i = 0; i < len; ++i) {
    cum_w[static_cast<std::size_t>(i) + 1] =
        cum_w[static_cast<std::size_t>(i)] + s.w[static_cast<std::size_t>(a + i)];
    cum_wy[static_cast<std::size_t>(i) + 1] =
        cum_wy[static_cast<std::size_t>(i)] +
        s.w[static_cast<std::size_t>(a + i)] * s.yw[static_cast<std::size_t>(a + i)];
  }
  const bool has_left = a > 0;
  const bool has_right = b + 1 < s.size();
  const double left = has_left ? beta[static_cast<std::size_t>(a - 1)] : 0.0;
  const double right = has_right ? beta[static_cast<std::size_t>(b + 1)] : 0.0;

  auto block_value = [&](double g, double wsum, double wysum, double yy_unused) {
    (void)yy_unused;
    // Data and L1 terms up to the constant sum of w*y^2 over the block.
    return 0.5 * wsum * g * g - g * wysum + s.lambda1 * wsum * std::abs(g);
  };

  double best_gain = 0.0;
  int best_m = -1;
  double best_gl = v, best_gr = v;
  for (int m = 0; m < len - 1; ++m) {
    const double wl = cum_w[static_cast<std::size_t>(m) + 1];
    const double wyl = cum_wy[static_cast<std::size_t>(m) + 1];
    const double wr = cum_w[static_cast<std::size_t>(len)] - wl;
    const double wyr = cum_wy[static_cast<std::size_t>(len)] - wyl;
    auto candidate = [&](double tilt) {
      AbsTerm lt[1];
      std::size_t nl = 0;
      if (has_left) lt[nl++] = {s.lambda2, left};
      const double gl =
          piecewise_quadratic_min(wl, (wyl - tilt) / wl, s.lambda1 * wl, lt, nl);
      AbsTerm rt[1];
      std::size_t nr = 0;
      if (has_right) rt[nr++] = {s.lambda2, right};
      const double gr =
          piecewise_quadratic_min(wr, (wyr + tilt) / wr, s.lambda1 * wr, rt, nr);
      return std::make_pair(gl, gr);
    };
    auto local = [&](double gl, double gr) {
      double val = block_value(gl, wl, wyl, 0.0) + block_value(gr, wr, wyr, 0.0) +
                   s.lambda2 * std::abs(gl - gr);
      if (has_left) val += s.lambda2 * std::abs(gl - left);
      if (has_right) val += s.lambda2 * std::abs(right - gr);
      return val;
    };
    const double base = local(v, v);
    for (int regime = 0; regime < 2; ++regime) {
      const auto [gl, gr] = candidate(regime == 0 ? s.lambda2 : -s.lambda2);
      if ((regime == 0 && !(gl > gr)) || (regime == 1 && !(gl < gr))) continue;
      const double gain = base - local(gl, gr);
      if (gain > best_gain + 1e-13 * (1.0 + std::abs(base))) {
        best_gain = gain;
        best_m = m;
        best_gl = gl;
        best_gr = gr;
      }
    }
  }
  if (best_m < 0) return 0.0;
  for (int i = a; i <= a + best_m; ++i) beta[static_cast<std::size_t>(i)] = best_gl;
  for (int i = a + best_m + 1; i <= b; ++i) beta[static_cast<std::size_t>(i)] = best_gr;
  return std::max(std::abs(best_gl - v), std::abs(best_gr - v));
}

}  // namespace detail

/// One full pass: descend each coordinate; where the descent move is a no-op,
/// try fusing with the left neighbor; finally try joint moves of maximal
/// equal-valued runs. Repeats until a pass changes nothing beyond tol.
inline CycleOutcome run_cycles(const FusionState1D& s, std::vector<double>& beta,
                               const CycleOptions& opts = {}) {
  CycleOutcome out;
  for (int pass = 0; pass < opts.max_passes; ++pass) {
    double max_change = 0.0;
    for (int i = 0; i < s.size(); ++i) {
      const double old = beta[static_cast<std::size_t>(i)];
      const double next = descent_step(s, beta, i);
      const double change = std::abs(next - old);
      beta[static_cast<std::size_t>(i)] = next;
      max_change = std::max(max_change, change);
      if (change <= opts.tol && opts.enable_fusion && i > 0) {
        const double old_left = beta[static_cast<std::size_t>(i - 1)];
        const double old_self = beta[static_cast<std::size_t>(i)];
        const FusionProposal fp = fusion_step(s, beta, i);
        if (fp.accepted) {
          max_change = std::max({max_change, std::abs(fp.gamma - old_left),
                                 std::abs(fp.gamma - old_self)});
        }
      }
    }
    if (opts.enable_fusion) {
      int a = 0;
      for (int i = 1; i <= s.size(); ++i) {
        if (i == s.size() ||
            std::abs(beta[static_cast<std::size_t>(i)] - beta[static_cast<std::size_t>(a)]) >
                tol::equality) {
          if (i - 1 > a) {
            const double moved = detail::equal_run_move(s, beta, a, i - 1);
            max_change = std::max(max_change, moved);
            if (moved == 0.0)
              max_change = std::max(max_change, detail::equal_run_split(s, beta, a, i - 1));
          }
          a = i;
        }
      }
    }
    ++out.passes;
    if (max_change < opts.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Descent(+fusion) cycles at one fixed (lambda1, lambda2) on the
/// uncollapsed problem. This is the naive baseline that can get stuck at
/// corners; the full path algorithm below is the real solver.
struct DirectResult {
  Vector beta;
  int passes = 0;
  bool converged = false;
};

inline DirectResult descend_at(const Vector& y, double lambda1, double lambda2,
                               const Vector& init, const CycleOptions& opts = {}) {
  FusionState1D s = FusionState1D::from_response(y, lambda1, lambda2);
  std::vector<double> beta(init.data(), init.data() + init.size());
  const CycleOutcome oc = run_cycles(s, beta, opts);
  DirectResult out;
  out.beta = expand(s, beta);
  out.passes = oc.passes;
  out.converged = oc.converged;
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing cycle: the lambda2 path

struct SolveOptions {
  double tol = tol::convergence;
  int max_passes = 10000;  // per lambda2 grid point
};

/// Solves the signal-approximator objective over the schedule's lambda2 grid (0, delta, 2*delta, ...,
/// lambda2_target), warm-starting each point from the last and permanently
/// collapsing equal nonzero neighbors after each point. One FlsaSolution per
/// grid point, or per requested emit value when emit_at is given.
inline std::vector<FlsaSolution> flsa_solve_path(const Vector& y, const PathSchedule& schedule,
                                                 const SolveOptions& opts = {},
                                                 const std::vector<double>* emit_at = nullptr) {
  if (!(schedule.delta > 0.0)) throw InvalidArgumentError("schedule delta must be > 0");
  if (schedule.lambda1 < 0.0 || schedule.lambda2_target < 0.0)
    throw InvalidArgumentError("penalties must be >= 0");
  if (y.size() < 1) throw InvalidArgumentError("empty response");
  if (!y.allFinite()) throw NonFiniteError("flsa response");

  std::vector<double> stops{0.0};
  {
    int k = 1;
    double v = 0.0;
    while (v < schedule.lambda2_target) {
      v = std::min(schedule.lambda2_target, static_cast<double>(k) * schedule.delta);
      stops.push_back(v);
      ++k;
    }
    if (emit_at)
      for (double e : *emit_at) {
        if (e < 0.0 || e > schedule.lambda2_target)
          throw InvalidArgumentError("emit value outside the path range");
        stops.push_back(e);
      }
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  }

  std::vector<FlsaSolution> solutions;
  FusionState1D state = FusionState1D::from_response(y, schedule.lambda1, 0.0);
  std::vector<double> beta(state.yw.size());
  for (int i = 0; i < state.size(); ++i)
    beta[static_cast<std::size_t>(i)] =
        soft_threshold(state.yw[static_cast<std::size_t>(i)], schedule.lambda1);

  for (std::size_t si = 0; si < stops.size(); ++si) {
    const int grid_index = static_cast<int>(si);
    const double lambda2 = stops[si];
    state.lambda2 = lambda2;
    FlsaSolution sol;
    sol.lambda1 = schedule.lambda1;
    sol.lambda2 = lambda2;
    sol.a1_violation = false;

    // Cycles, then collapse; joint moves unlocked by a collapse are pursued
    // by rerunning the cycles at the same lambda2 until nothing more merges.
    std::vector<int> joined(beta.size(), 1);
    while (true) {
      const CycleOutcome oc = run_cycles(state, beta, {opts.tol, opts.max_passes, true});
      sol.passes += oc.passes;
      if (!oc.converged) throw NotConvergedError("flsa cycles", grid_index);
      CollapseResult cr = collapse(state, beta);
      if (cr.merges == 0) break;
      // Re-derive the per-coordinate join counts to track A1 across reruns.
      std::vector<int> joined_next;
      std::size_t src = 0;
      for (std::size_t g = 0; g < cr.state.yw.size(); ++g) {
        const auto [lo, hi] = cr.state.segments[g];
        int count = 0;
        while (src < state.segments.size() && state.segments[src].second <= hi) {
          count += joined[src];
          ++src;
        }
        joined_next.push_back(count);
      }
      state = std::move(cr.state);
      beta = std::move(cr.beta);
      joined = std::move(joined_next);
      for (int c : joined) sol.a1_violation = sol.a1_violation || (c >= 3);
    }

    const bool want = !emit_at || std::find(emit_at->begin(), emit_at->end(), lambda2) !=
                                      emit_at->end();
    if (want) {
      sol.beta = expand(state, beta);
      sol.fused_sets = constant_runs(sol.beta);
      solutions.push_back(std::move(sol));
    }
  }
  return solutions;
}

/// The solution at (lambda1_new >= lambda1, lambda2) is the componentwise
/// soft-thresholding of the given solution by (lambda1_new - lambda1).
inline FlsaSolution soft_threshold_path(const FlsaSolution& solution, double lambda1_new) {
  if (lambda1_new < solution.lambda1)
    throw InvalidPathError("lambda1_new must be >= the solution's lambda1");
  FlsaSolution out;
  out.lambda1 = lambda1_new;
  out.lambda2 = solution.lambda2;
  const double shift = lambda1_new - solution.lambda1;
  out.beta.resize(solution.beta.size());
  for (Eigen::Index i = 0; i < solution.beta.size(); ++i)
    out.beta[i] = soft_threshold(solution.beta[i], shift);
  out.fused_sets = constant_runs(out.beta);
  return out;
}

}  // namespace pathwise::flsa
