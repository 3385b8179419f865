#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "pathwise/errors.hpp"

namespace pathwise {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Default tolerances, named once so every module quotes the same values.
namespace tol {
inline constexpr double convergence = 1e-8;   // max coefficient change per sweep
inline constexpr double equality = 1e-9;      // two parameters count as equal/fused
inline constexpr double kkt = 1e-6;           // certificate slack
inline constexpr double standardized_mean = 1e-12;  // per-column mean, times n
inline constexpr double standardized_ss = 1e-10;    // per-column |sum of squares - 1|
}  // namespace tol

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Standardized predictor matrix: each column has mean 0 and sum of squares 1.
/// Means and scales of the raw input are kept for back-transformation.
struct DesignMatrix {
  Matrix values;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Vector column_means;
  Vector column_scales;

  bool is_standardized(double mean_tol = tol::standardized_mean,
                       double ss_tol = tol::standardized_ss) const {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(values.col(j).mean()) >= mean_tol * static_cast<double>(n)) return false;
      if (std::abs(values.col(j).squaredNorm() - 1.0) >= ss_tol) return false;
    }
    return true;
  }
};

struct ResponseVector {
  Vector values;
};

struct CoefficientVector {
  Vector values;
};

inline void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& where) {
  if (!m.allFinite()) throw NonFiniteError(where);
}

inline DesignMatrix standardize(const Matrix& raw) {
  require_finite(raw, "standardize input");
  if (raw.rows() < 1 || raw.cols() < 1)
    throw InvalidArgumentError("standardize: empty matrix");
  DesignMatrix out;
  out.n = raw.rows();
  out.p = raw.cols();
  out.values = raw;
  out.column_means.resize(out.p);
  out.column_scales.resize(out.p);
  for (Eigen::Index j = 0; j < out.p; ++j) {
    const double mean = raw.col(j).mean();
    out.values.col(j).array() -= mean;
    const double ss = out.values.col(j).squaredNorm();
    if (ss <= 0.0) throw ConstantColumnError(static_cast<int>(j));
    const double scale = std::sqrt(ss);
    out.values.col(j) /= scale;
    out.column_means[j] = mean;
    out.column_scales[j] = scale;
  }
  return out;
}

/// m observations with strictly positive weights; the collapsed FLSA problem
/// and the LAD coordinate step both live in this shape.
struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;
};

/// Minimizer of sum_i w_i |v_i - m|. When the minimizing set is an interval,
/// returns its lower endpoint.
inline double weighted_median(const WeightedSample& sample) {
  const std::size_t m = sample.values.size();
  if (m == 0) throw EmptySampleError();
  if (sample.weights.size() != m)
    throw InvalidArgumentError("weighted_median: values/weights length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(sample.weights[i] > 0.0))
      throw InvalidArgumentError("weighted_median: weights must be strictly positive");
    if (!std::isfinite(sample.values[i])) throw NonFiniteError("weighted_median");
    total += sample.weights[i];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample.values[a] < sample.values[b];
  });
  // The objective's subderivative at v_(k) jumps from cum - w_(k) - rest to
  // cum - rest; the first point where the left sum reaches half the total
  // weight is the lowest minimizer.
  double cum = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    cum += sample.weights[order[r]];
    if (cum * 2.0 >= total) return sample.values[order[r]];
  }
  return sample.values[order[m - 1]];
}

/// Inner products needed by the coordinate updates: <x_j, y> for all j, and
/// <x_j, x_k> columns for every feature k that has entered the model. Gradient
/// evaluation then costs O(#active) per coordinate instead of O(n).
class InnerProductCache {
 public:
  InnerProductCache() = default;

  InnerProductCache(const DesignMatrix& X, const Vector& y)
      : p_(X.p), xty_(X.values.transpose() * y), active_(static_cast<std::size_t>(X.p), false) {}

  const Vector& xty() const { return xty_; }

  bool is_active(Eigen::Index k) const { return active_[static_cast<std::size_t>(k)]; }

  const std::vector<Eigen::Index>& active_set() const { return active_list_; }

  /// Adds <x_j, x_k> for all j. Reentry of a previously deactivated feature
  /// reuses its cached column.
  void activate(const DesignMatrix& X, Eigen::Index k) {
    if (is_active(k)) throw AlreadyActiveError(static_cast<int>(k));
    if (xtx_.find(k) == xtx_.end()) xtx_.emplace(k, X.values.transpose() * X.values.col(k));
    active_[static_cast<std::size_t>(k)] = true;
    active_list_.push_back(k);
  }

  void deactivate(Eigen::Index k) {
    if (!is_active(k)) return;
    active_[static_cast<std::size_t>(k)] = false;
    active_list_.erase(std::remove(active_list_.begin(), active_list_.end(), k),
                       active_list_.end());
  }

  double xtx(Eigen::Index j, Eigen::Index k) const { return xtx_.at(k)[j]; }

  /// Cached-form gradient: <x_j, y> - sum over active nonzero k of
  /// <x_j, x_k> beta_k.
  double gradient(Eigen::Index j, const Vector& beta) const {
    double g = xty_[j];
    for (Eigen::Index k : active_list_) {
      const double bk = beta[k];
      if (bk != 0.0) g -= xtx_.at(k)[j] * bk;
    }
    return g;
  }

 private:
  Eigen::Index p_ = 0;
  Vector xty_;
  std::vector<bool> active_;
  std::vector<Eigen::Index> active_list_;
  std::unordered_map<Eigen::Index, Vector> xtx_;
};

/// Exact minimizer of the scalar function
///   h(g) = a/2 (g - c)^2 + q |g| + sum_m r_m |g - d_m|
/// with a > 0, q >= 0, r_m >= 0. This is the single-coordinate subproblem of
/// every descent and fusion move: the derivative is piecewise linear with
/// breaks at 0 and the d_m, so we look for a zero crossing in each open
/// interval and fall back to the best breakpoint when none exists.
struct AbsTerm {
  double weight;
  double location;
};

inline double piecewise_quadratic_min(double a, double c, double q, const AbsTerm* terms,
                                      std::size_t nterms) {
  double stack_breaks[16];
  std::vector<double> heap_breaks;
  double* breaks = stack_breaks;
  if (nterms + 1 > 16) {
    heap_breaks.resize(nterms + 1);
    breaks = heap_breaks.data();
  }
  std::size_t nb = 0;
  if (q > 0.0) breaks[nb++] = 0.0;
  for (std::size_t m = 0; m < nterms; ++m)
    if (terms[m].weight > 0.0) breaks[nb++] = terms[m].location;
  std::sort(breaks, breaks + nb);
  nb = static_cast<std::size_t>(std::unique(breaks, breaks + nb) - breaks);

  if (nb == 0) return c;

  auto slope_sum = [&](double g) {
    // Sum of the sign terms of h' at a point g strictly between breakpoints.
    double s = 0.0;
    if (q > 0.0) s += q * (g > 0.0 ? 1.0 : -1.0);
    for (std::size_t m = 0; m < nterms; ++m)
      if (terms[m].weight > 0.0)
        s += terms[m].weight * (g > terms[m].location ? 1.0 : -1.0);
    return s;
  };

  for (std::size_t i = 0; i <= nb; ++i) {
    const double lo = (i == 0) ? -std::numeric_limits<double>::infinity() : breaks[i - 1];
    const double hi = (i == nb) ? std::numeric_limits<double>::infinity() : breaks[i];
    // Probe point inside the interval to fix the sign pattern.
    double probe;
    if (i == 0)
      probe = breaks[0] - 1.0;
    else if (i == nb)
      probe = breaks[nb - 1] + 1.0;
    else
      probe = 0.5 * (lo + hi);
    if (probe <= lo || probe >= hi) continue;  // degenerate interval
    const double root = c - slope_sum(probe) / a;
    if (root > lo && root < hi) return root;
  }

  // No interior zero crossing: the minimum sits on a breakpoint.
  auto value = [&](double g) {
    double v = 0.5 * a * (g - c) * (g - c) + q * std::abs(g);
    for (std::size_t m = 0; m < nterms; ++m)
      v += terms[m].weight * std::abs(g - terms[m].location);
    return v;
  };
  double best = breaks[0];
  double best_v = value(best);
  for (std::size_t i = 1; i < nb; ++i) {
    const double v = value(breaks[i]);
    if (v < best_v) {
      best_v = v;
      best = breaks[i];
    }
  }
  return best;
}

inline double piecewise_quadratic_min(double a, double c, double q,
                                      const std::vector<AbsTerm>& terms) {
  return piecewise_quadratic_min(a, c, q, terms.data(), terms.size());
}

}  // namespace pathwise
