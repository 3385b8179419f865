#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"
#include "pathwise/flsa1d.hpp"

namespace pathwise::flsa2d {

struct PixelGrid {
  Matrix values;  // n1 x n2
  int n1() const { return static_cast<int>(values.rows()); }
  int n2() const { return static_cast<int>(values.cols()); }
};

/// Grid objective; each unordered adjacent pair penalized once,
/// horizontal differences by lambda2 and vertical by lambda3.
inline double grid_objective(const Matrix& y, const Matrix& beta, double lambda1,
                             double lambda2, double lambda3) {
  double obj = 0.0;
  const int n1 = static_cast<int>(y.rows());
  const int n2 = static_cast<int>(y.cols());
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) {
      const double d = beta(r, c) - y(r, c);
      obj += 0.5 * d * d + lambda1 * std::abs(beta(r, c));
      if (c + 1 < n2) obj += lambda2 * std::abs(beta(r, c + 1) - beta(r, c));
      if (r + 1 < n1) obj += lambda3 * std::abs(beta(r + 1, c) - beta(r, c));
    }
  return obj;
}

/// Boundary weight between two groups, split by edge orientation so
/// anisotropic penalties stay exact under merge additivity.
struct BoundaryWeight {
  double horizontal = 0.0;
  double vertical = 0.0;
  double count() const { return horizontal + vertical; }
};

/// Contiguous pixel groups with sizes, means, current values and pairwise
/// boundary weights; the state the group criterion is written over.
class GroupPartition2D {
 public:
  struct Group {
    std::vector<int> members;  // pixel linear indices, row-major
    double size = 0.0;         // N_k
    double ybar = 0.0;
    double gamma = 0.0;
    bool alive = true;
    std::map<int, BoundaryWeight> nbr;  // ordered: fusion candidates scan ascending
  };

  GroupPartition2D(const PixelGrid& grid, double lambda1, double lambda2, double lambda3)
      : n1_(grid.n1()),
        n2_(grid.n2()),
        y_(grid.values),
        lambda1_(lambda1),
        lambda2_(lambda2),
        lambda3_(lambda3) {
    const int n = n1_ * n2_;
    groups_.resize(static_cast<std::size_t>(n));
    pixel_group_.resize(static_cast<std::size_t>(n));
    for (int r = 0; r < n1_; ++r)
      for (int c = 0; c < n2_; ++c) {
        const int p = r * n2_ + c;
        Group& g = groups_[static_cast<std::size_t>(p)];
        g.members = {p};
        g.size = 1.0;
        g.ybar = y_(r, c);
        g.gamma = soft_threshold(y_(r, c), lambda1_);
        if (c + 1 < n2_) g.nbr[p + 1].horizontal = 1.0;
        if (c > 0) g.nbr[p - 1].horizontal = 1.0;
        if (r + 1 < n1_) g.nbr[p + n2_].vertical = 1.0;
        if (r > 0) g.nbr[p - n2_].vertical = 1.0;
        pixel_group_[static_cast<std::size_t>(p)] = p;
      }
    live_ = n;
  }

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int live_count() const { return live_; }
  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  double lambda3() const { return lambda3_; }
  void set_penalties(double lambda1, double lambda2, double lambda3) {
    lambda1_ = lambda1;
    lambda2_ = lambda2;
    lambda3_ = lambda3;
  }
  const Group& group(int k) const { return groups_[static_cast<std::size_t>(k)]; }
  int group_of_pixel(int p) const { return pixel_group_[static_cast<std::size_t>(p)]; }
  int group_count() const { return static_cast<int>(groups_.size()); }

  /// Overrides the current values (valid on a freshly built partition, where
  /// groups are still single pixels).
  void init_values(const Matrix& beta) {
    for (int p = 0; p < n1_ * n2_; ++p)
      groups_[static_cast<std::size_t>(p)].gamma = beta(p / n2_, p % n2_);
  }

  double penalty_weight(const BoundaryWeight& w) const {
    return lambda2_ * w.horizontal + lambda3_ * w.vertical;
  }

  /// Exact minimizer of the group criterion in gamma_k alone; applied and returned.
  double descent_step(int k) {
    Group& g = groups_[static_cast<std::size_t>(k)];
    if (!g.alive) throw InvalidArgumentError("descent_step on a dead group");
    std::vector<AbsTerm> terms;
    terms.reserve(g.nbr.size());
    for (const auto& [k2, w] : g.nbr)
      terms.push_back({penalty_weight(w), groups_[static_cast<std::size_t>(k2)].gamma});
    g.gamma = piecewise_quadratic_min(g.size, g.ybar, lambda1_ * g.size, terms);
    return g.gamma;
  }

  struct FusionProposal {
    bool accepted = false;
    double gamma = 0.0;
  };

  /// Local criterion terms touching groups k and k2 at trial values.
  double pair_local(int k, int k2, double ga, double gb) const {
    const Group& a = groups_[static_cast<std::size_t>(k)];
    const Group& b = groups_[static_cast<std::size_t>(k2)];
    const double da = ga - a.ybar, db = gb - b.ybar;
    double v = 0.5 * a.size * da * da + 0.5 * b.size * db * db +
               lambda1_ * (a.size * std::abs(ga) + b.size * std::abs(gb));
    for (const auto& [kk, w] : a.nbr)
      v += penalty_weight(w) *
           std::abs(ga - (kk == k2 ? gb : groups_[static_cast<std::size_t>(kk)].gamma));
    for (const auto& [kk, w] : b.nbr)
      if (kk != k)
        v += penalty_weight(w) * std::abs(gb - groups_[static_cast<std::size_t>(kk)].gamma);
    return v;
  }

  /// Provisional fusion of adjacent groups k and k2: both values move to the
  /// merged minimizer iff the criterion strictly decreases. State unchanged.
  FusionProposal fusion_step(int k, int k2) {
    Group& a = groups_[static_cast<std::size_t>(k)];
    Group& b = groups_[static_cast<std::size_t>(k2)];
    if (!a.alive || !b.alive || a.nbr.find(k2) == a.nbr.end()) throw NotAdjacentError(k, k2);
    const double merged_size = a.size + b.size;
    const double merged_ybar = (a.size * a.ybar + b.size * b.ybar) / merged_size;

    // Merged neighbor weights are the sums over the pair.
    std::map<int, BoundaryWeight> merged_nbr;
    for (const auto& [kk, w] : a.nbr)
      if (kk != k2) {
        merged_nbr[kk].horizontal += w.horizontal;
        merged_nbr[kk].vertical += w.vertical;
      }
    for (const auto& [kk, w] : b.nbr)
      if (kk != k) {
        merged_nbr[kk].horizontal += w.horizontal;
        merged_nbr[kk].vertical += w.vertical;
      }
    std::vector<AbsTerm> terms;
    terms.reserve(merged_nbr.size());
    for (const auto& [kk, w] : merged_nbr)
      terms.push_back({penalty_weight(w), groups_[static_cast<std::size_t>(kk)].gamma});
    const double gamma =
        piecewise_quadratic_min(merged_size, merged_ybar, lambda1_ * merged_size, terms);

    FusionProposal out;
    const double before = pair_local(k, k2, a.gamma, b.gamma);
    const double after = pair_local(k, k2, gamma, gamma);
    if (after < before - 1e-13 * (1.0 + std::abs(before))) {
      a.gamma = gamma;
      b.gamma = gamma;
      out.accepted = true;
      out.gamma = gamma;
    }
    return out;
  }

  struct SplitProposal {
    bool accepted = false;
    double gamma_a = 0.0;
    double gamma_b = 0.0;
  };

  /// Exact joint minimization over (gamma_k, gamma_k2) allowing unequal
  /// values: in each ordering regime the cross term is linear, so both sides
  /// separate into tilted single-coordinate problems. Rescues pairs stuck at
  /// an equality corner that descent and fusion both leave in place.
  SplitProposal split_step(int k, int k2) {
    Group& a = groups_[static_cast<std::size_t>(k)];
    Group& b = groups_[static_cast<std::size_t>(k2)];
    const auto it = a.nbr.find(k2);
    if (!a.alive || !b.alive || it == a.nbr.end()) throw NotAdjacentError(k, k2);
    const double cross = penalty_weight(it->second);

    auto side_min = [&](const Group& g, int exclude, double tilt) {
      std::vector<AbsTerm> terms;
      terms.reserve(g.nbr.size());
      for (const auto& [kk, w] : g.nbr)
        if (kk != exclude)
          terms.push_back({penalty_weight(w), groups_[static_cast<std::size_t>(kk)].gamma});
      return piecewise_quadratic_min(g.size, g.ybar - tilt / g.size, lambda1_ * g.size, terms);
    };

    SplitProposal out;
    double best = pair_local(k, k2, a.gamma, b.gamma);
    double best_a = a.gamma, best_b = b.gamma;
    // Regime gamma_k > gamma_k2: + cross * (gamma_k - gamma_k2).
    {
      const double ga = side_min(a, k2, cross);
      const double gb = side_min(b, k, -cross);
      if (ga > gb) {
        const double v = pair_local(k, k2, ga, gb);
        if (v < best - 1e-13 * (1.0 + std::abs(best))) {
          best = v;
          best_a = ga;
          best_b = gb;
          out.accepted = true;
        }
      }
    }
    // Regime gamma_k < gamma_k2.
    {
      const double ga = side_min(a, k2, -cross);
      const double gb = side_min(b, k, cross);
      if (ga < gb) {
        const double v = pair_local(k, k2, ga, gb);
        if (v < best - 1e-13 * (1.0 + std::abs(best))) {
          best = v;
          best_a = ga;
          best_b = gb;
          out.accepted = true;
        }
      }
    }
    if (out.accepted) {
      a.gamma = best_a;
      b.gamma = best_b;
      out.gamma_a = best_a;
      out.gamma_b = best_b;
    }
    return out;
  }

  /// Permanent merge; k absorbs k2. Weights to any common
  /// neighbor add; the (k, k2) boundary disappears.
  void merge(int k, int k2) {
    Group& a = groups_[static_cast<std::size_t>(k)];
    Group& b = groups_[static_cast<std::size_t>(k2)];
    if (!a.alive || !b.alive || a.nbr.find(k2) == a.nbr.end()) throw NotAdjacentError(k, k2);
    const double merged_size = a.size + b.size;
    a.ybar = (a.size * a.ybar + b.size * b.ybar) / merged_size;
    a.size = merged_size;
    a.nbr.erase(k2);
    for (const auto& [kk, w] : b.nbr) {
      if (kk == k) continue;
      Group& other = groups_[static_cast<std::size_t>(kk)];
      a.nbr[kk].horizontal += w.horizontal;
      a.nbr[kk].vertical += w.vertical;
      BoundaryWeight& back = other.nbr[k];
      back.horizontal += w.horizontal;
      back.vertical += w.vertical;
      other.nbr.erase(k2);
    }
    for (int p : b.members) pixel_group_[static_cast<std::size_t>(p)] = k;
    a.members.insert(a.members.end(), b.members.begin(), b.members.end());
    b.alive = false;
    b.members.clear();
    b.nbr.clear();
    --live_;
    if (++merges_since_audit_ >= 64) {
      audit_adjacency();
      merges_since_audit_ = 0;
    }
  }

  /// Recomputes every boundary weight from the pixel labels and compares with
  /// the incremental state. Throws on disagreement.
  void audit_adjacency() const {
    std::map<std::pair<int, int>, BoundaryWeight> fresh;
    for (int r = 0; r < n1_; ++r)
      for (int c = 0; c < n2_; ++c) {
        const int p = r * n2_ + c;
        const int gp = pixel_group_[static_cast<std::size_t>(p)];
        if (c + 1 < n2_) {
          const int gq = pixel_group_[static_cast<std::size_t>(p + 1)];
          if (gp != gq) fresh[{std::min(gp, gq), std::max(gp, gq)}].horizontal += 1.0;
        }
        if (r + 1 < n1_) {
          const int gq = pixel_group_[static_cast<std::size_t>(p + n2_)];
          if (gp != gq) fresh[{std::min(gp, gq), std::max(gp, gq)}].vertical += 1.0;
        }
      }
    std::size_t stored_pairs = 0;
    for (int k = 0; k < group_count(); ++k) {
      const Group& g = groups_[static_cast<std::size_t>(k)];
      if (!g.alive) continue;
      for (const auto& [k2, w] : g.nbr) {
        if (k2 < k) continue;
        ++stored_pairs;
        auto it = fresh.find({k, k2});
        if (it == fresh.end() || it->second.horizontal != w.horizontal ||
            it->second.vertical != w.vertical)
          throw Error("boundary-weight bookkeeping diverged from pixel labels");
      }
    }
    if (stored_pairs != fresh.size())
      throw Error("boundary-weight bookkeeping has stale or missing pairs");
  }

  Matrix beta_matrix() const {
    Matrix beta(n1_, n2_);
    for (int p = 0; p < n1_ * n2_; ++p)
      beta(p / n2_, p % n2_) =
          groups_[static_cast<std::size_t>(pixel_group_[static_cast<std::size_t>(p)])].gamma;
    return beta;
  }

  std::vector<int> live_ids() const {
    std::vector<int> ids;
    ids.reserve(static_cast<std::size_t>(live_));
    for (int k = 0; k < group_count(); ++k)
      if (groups_[static_cast<std::size_t>(k)].alive) ids.push_back(k);
    return ids;
  }

  struct BlockSplitProposal {
    bool accepted = false;
    double gamma_a = 0.0;
    double gamma_b = 0.0;
  };

  /// Exact two-block minimization over an equal-valued component partitioned
  /// into sides A and B: within each ordering regime the A-B boundary term is
  /// linear, so each side reduces to a tilted single-coordinate problem.
  BlockSplitProposal block_split_move(const std::vector<int>& side_a,
                                      const std::vector<int>& side_b) {
    std::vector<char> in_a(groups_.size(), 0), in_b(groups_.size(), 0);
    for (int k : side_a) in_a[static_cast<std::size_t>(k)] = 1;
    for (int k : side_b) in_b[static_cast<std::size_t>(k)] = 1;

    struct Side {
      double size = 0.0;
      double ysum = 0.0;
      std::vector<AbsTerm> outside;
    };
    double cross = 0.0;
    auto collect = [&](const std::vector<int>& side, Side& out) {
      for (int k : side) {
        const Group& g = groups_[static_cast<std::size_t>(k)];
        out.size += g.size;
        out.ysum += g.size * g.ybar;
        for (const auto& [kk, w] : g.nbr) {
          if (in_a[static_cast<std::size_t>(kk)] || in_b[static_cast<std::size_t>(kk)]) continue;
          out.outside.push_back({penalty_weight(w), groups_[static_cast<std::size_t>(kk)].gamma});
        }
      }
    };
    Side a, b;
    collect(side_a, a);
    collect(side_b, b);
    for (int k : side_a) {
      const Group& g = groups_[static_cast<std::size_t>(k)];
      for (const auto& [kk, w] : g.nbr)
        if (in_b[static_cast<std::size_t>(kk)]) cross += penalty_weight(w);
    }

    auto side_min = [&](const Side& s, double tilt) {
      return piecewise_quadratic_min(s.size, (s.ysum - tilt) / s.size, lambda1_ * s.size,
                                     s.outside);
    };
    auto local = [&](double ga, double gb) {
      double v = 0.0;
      auto side_val = [&](const std::vector<int>& side, const Side& s, double g) {
        for (int k : side) {
          const Group& grp = groups_[static_cast<std::size_t>(k)];
          const double d = g - grp.ybar;
          v += 0.5 * grp.size * d * d + lambda1_ * grp.size * std::abs(g);
        }
        for (const auto& t : s.outside) v += t.weight * std::abs(g - t.location);
      };
      side_val(side_a, a, ga);
      side_val(side_b, b, gb);
      v += cross * std::abs(ga - gb);
      return v;
    };

    const double current = groups_[static_cast<std::size_t>(side_a.front())].gamma;
    double best = local(current, current);
    BlockSplitProposal out;
    double best_a = current, best_b = current;
    for (int regime = 0; regime < 2; ++regime) {
      const double tilt = regime == 0 ? cross : -cross;
      const double ga = side_min(a, tilt);
      const double gb = side_min(b, -tilt);
      if ((regime == 0 && !(ga > gb)) || (regime == 1 && !(ga < gb))) continue;
      const double v = local(ga, gb);
      if (v < best - 1e-13 * (1.0 + std::abs(best))) {
        best = v;
        best_a = ga;
        best_b = gb;
        out.accepted = true;
      }
    }
    if (out.accepted) {
      for (int k : side_a) groups_[static_cast<std::size_t>(k)].gamma = best_a;
      for (int k : side_b) groups_[static_cast<std::size_t>(k)].gamma = best_b;
      out.gamma_a = best_a;
      out.gamma_b = best_b;
    }
    return out;
  }

  /// Joint move of a connected set of equal-valued groups; the only move that
  /// can shift a zero-valued region, which permanent merging never touches.
  bool component_move(const std::vector<int>& component) {
    double size = 0.0, ysum = 0.0, old_value = 0.0;
    std::map<int, BoundaryWeight> outside;
    std::vector<char> inside(groups_.size(), 0);
    for (int k : component) inside[static_cast<std::size_t>(k)] = 1;
    for (int k : component) {
      const Group& g = groups_[static_cast<std::size_t>(k)];
      size += g.size;
      ysum += g.size * g.ybar;
      old_value = g.gamma;
      for (const auto& [kk, w] : g.nbr)
        if (!inside[static_cast<std::size_t>(kk)]) {
          outside[kk].horizontal += w.horizontal;
          outside[kk].vertical += w.vertical;
        }
    }
    std::vector<AbsTerm> terms;
    terms.reserve(outside.size());
    for (const auto& [kk, w] : outside)
      terms.push_back({penalty_weight(w), groups_[static_cast<std::size_t>(kk)].gamma});
    const double gamma = piecewise_quadratic_min(size, ysum / size, lambda1_ * size, terms);
    auto local = [&](double g) {
      double v = 0.0;
      for (int k : component) {
        const Group& grp = groups_[static_cast<std::size_t>(k)];
        const double d = g - grp.ybar;
        v += 0.5 * grp.size * d * d + lambda1_ * grp.size * std::abs(g);
      }
      for (const auto& t : terms) v += t.weight * std::abs(g - t.location);
      return v;
    };
    if (local(gamma) < local(old_value) - 1e-13 * (1.0 + std::abs(local(old_value)))) {
      for (int k : component) groups_[static_cast<std::size_t>(k)].gamma = gamma;
      return true;
    }
    return false;
  }

 private:
  int n1_, n2_;
  Matrix y_;
  double lambda1_, lambda2_, lambda3_;
  std::vector<Group> groups_;
  std::vector<int> pixel_group_;
  int live_ = 0;
  int merges_since_audit_ = 0;
};

struct Flsa2dSolution {
  Matrix beta;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  std::vector<std::vector<int>> partition;  // live groups' pixel index lists
  int passes = 0;
  bool a1_violation = false;
};

struct SolveOptions2D {
  double tol = tol::convergence;
  int max_passes = 10000;       // per lambda2 grid point
  double lambda3_ratio = 1.0;   // lambda3 = ratio * lambda2 along the path
  bool enable_fusion = true;
};

namespace detail {

/// Dinic max-flow on a small graph; used to decide whether the free
/// subgradient variables inside an equal-valued component admit a feasible
/// assignment, and to extract the violated cut when they do not.
class MaxFlow {
 public:
  explicit MaxFlow(int n) : head_(static_cast<std::size_t>(n), -1) {}

  void add_edge(int u, int v, double cap) {
    edges_.push_back({v, head_[static_cast<std::size_t>(u)], cap});
    head_[static_cast<std::size_t>(u)] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({u, head_[static_cast<std::size_t>(v)], 0.0});
    head_[static_cast<std::size_t>(v)] = static_cast<int>(edges_.size()) - 1;
  }

  double run(int s, int t) {
    double total = 0.0;
    while (bfs(s, t)) {
      iter_ = head_;
      while (true) {
        const double pushed = dfs(s, t, std::numeric_limits<double>::infinity());
        if (pushed <= 0.0) break;
        total += pushed;
      }
    }
    return total;
  }

  /// After run(): nodes still reachable from s in the residual graph.
  std::vector<char> source_side(int s) const {
    std::vector<char> seen(head_.size(), 0);
    std::vector<int> stack{s};
    seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int e = head_[static_cast<std::size_t>(u)]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
        const auto& ed = edges_[static_cast<std::size_t>(e)];
        if (ed.cap > 1e-12 && !seen[static_cast<std::size_t>(ed.to)]) {
          seen[static_cast<std::size_t>(ed.to)] = 1;
          stack.push_back(ed.to);
        }
      }
    }
    return seen;
  }

 private:
  struct EdgeRec {
    int to;
    int next;
    double cap;
  };

  bool bfs(int s, int t) {
    level_.assign(head_.size(), -1);
    std::vector<int> queue{s};
    level_[static_cast<std::size_t>(s)] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (int e = head_[static_cast<std::size_t>(u)]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
        const auto& ed = edges_[static_cast<std::size_t>(e)];
        if (ed.cap > 1e-12 && level_[static_cast<std::size_t>(ed.to)] < 0) {
          level_[static_cast<std::size_t>(ed.to)] = level_[static_cast<std::size_t>(u)] + 1;
          queue.push_back(ed.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  double dfs(int u, int t, double limit) {
    if (u == t) return limit;
    for (int& e = iter_[static_cast<std::size_t>(u)]; e >= 0;
         e = edges_[static_cast<std::size_t>(e)].next) {
      EdgeRec& ed = edges_[static_cast<std::size_t>(e)];
      if (ed.cap <= 1e-12 ||
          level_[static_cast<std::size_t>(ed.to)] != level_[static_cast<std::size_t>(u)] + 1)
        continue;
      const double pushed = dfs(ed.to, t, std::min(limit, ed.cap));
      if (pushed > 0.0) {
        ed.cap -= pushed;
        edges_[static_cast<std::size_t>(e ^ 1)].cap += pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  std::vector<int> head_;
  std::vector<int> iter_;
  std::vector<int> level_;
  std::vector<EdgeRec> edges_;
};

/// One descent/fusion pass: descend each live group; on a no-op,
/// try provisional fusions with neighbors in ascending id order (first
/// improvement wins), then exact pair splits; finish with joint moves of
/// equal-valued components.
inline double one_pass(GroupPartition2D& part, const SolveOptions2D& opts) {
  double max_change = 0.0;
  for (int k : part.live_ids()) {
    if (!part.group(k).alive) continue;
    const double old = part.group(k).gamma;
    const double next = part.descent_step(k);
    max_change = std::max(max_change, std::abs(next - old));
    if (std::abs(next - old) <= opts.tol && opts.enable_fusion) {
      std::vector<int> nbrs;
      nbrs.reserve(part.group(k).nbr.size());
      for (const auto& [k2, w] : part.group(k).nbr) nbrs.push_back(k2);
      bool moved = false;
      for (int k2 : nbrs) {
        const double ov = part.group(k).gamma;
        const double ov2 = part.group(k2).gamma;
        const GroupPartition2D::FusionProposal fp = part.fusion_step(k, k2);
        if (fp.accepted) {
          max_change = std::max(
              {max_change, std::abs(fp.gamma - ov), std::abs(fp.gamma - ov2)});
          moved = true;
          break;
        }
      }
      if (!moved) {
        for (int k2 : nbrs) {
          if (std::abs(part.group(k2).gamma - part.group(k).gamma) > tol::equality) continue;
          const double ov = part.group(k).gamma;
          const double ov2 = part.group(k2).gamma;
          const GroupPartition2D::SplitProposal sp = part.split_step(k, k2);
          if (sp.accepted) {
            max_change = std::max({max_change, std::abs(sp.gamma_a - ov),
                                   std::abs(sp.gamma_b - ov2)});
            break;
          }
        }
      }
    }
  }
  if (opts.enable_fusion) {
    // Connected components of equal-valued adjacent groups.
    const std::vector<int> live = part.live_ids();
    std::vector<char> seen(static_cast<std::size_t>(part.group_count()), 0);
    for (int k : live) {
      if (seen[static_cast<std::size_t>(k)]) continue;
      std::vector<int> component;
      std::vector<int> stack{k};
      seen[static_cast<std::size_t>(k)] = 1;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        component.push_back(cur);
        for (const auto& [k2, w] : part.group(cur).nbr) {
          if (seen[static_cast<std::size_t>(k2)]) continue;
          if (std::abs(part.group(k2).gamma - part.group(k).gamma) <= tol::equality) {
            seen[static_cast<std::size_t>(k2)] = 1;
            stack.push_back(k2);
          }
        }
      }
      if (component.size() >= 2) {
        const double before = part.group(k).gamma;
        if (part.component_move(component))
          max_change = std::max(max_change, std::abs(part.group(k).gamma - before));
      }
    }
  }
  return max_change;
}

inline std::vector<std::vector<int>> equal_components(const GroupPartition2D& part) {
  std::vector<std::vector<int>> components;
  const std::vector<int> live = part.live_ids();
  std::vector<char> seen(static_cast<std::size_t>(part.group_count()), 0);
  for (int k : live) {
    if (seen[static_cast<std::size_t>(k)]) continue;
    std::vector<int> component;
    std::vector<int> stack{k};
    seen[static_cast<std::size_t>(k)] = 1;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      component.push_back(cur);
      for (const auto& [k2, w] : part.group(cur).nbr) {
        if (seen[static_cast<std::size_t>(k2)]) continue;
        if (std::abs(part.group(k2).gamma - part.group(k).gamma) <= tol::equality) {
          seen[static_cast<std::size_t>(k2)] = 1;
          stack.push_back(k2);
        }
      }
    }
    components.push_back(std::move(component));
  }
  return components;
}

/// Decides whether an equal-valued component admits feasible free subgradient
/// variables on its internal boundaries. The system is a flow problem (edge
/// flows bounded by the penalty weights, node imbalances from data pressure,
/// L1 slack at value zero); when infeasible, the min cut names the subset that
/// must break away, and the corresponding two-block move strictly descends.
inline bool cut_probe_and_split(GroupPartition2D& part, const std::vector<int>& component) {
  const int n = static_cast<int>(component.size());
  if (n < 2) return false;
  const double v = part.group(component.front()).gamma;
  std::vector<int> index(static_cast<std::size_t>(part.group_count()), -1);
  for (int i = 0; i < n; ++i) index[static_cast<std::size_t>(component[static_cast<std::size_t>(i)])] = i;

  // Node imbalance b_i and L1 slack c_i of the stationarity equations.
  std::vector<double> b(static_cast<std::size_t>(n), 0.0), c(static_cast<std::size_t>(n), 0.0);
  const bool at_zero = std::abs(v) <= tol::equality;
  for (int i = 0; i < n; ++i) {
    const auto& g = part.group(component[static_cast<std::size_t>(i)]);
    double bi = g.size * (g.ybar - v);
    if (at_zero)
      c[static_cast<std::size_t>(i)] = part.lambda1() * g.size;
    else
      bi -= part.lambda1() * g.size * (v > 0.0 ? 1.0 : -1.0);
    for (const auto& [kk, w] : g.nbr) {
      if (index[static_cast<std::size_t>(kk)] >= 0) continue;
      const double gv = part.group(kk).gamma;
      bi -= part.penalty_weight(w) * (v > gv ? 1.0 : -1.0);
    }
    b[static_cast<std::size_t>(i)] = bi;
  }

  // Lower-bounded circulation: internal edges carry net flow in [-w, w]; the
  // net flow from node i into the balance node R must lie in
  // [-b_i - c_i, -b_i + c_i]. Lower bounds convert to mandatory source/sink
  // arcs; feasibility means the max flow saturates them all.
  const int node_r = n, node_s = n + 1, node_t = n + 2;
  MaxFlow flow(n + 3);
  for (int i = 0; i < n; ++i) {
    const auto& g = part.group(component[static_cast<std::size_t>(i)]);
    for (const auto& [kk, w] : g.nbr) {
      const int j = index[static_cast<std::size_t>(kk)];
      if (j < 0 || j <= i) continue;
      const double cap = part.penalty_weight(w);
      flow.add_edge(i, j, cap);
      flow.add_edge(j, i, cap);
    }
  }
  double total_lower = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo = -b[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(i)];
    const double hi = -b[static_cast<std::size_t>(i)] + c[static_cast<std::size_t>(i)];
    if (lo > 0.0) {
      flow.add_edge(i, node_r, hi - lo);
      flow.add_edge(node_s, node_r, lo);
      flow.add_edge(i, node_t, lo);
      total_lower += lo;
    } else if (hi < 0.0) {
      flow.add_edge(node_r, i, hi - lo);
      flow.add_edge(node_s, i, -hi);
      flow.add_edge(node_r, node_t, -hi);
      total_lower += -hi;
    } else {
      if (hi > 0.0) flow.add_edge(i, node_r, hi);
      if (lo < 0.0) flow.add_edge(node_r, i, -lo);
    }
  }
  if (total_lower <= 0.0) return false;
  const double pushed = flow.run(node_s, node_t);
  if (pushed >= total_lower - 1e-9 * (1.0 + total_lower)) return false;  // feasible

  const std::vector<char> side = flow.source_side(node_s);
  std::vector<int> side_a, side_b;
  for (int i = 0; i < n; ++i) {
    if (side[static_cast<std::size_t>(i)])
      side_a.push_back(component[static_cast<std::size_t>(i)]);
    else
      side_b.push_back(component[static_cast<std::size_t>(i)]);
  }
  if (side_a.empty() || side_b.empty()) return false;
  return part.block_split_move(side_a, side_b).accepted;
}

inline int run_to_convergence(GroupPartition2D& part, const SolveOptions2D& opts,
                              int grid_index) {
  for (int pass = 0; pass < opts.max_passes; ++pass) {
    if (one_pass(part, opts) < opts.tol) {
      if (!opts.enable_fusion) return pass + 1;
      bool escaped = false;
      for (const auto& component : equal_components(part))
        if (cut_probe_and_split(part, component)) escaped = true;
      if (!escaped) return pass + 1;
    }
  }
  throw NotConvergedError("flsa2d cycles", grid_index);
}

/// Fresh singleton partition carrying the given values, with every
/// equal-nonzero adjacent pair permanently merged: the end-of-grid-point
/// merge rule applied from scratch.
inline GroupPartition2D rebuild_merged(const PixelGrid& grid, const Matrix& beta,
                                       double lambda1, double lambda2, double lambda3) {
  GroupPartition2D part(grid, lambda1, lambda2, lambda3);
  part.init_values(beta);
  const int n1 = grid.n1(), n2 = grid.n2();
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) {
      const int p = r * n2 + c;
      const double v = beta(r, c);
      if (std::abs(v) <= tol::equality) continue;
      const int candidates[2] = {c + 1 < n2 ? p + 1 : -1, r + 1 < n1 ? p + n2 : -1};
      for (int q : candidates) {
        if (q < 0) continue;
        const double vq = beta(q / n2, q % n2);
        if (std::abs(vq) <= tol::equality || std::abs(vq - v) > tol::equality) continue;
        const int ka = part.group_of_pixel(p);
        const int kb = part.group_of_pixel(q);
        if (ka != kb) part.merge(std::min(ka, kb), std::max(ka, kb));
      }
    }
  return part;
}

}  // namespace detail

/// The 2D smoothing cycle: start at lambda2 = 0 with soft-thresholded pixels,
/// increment lambda2 by delta, cycle to convergence on the merged groups,
/// refine at pixel granularity until the two agree, permanently merge, and
/// emit one solution per grid point.
inline std::vector<Flsa2dSolution> flsa2d_solve_path(
    const PixelGrid& grid, const flsa::PathSchedule& schedule, const SolveOptions2D& opts = {},
    const std::vector<double>* emit_at = nullptr) {
  if (!(schedule.delta > 0.0)) throw InvalidArgumentError("schedule delta must be > 0");
  if (schedule.lambda1 < 0.0 || schedule.lambda2_target < 0.0)
    throw InvalidArgumentError("penalties must be >= 0");
  if (grid.n1() < 1 || grid.n2() < 1) throw InvalidArgumentError("empty grid");
  if (!grid.values.allFinite()) throw NonFiniteError("pixel grid");

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

  GroupPartition2D part(grid, schedule.lambda1, 0.0, 0.0);
  std::vector<Flsa2dSolution> solutions;

  for (std::size_t si = 0; si < stops.size(); ++si) {
    const double lambda2 = stops[si];
    const double lambda3 = opts.lambda3_ratio * lambda2;
    part.set_penalties(schedule.lambda1, lambda2, lambda3);
    Flsa2dSolution sol;
    sol.lambda1 = schedule.lambda1;
    sol.lambda2 = lambda2;
    sol.lambda3 = lambda3;

    // Labels before this grid point, for the A1 diagnostic.
    std::vector<int> start_label(static_cast<std::size_t>(grid.n1() * grid.n2()));
    for (int p = 0; p < grid.n1() * grid.n2(); ++p)
      start_label[static_cast<std::size_t>(p)] = part.group_of_pixel(p);

    while (true) {
      sol.passes += detail::run_to_convergence(part, opts, static_cast<int>(si));
      if (!opts.enable_fusion) break;
      const Matrix coarse = part.beta_matrix();
      // Pixel-granularity refinement: permanent merges cannot be undone, so
      // verify the coarse fixed point against the finest partition before
      // locking anything in.
      GroupPartition2D fine(grid, schedule.lambda1, lambda2, lambda3);
      fine.init_values(coarse);
      sol.passes += detail::run_to_convergence(fine, opts, static_cast<int>(si));
      const Matrix refined = fine.beta_matrix();
      part = detail::rebuild_merged(grid, refined, schedule.lambda1, lambda2, lambda3);
      if ((refined - coarse).cwiseAbs().maxCoeff() < opts.tol) break;
    }

    if (opts.enable_fusion) {
      // A1: how many pre-point groups does each end group span?
      std::vector<int> ids = part.live_ids();
      for (int k : ids) {
        std::vector<int> origins;
        for (int p : part.group(k).members)
          origins.push_back(start_label[static_cast<std::size_t>(p)]);
        std::sort(origins.begin(), origins.end());
        origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
        if (origins.size() >= 3) sol.a1_violation = true;
      }
    }

    const bool want = !emit_at || std::find(emit_at->begin(), emit_at->end(), lambda2) !=
                                      emit_at->end();
    if (want) {
      sol.beta = part.beta_matrix();
      for (int k : part.live_ids()) sol.partition.push_back(part.group(k).members);
      solutions.push_back(std::move(sol));
    }
  }
  return solutions;
}

/// Convenience: final grid point only.
inline Flsa2dSolution flsa2d_solve(const PixelGrid& grid, double lambda1, double lambda2,
                                   double delta = -1.0, const SolveOptions2D& opts = {}) {
  const flsa::PathSchedule schedule = flsa::make_schedule(lambda1, lambda2, delta);
  std::vector<double> emit{lambda2};
  auto sols = flsa2d_solve_path(grid, schedule, opts, &emit);
  return sols.back();
}

/// Pixelwise soft-thresholding path in lambda1.
inline Flsa2dSolution soft_threshold_path_2d(const Flsa2dSolution& solution,
                                             double lambda1_new) {
  if (lambda1_new < solution.lambda1)
    throw InvalidPathError("lambda1_new must be >= the solution's lambda1");
  Flsa2dSolution out;
  out.lambda1 = lambda1_new;
  out.lambda2 = solution.lambda2;
  out.lambda3 = solution.lambda3;
  const double shift = lambda1_new - solution.lambda1;
  out.beta = solution.beta.unaryExpr(
      [shift](double v) { return soft_threshold(v, shift); });
  // Partition = connected components of equal values under 4-adjacency.
  const int n1 = static_cast<int>(out.beta.rows());
  const int n2 = static_cast<int>(out.beta.cols());
  std::vector<int> label(static_cast<std::size_t>(n1 * n2), -1);
  for (int p = 0; p < n1 * n2; ++p) {
    if (label[static_cast<std::size_t>(p)] >= 0) continue;
    const int id = static_cast<int>(out.partition.size());
    out.partition.emplace_back();
    std::vector<int> stack{p};
    label[static_cast<std::size_t>(p)] = id;
    const double v = out.beta(p / n2, p % n2);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      out.partition[static_cast<std::size_t>(id)].push_back(cur);
      const int r = cur / n2, c = cur % n2;
      const int nb[4] = {c + 1 < n2 ? cur + 1 : -1, c > 0 ? cur - 1 : -1,
                         r + 1 < n1 ? cur + n2 : -1, r > 0 ? cur - n2 : -1};
      for (int q : nb) {
        if (q < 0 || label[static_cast<std::size_t>(q)] >= 0) continue;
        if (std::abs(out.beta(q / n2, q % n2) - v) <= tol::equality) {
          label[static_cast<std::size_t>(q)] = id;
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-fold pixel validation (fit odd pixels, score even pixels)

struct TwoFoldResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Matrix error_surface;  // rows: lambda1 grid, cols: lambda2 grid
};

struct TwoFoldOptions {
  double delta = -1.0;  // increment for the lambda2 path; default target/1000
  double tol = tol::convergence;
  int max_passes = 10000;
  int jobs = 1;
};

namespace detail {

/// Average of the fitted training pixels at minimal Manhattan distance.
inline double predict_from_training(const Matrix& fitted_full, int r, int c) {
  const int n1 = static_cast<int>(fitted_full.rows());
  const int n2 = static_cast<int>(fitted_full.cols());
  for (int dist = 1; dist <= 2 + n1 + n2; ++dist) {
    double sum = 0.0;
    int count = 0;
    for (int dr = -dist; dr <= dist; ++dr) {
      const int dc_abs = dist - std::abs(dr);
      for (int dc : {-dc_abs, dc_abs}) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= n1 || cc < 0 || cc >= n2) continue;
        if (rr % 2 != 0 || cc % 2 != 0) continue;  // training = even 0-indexed
        sum += fitted_full(rr, cc);
        ++count;
        if (dc_abs == 0) break;  // dc = -0 and +0 are the same pixel
      }
    }
    if (count > 0) return sum / count;
  }
  return 0.0;
}

}  // namespace detail

/// Two-fold pixel validation: fit the odd-coordinate subgrid as a contiguous
/// grid, predict the remaining pixels from their nearest fitted neighbors,
/// and pick the squared-error-minimizing (lambda1, lambda2). Ties break
/// toward the largest lambda2, then the largest lambda1.
inline TwoFoldResult two_fold_validate(const PixelGrid& grid,
                                       const std::vector<double>& lambda1_grid,
                                       const std::vector<double>& lambda2_grid,
                                       const TwoFoldOptions& opts = {}) {
  if (grid.n1() < 3 || grid.n2() < 3)
    throw GridTooSmallError("two-fold validation needs at least 3x3");
  if (lambda1_grid.empty() || lambda2_grid.empty())
    throw InvalidArgumentError("empty parameter grids");

  const int n1 = grid.n1(), n2 = grid.n2();
  const int t1 = (n1 + 1) / 2, t2 = (n2 + 1) / 2;
  PixelGrid train;
  train.values.resize(t1, t2);
  for (int r = 0; r < t1; ++r)
    for (int c = 0; c < t2; ++c) train.values(r, c) = grid.values(2 * r, 2 * c);

  std::vector<double> lambda2_sorted = lambda2_grid;
  std::sort(lambda2_sorted.begin(), lambda2_sorted.end());
  const double l2_max = lambda2_sorted.back();

  TwoFoldResult result;
  result.error_surface.resize(static_cast<Eigen::Index>(lambda1_grid.size()),
                              static_cast<Eigen::Index>(lambda2_grid.size()));

  // One lambda2 path per lambda1 value; cells along a path share warm starts.
  std::atomic<std::size_t> next{0};
  std::exception_ptr worker_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    try {
      for (std::size_t i = next.fetch_add(1); i < lambda1_grid.size();
           i = next.fetch_add(1)) {
        const double l1 = lambda1_grid[i];
        const double delta =
            opts.delta > 0.0 ? opts.delta : (l2_max > 0.0 ? l2_max / 1000.0 : 1.0);
        const flsa::PathSchedule schedule = flsa::make_schedule(l1, l2_max, delta);
        SolveOptions2D sopts;
        sopts.tol = opts.tol;
        sopts.max_passes = opts.max_passes;
        const auto sols = flsa2d_solve_path(train, schedule, sopts, &lambda2_sorted);
        for (std::size_t j = 0; j < lambda2_grid.size(); ++j) {
          const double l2 = lambda2_grid[j];
          const auto it =
              std::find_if(sols.begin(), sols.end(), [&](const Flsa2dSolution& s) {
                return std::abs(s.lambda2 - l2) <= 1e-12;
              });
          if (it == sols.end()) throw Error("two-fold: missing path emit point");
          // Expand the fitted subgrid onto the full grid's training positions.
          Matrix fitted_full = Matrix::Zero(n1, n2);
          for (int r = 0; r < t1; ++r)
            for (int c = 0; c < t2; ++c) fitted_full(2 * r, 2 * c) = it->beta(r, c);
          double err = 0.0;
          for (int r = 0; r < n1; ++r)
            for (int c = 0; c < n2; ++c) {
              if (r % 2 == 0 && c % 2 == 0) continue;
              const double pred = detail::predict_from_training(fitted_full, r, c);
              const double d = grid.values(r, c) - pred;
              err += d * d;
            }
          result.error_surface(static_cast<Eigen::Index>(i),
                               static_cast<Eigen::Index>(j)) = err;
        }
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!worker_error) worker_error = std::current_exception();
    }
  };
  if (opts.jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(opts.jobs, static_cast<int>(lambda1_grid.size()));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (worker_error) std::rethrow_exception(worker_error);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lambda1_grid.size(); ++i)
    for (std::size_t j = 0; j < lambda2_grid.size(); ++j)
      best = std::min(best, result.error_surface(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(j)));
  const double tie = best + 1e-12 * (1.0 + std::abs(best));
  double best_l1 = lambda1_grid.front(), best_l2 = lambda2_grid.front();
  bool found = false;
  for (std::size_t i = 0; i < lambda1_grid.size(); ++i)
    for (std::size_t j = 0; j < lambda2_grid.size(); ++j) {
      if (result.error_surface(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >
          tie)
        continue;
      const double l1 = lambda1_grid[i], l2 = lambda2_grid[j];
      if (!found || l2 > best_l2 || (l2 == best_l2 && l1 > best_l1)) {
        best_l1 = l1;
        best_l2 = l2;
        found = true;
      }
    }
  result.lambda1 = best_l1;
  result.lambda2 = best_l2;
  return result;
}

}  // namespace pathwise::flsa2d
