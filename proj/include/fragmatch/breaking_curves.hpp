#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fragmatch/eigen_sym3.hpp"
#include "fragmatch/graph.hpp"
#include "fragmatch/parallel.hpp"
#include "fragmatch/spatial_index.hpp"

namespace fragmatch {

/// Which points form the local neighbourhood of p for the corner penalty.
enum class CornerNeighborhood {
  graph,  // ε-graph neighbours of p
  knn,    // the k nearest neighbours of p (k taken from the graph)
};

struct CornerPenaltyField {
  std::vector<double> values;                    // ω per point, in [0, 1]
  std::vector<std::array<double, 3>> eigenvalues;  // λ0 <= λ1 <= λ2 per point
  std::size_t sparse_points = 0;                 // points with < 3 neighbours, set to 1.0
  std::size_t degenerate_points = 0;             // points with λ2 <= 1e-15, set to 1.0
};

/// ω(p) = (λ2 - λ0) / λ2 of the neighbour covariance. 1 on flat patches,
/// tending to 0 at corners.
inline double corner_penalty_value(const std::array<double, 3>& ev) {
  if (ev[2] <= tol::kDegenerateEigenvalue) return 1.0;
  return std::clamp((ev[2] - ev[0]) / ev[2], 0.0, 1.0);
}

inline CornerPenaltyField corner_penalty(const PointCloud& c, const NeighborhoodGraph& g,
                                         CornerNeighborhood mode = CornerNeighborhood::graph,
                                         const KdTree* index = nullptr) {
  if (c.size() != g.size()) throw std::invalid_argument("corner_penalty: cloud and graph sizes differ");
  KdTree local;
  if (mode == CornerNeighborhood::knn && index == nullptr) {
    local = KdTree(c);
    index = &local;
  }
  const std::size_t n = c.size();
  CornerPenaltyField f;
  f.values.assign(n, 1.0);
  f.eigenvalues.assign(n, {0.0, 0.0, 0.0});
  std::vector<std::uint8_t> flag(n, 0);  // 1 sparse, 2 degenerate

  parallel_for(n, [&](std::size_t i) {
    std::vector<std::size_t> nb;
    if (mode == CornerNeighborhood::graph) {
      const auto& a = g.neighbors(i);
      nb.assign(a.begin(), a.end());
    } else {
      const std::size_t k = std::min(g.k(), n - 1);
      for (const auto& e : index->knn_of(i, k)) nb.push_back(e.index);
    }
    if (nb.size() < 3) {
      flag[i] = 1;
      return;
    }
    const Matrix3 cov = covariance(nb, [&](std::size_t j) -> const Point3& { return c[j]; });
    auto ev = symmetric_eigenvalues(cov);
    for (auto& e : ev) e = std::max(e, 0.0);
    f.eigenvalues[i] = ev;
    if (ev[2] <= tol::kDegenerateEigenvalue) flag[i] = 2;
    f.values[i] = corner_penalty_value(ev);
  });
  for (auto v : flag) {
    if (v == 1) ++f.sparse_points;
    if (v == 2) ++f.degenerate_points;
  }
  return f;
}

/// member(p) = ω(p) < tau.
inline std::vector<bool> threshold_curve_points(const CornerPenaltyField& f, double tau) {
  std::vector<bool> member(f.values.size());
  for (std::size_t i = 0; i < member.size(); ++i) member[i] = f.values[i] < tau;
  return member;
}

struct BreakingCurveSet {
  std::vector<bool> member;
  std::vector<IndexSet> curves;  // connected components of the members in G

  std::size_t member_count() const {
    return static_cast<std::size_t>(std::count(member.begin(), member.end(), true));
  }
};

struct RefineParams {
  std::size_t min_component = 10;
  std::size_t prune_depth = 3;
  std::size_t dilate_steps = 1;
};

/// Opening-like cleanup of the raw member mask:
///  1. drop components smaller than min_component,
///  2. prune_depth rounds of endpoint erosion (members with <= 1 member
///     neighbour are removed; closed loops survive),
///  3. dilate_steps rounds adding every graph neighbour of a member,
///  4. recompute the components.
/// Each round reads a frozen copy of the previous mask.
inline BreakingCurveSet refine_curves(const std::vector<bool>& raw, const NeighborhoodGraph& g,
                                      const RefineParams& params) {
  if (raw.size() != g.size()) throw std::invalid_argument("refine_curves: mask length differs from graph size");
  std::vector<bool> mask = raw;

  for (const auto& comp : connected_components(g, mask))
    if (comp.size() < params.min_component)
      for (auto i : comp) mask[i] = false;

  for (std::size_t round = 0; round < params.prune_depth; ++round) {
    const std::vector<bool> prev = mask;
    bool changed = false;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!prev[i]) continue;
      std::size_t member_nb = 0;
      for (auto j : g.neighbors(i)) member_nb += prev[j] ? 1 : 0;
      if (member_nb <= 1) {
        mask[i] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  for (std::size_t round = 0; round < params.dilate_steps; ++round) {
    const std::vector<bool> prev = mask;
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (prev[i])
        for (auto j : g.neighbors(i)) mask[j] = true;
  }

  BreakingCurveSet out;
  out.curves = connected_components(g, mask);
  out.member = std::move(mask);
  return out;
}

}  // namespace fragmatch
