#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "fragmatch/geometry.hpp"
#include "fragmatch/parallel.hpp"
#include "fragmatch/spatial_index.hpp"

namespace fragmatch {

using IndexSet = std::vector<std::size_t>;

/// Mean over all points of the mean distance to their k nearest neighbours
/// (the point itself excluded).
inline double estimate_epsilon(const KdTree& index, std::size_t k) {
  const std::size_t n = index.size();
  if (k == 0) throw std::invalid_argument("estimate_epsilon: k must be positive");
  if (n < k + 1) throw std::invalid_argument("cloud too small: need at least k+1 points");
  std::vector<double> per_point(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double s = 0.0;
    for (const auto& nb : index.knn_of(i, k)) s += nb.distance;
    per_point[i] = s;
  });
  double total = 0.0;
  for (double s : per_point) total += s;
  return total / (static_cast<double>(n) * static_cast<double>(k));
}

inline double estimate_epsilon(const PointCloud& c, std::size_t k) {
  if (c.size() < k + 1) throw std::invalid_argument("cloud too small: need at least k+1 points");
  return estimate_epsilon(KdTree(c), k);
}

/// Undirected ε-ball graph. adjacency[i] is sorted and never contains i.
class NeighborhoodGraph {
 public:
  NeighborhoodGraph() = default;
  NeighborhoodGraph(std::vector<std::vector<std::uint32_t>> adjacency, double epsilon, std::size_t k)
      : adjacency_(std::move(adjacency)), epsilon_(epsilon), k_(k) {}

  std::size_t size() const noexcept { return adjacency_.size(); }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t k() const noexcept { return k_; }
  const std::vector<std::uint32_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  const std::vector<std::vector<std::uint32_t>>& adjacency() const noexcept { return adjacency_; }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& a : adjacency_) twice += a.size();
    return twice / 2;
  }

  /// Edge list, one `i j` per line with i < j, in increasing order.
  void write_edge_list(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < adjacency_.size(); ++i)
      for (auto j : adjacency_[i])
        if (i < j) out << i << ' ' << j << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
  }

 private:
  std::vector<std::vector<std::uint32_t>> adjacency_;
  double epsilon_ = 0.0;
  std::size_t k_ = 0;
};

/// Edge {i, j} iff 0 < |p_i - p_j| <= epsilon_scale * estimate_epsilon(c, k).
/// The index must have been built over the same cloud.
inline NeighborhoodGraph build_graph(const KdTree& index, std::size_t k, double epsilon_scale = 1.0) {
  if (!(epsilon_scale > 0.0)) throw std::invalid_argument("epsilon_scale must be positive");
  const double eps = epsilon_scale * estimate_epsilon(index, k);
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon is zero: all points coincide");
  const auto& pts = index.points();
  const double eps2 = eps * eps;
  std::vector<std::vector<std::uint32_t>> adj(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    for (auto j : index.within(pts[i], eps, i)) {
      const double d2 = squared_distance(pts[i], pts[j]);
      if (d2 > 0.0 && d2 <= eps2) adj[i].push_back(static_cast<std::uint32_t>(j));
    }
  });
  return {std::move(adj), eps, k};
}

inline NeighborhoodGraph build_graph(const PointCloud& c, std::size_t k, double epsilon_scale = 1.0) {
  if (c.size() < k + 1) throw std::invalid_argument("cloud too small: need at least k+1 points");
  return build_graph(KdTree(c), k, epsilon_scale);
}

/// Maximal connected sets of active points. Components are ordered by their
/// smallest index and each lists its indices in increasing order.
inline std::vector<IndexSet> connected_components(const NeighborhoodGraph& g,
                                                  const std::vector<bool>* active = nullptr) {
  const std::size_t n = g.size();
  if (active && active->size() != n)
    throw std::invalid_argument("connected_components: mask length differs from point count");
  const auto on = [&](std::size_t i) { return !active || (*active)[i]; };
  std::vector<bool> seen(n, false);
  std::vector<IndexSet> out;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (seen[seed] || !on(seed)) continue;
    IndexSet comp;
    stack.assign(1, seed);
    seen[seed] = true;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      comp.push_back(i);
      for (auto j : g.neighbors(i)) {
        if (!seen[j] && on(j)) {
          seen[j] = true;
          stack.push_back(j);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

inline std::vector<IndexSet> connected_components(const NeighborhoodGraph& g,
                                                  const std::vector<bool>& active) {
  return connected_components(g, &active);
}

}  // namespace fragmatch
