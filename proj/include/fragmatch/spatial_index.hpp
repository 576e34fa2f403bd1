#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "fragmatch/geometry.hpp"

namespace fragmatch {

struct Neighbor {
  std::size_t index;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// Exact kd-tree over a fixed point set. Query results are identical to a
/// brute-force scan: ordered by (squared distance, index).
///
/// The tree keeps a copy of the points, so it stays valid if the source
/// container goes away.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 12;
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  KdTree() = default;
  explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points) {}
  explicit KdTree(std::vector<Point3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, points_.size());
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point3>& points() const noexcept { return points_; }

  /// k nearest points to an arbitrary query. Requires 1 <= k <= size().
  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const {
    if (k == 0 || k > points_.size()) throw std::out_of_range("knn: k out of range");
    return search(query, k, kNone);
  }

  /// k nearest points to cloud point `i`, excluding i itself (but not its
  /// duplicates). Requires 1 <= k <= size() - 1.
  std::vector<Neighbor> knn_of(std::size_t i, std::size_t k) const {
    if (i >= points_.size()) throw std::out_of_range("knn: point index out of range");
    if (k == 0 || k + 1 > points_.size()) throw std::out_of_range("knn: k out of range");
    return search(points_[i], k, i);
  }

  /// Single nearest point; returns {index, squared distance}.
  std::pair<std::size_t, double> nearest_squared(const Point3& query) const {
    if (points_.empty()) throw std::out_of_range("nearest: empty index");
    std::size_t best = kNone;
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_rec(0, query, best, best_d2);
    return {best, best_d2};
  }

  /// All indices j != exclude with squared distance <= radius², sorted by index.
  std::vector<std::size_t> within(const Point3& query, double radius,
                                  std::size_t exclude = kNone) const {
    std::vector<std::size_t> out;
    if (points_.empty()) return out;
    radius_rec(0, query, radius * radius, exclude, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    // Leaf: [begin, end) into order_. Inner: split axis/value and children.
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    std::int32_t axis = -1;
    double split = 0.0;
    Point3 lo, hi;  // bounding box of the subtree
  };

  struct HeapEntry {
    double d2;
    std::size_t index;
    bool operator<(const HeapEntry& o) const {
      return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    nodes_[id].begin = static_cast<std::uint32_t>(begin);
    nodes_[id].end = static_cast<std::uint32_t>(end);
    if (end - begin <= kLeafSize) return id;

    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all points coincide
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_distance_squared(const Node& n, const Point3& q) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = 0.0;
      if (q[a] < n.lo[a]) d = n.lo[a] - q[a];
      else if (q[a] > n.hi[a]) d = q[a] - n.hi[a];
      d2 += d * d;
    }
    return d2;
  }

  std::vector<Neighbor> search(const Point3& query, std::size_t k, std::size_t exclude) const {
    std::priority_queue<HeapEntry> heap;  // max-heap on (d2, index)
    knn_rec(0, query, k, exclude, heap);
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
      heap.pop();
    }
    return out;
  }

  void knn_rec(std::int32_t id, const Point3& q, std::size_t k, std::size_t exclude,
               std::priority_queue<HeapEntry>& heap) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == exclude) continue;
        const HeapEntry e{squared_distance(q, points_[idx]), idx};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const Node& l = nodes_[n.left];
    const Node& r = nodes_[n.right];
    const double dl = box_distance_squared(l, q);
    const double dr = box_distance_squared(r, q);
    const auto visit = [&](std::int32_t child, double d2) {
      // Equality must still be visited: a tie may carry a smaller index.
      if (heap.size() < k || d2 <= heap.top().d2) knn_rec(child, q, k, exclude, heap);
    };
    if (dl <= dr) {
      visit(n.left, dl);
      visit(n.right, dr);
    } else {
      visit(n.right, dr);
      visit(n.left, dl);
    }
  }

  void nearest_rec(std::int32_t id, const Point3& q, std::size_t& best, double& best_d2) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = squared_distance(q, points_[idx]);
        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
          best_d2 = d2;
          best = idx;
        }
      }
      return;
    }
    const double dl = box_distance_squared(nodes_[n.left], q);
    const double dr = box_distance_squared(nodes_[n.right], q);
    if (dl <= dr) {
      if (dl <= best_d2) nearest_rec(n.left, q, best, best_d2);
      if (dr <= best_d2) nearest_rec(n.right, q, best, best_d2);
    } else {
      if (dr <= best_d2) nearest_rec(n.right, q, best, best_d2);
      if (dl <= best_d2) nearest_rec(n.left, q, best, best_d2);
    }
  }

  void radius_rec(std::int32_t id, const Point3& q, double r2, std::size_t exclude,
                  std::vector<std::size_t>& out) const {
    const Node& n = nodes_[id];
    if (box_distance_squared(n, q) > r2) return;
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx != exclude && squared_distance(q, points_[idx]) <= r2) out.push_back(idx);
      }
      return;
    }
    radius_rec(n.left, q, r2, exclude, out);
    radius_rec(n.right, q, r2, exclude, out);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace fragmatch
