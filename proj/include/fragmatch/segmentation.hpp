#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "fragmatch/breaking_curves.hpp"
#include "fragmatch/graph.hpp"
#include "fragmatch/spatial_index.hpp"

namespace fragmatch {

inline constexpr std::int32_t kUnassigned = -1;

struct RegionSegmentation {
  std::vector<std::int32_t> region_of;  // kUnassigned for curve points before voting
  std::vector<IndexSet> regions;        // sorted indices, region id = position

  std::size_t region_count() const noexcept { return regions.size(); }
  std::vector<std::size_t> region_sizes() const {
    std::vector<std::size_t> s;
    s.reserve(regions.size());
    for (const auto& r : regions) s.push_back(r.size());
    return s;
  }
  std::size_t unassigned_count() const {
    return static_cast<std::size_t>(std::count(region_of.begin(), region_of.end(), kUnassigned));
  }
};

/// Regions are the connected components of G restricted to non-curve
/// points, numbered by smallest contained index.
inline RegionSegmentation grow_regions(const NeighborhoodGraph& g, const BreakingCurveSet& b) {
  if (b.member.size() != g.size()) throw std::invalid_argument("grow_regions: curve mask size differs from graph");
  std::vector<bool> free(g.size());
  for (std::size_t i = 0; i < free.size(); ++i) free[i] = !b.member[i];
  RegionSegmentation s;
  s.region_of.assign(g.size(), kUnassigned);
  s.regions = connected_components(g, free);
  for (std::size_t r = 0; r < s.regions.size(); ++r)
    for (auto i : s.regions[r]) s.region_of[i] = static_cast<std::int32_t>(r);
  return s;
}

/// Modal region among the votes; ties go to the smaller region id.
/// Returns kUnassigned when there are no votes.
inline std::int32_t majority_vote(const std::vector<std::int32_t>& votes) {
  std::map<std::int32_t, std::size_t> tally;
  for (auto v : votes)
    if (v != kUnassigned) ++tally[v];
  std::int32_t best = kUnassigned;
  std::size_t best_count = 0;
  for (const auto& [id, count] : tally)  // ascending id
    if (count > best_count) {
      best = id;
      best_count = count;
    }
  return best;
}

/// Absorbs every unassigned (curve) point into a region: each one takes the
/// modal region among its k_vote nearest already-assigned points, by
/// Euclidean distance. All votes read the assignment as it was before
/// voting, so the result does not depend on the order points are visited.
inline RegionSegmentation assign_curve_points(RegionSegmentation s, const KdTree& index,
                                              std::size_t k_vote) {
  const std::size_t n = s.region_of.size();
  if (index.size() != n) throw std::invalid_argument("assign_curve_points: index size differs from segmentation");
  if (s.regions.empty()) throw std::runtime_error("nothing to vote into");
  if (k_vote == 0) throw std::invalid_argument("k_vote must be positive");

  std::vector<std::size_t> pending;
  std::vector<Point3> assigned_pts;
  std::vector<std::int32_t> assigned_region;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.region_of[i] == kUnassigned) {
      pending.push_back(i);
    } else {
      assigned_pts.push_back(index.points()[i]);
      assigned_region.push_back(s.region_of[i]);
    }
  }
  if (pending.empty()) return s;
  if (assigned_pts.empty()) throw std::runtime_error("nothing to vote into");

  const KdTree assigned(std::move(assigned_pts));
  const std::size_t k = std::min(k_vote, assigned.size());
  std::vector<std::int32_t> result(pending.size(), kUnassigned);
  parallel_for(pending.size(), [&](std::size_t p) {
    std::vector<std::int32_t> votes;
    for (const auto& nb : assigned.knn(index.points()[pending[p]], k)) votes.push_back(assigned_region[nb.index]);
    result[p] = majority_vote(votes);
  });
  for (std::size_t p = 0; p < pending.size(); ++p) s.region_of[pending[p]] = result[p];

  for (auto& r : s.regions) r.clear();
  for (std::size_t i = 0; i < n; ++i) s.regions[static_cast<std::size_t>(s.region_of[i])].push_back(i);
  return s;
}

inline RegionSegmentation assign_curve_points(RegionSegmentation s, const PointCloud& c, std::size_t k_vote) {
  return assign_curve_points(std::move(s), KdTree(c), k_vote);
}

/// Region ids with size >= min_fraction * total, largest first (ties by id).
inline std::vector<std::size_t> filter_small_regions(const RegionSegmentation& s, double min_fraction) {
  if (!(min_fraction > 0.0 && min_fraction < 1.0))
    throw std::invalid_argument("min_fraction must lie in (0, 1)");
  const double threshold = min_fraction * static_cast<double>(s.region_of.size());
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < s.regions.size(); ++r)
    if (static_cast<double>(s.regions[r].size()) >= threshold) keep.push_back(r);
  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    return s.regions[a].size() > s.regions[b].size();
  });
  if (keep.empty()) throw std::runtime_error("no candidate regions");
  return keep;
}

}  // namespace fragmatch
