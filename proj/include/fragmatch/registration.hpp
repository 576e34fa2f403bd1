#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fragmatch/constants.hpp"
#include "fragmatch/geometry.hpp"
#include "fragmatch/graph.hpp"
#include "fragmatch/parallel.hpp"
#include "fragmatch/segmentation.hpp"
#include "fragmatch/spatial_index.hpp"

namespace fragmatch {

struct IcpParams {
  std::size_t max_iterations = 100;
  double correspondence_cutoff = 1.0;  // model units
  double convergence_eps = 1e-7;       // on the change of the RMS residual
  // Source points used for correspondences; 0 keeps all. Subsampling is a
  // fixed stride, so results stay deterministic.
  std::size_t max_source_points = 0;

  void validate() const {
    if (max_iterations == 0) throw std::invalid_argument("icp: max_iterations must be positive");
    if (!(correspondence_cutoff > 0.0)) throw std::invalid_argument("icp: correspondence_cutoff must be positive");
    if (!(convergence_eps > 0.0)) throw std::invalid_argument("icp: convergence_eps must be positive");
  }
};

struct IcpResult {
  RigidTransform transform;
  // sqrt(mean over source points of min(d², cutoff²)); the truncation keeps
  // the sequence non-increasing when the inlier set changes.
  double rms_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool too_few_correspondences = false;
  std::vector<double> residual_history;  // one entry per evaluated pose, starting at init
};

/// Least-squares rigid motion taking `from[i]` onto `to[i]` (SVD of the
/// centred cross-covariance, with the reflection case corrected).
inline RigidTransform best_rigid_fit(const std::vector<Point3>& from, const std::vector<Point3>& to) {
  if (from.size() != to.size() || from.empty()) throw std::invalid_argument("best_rigid_fit: bad correspondence set");
  const Point3 cf = centroid(from);
  const Point3 ct = centroid(to);
  Matrix3 h = Matrix3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h.noalias() += (from[i] - cf) * (to[i] - ct).transpose();
  Eigen::JacobiSVD<Matrix3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 d = Matrix3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Matrix3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return {r, ct - r * cf};
}

namespace detail {

inline std::vector<Point3> stride_sample(const std::vector<Point3>& pts, std::size_t cap) {
  if (cap == 0 || pts.size() <= cap) return pts;
  std::vector<Point3> out;
  out.reserve(cap);
  const double step = static_cast<double>(pts.size()) / static_cast<double>(cap);
  for (std::size_t i = 0; i < cap; ++i) out.push_back(pts[static_cast<std::size_t>(static_cast<double>(i) * step)]);
  return out;
}

}  // namespace detail

/// Point-to-point ICP of `source` onto the points indexed by `target`.
/// Stops on convergence, after max_iterations, or when fewer than three
/// correspondences survive the cutoff.
inline IcpResult icp_point_to_point(const std::vector<Point3>& source, const KdTree& target,
                                    const RigidTransform& init, const IcpParams& params) {
  params.validate();
  if (source.empty() || target.size() == 0) throw std::invalid_argument("icp: empty cloud");

  const std::vector<Point3> src = detail::stride_sample(source, params.max_source_points);
  const double cut2 = params.correspondence_cutoff * params.correspondence_cutoff;
  const std::size_t n = src.size();

  std::vector<Point3> moved(n);
  std::vector<std::size_t> match(n);
  std::vector<double> d2(n);
  const auto correspond = [&](const RigidTransform& t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      moved[i] = t(src[i]);
      const auto [j, dd] = target.nearest_squared(moved[i]);
      match[i] = j;
      d2[i] = dd;
      sum += std::min(dd, cut2);
    }
    return std::sqrt(sum / static_cast<double>(n));
  };

  IcpResult res;
  res.transform = init;
  res.rms_residual = correspond(init);
  res.residual_history.push_back(res.rms_residual);

  std::vector<Point3> from, to;
  for (std::size_t it = 1; it <= params.max_iterations; ++it) {
    from.clear();
    to.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (d2[i] <= cut2) {
        from.push_back(moved[i]);
        to.push_back(target.points()[match[i]]);
      }
    if (from.size() < 3) {
      res.too_few_correspondences = true;
      break;
    }
    const RigidTransform next = compose(best_rigid_fit(from, to), res.transform);
    const double rms = correspond(next);
    res.transform = next;
    res.iterations = it;
    res.residual_history.push_back(rms);
    const double change = std::abs(res.rms_residual - rms);
    res.rms_residual = rms;
    if (change < params.convergence_eps) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline IcpResult icp_point_to_point(const PointCloud& source, const PointCloud& target,
                                    const RigidTransform& init, const IcpParams& params) {
  if (source.empty() || target.empty()) throw std::invalid_argument("icp: empty cloud");
  return icp_point_to_point(source.points, KdTree(target), init, params);
}

/// Mean squared nearest-neighbour distance from each point of `a` to the
/// points in `b_index`, optionally after mapping a through `a_to_b`.
inline double mean_squared_nn(const std::vector<Point3>& a, const KdTree& b_index,
                              const RigidTransform* a_to_b = nullptr) {
  double sum = 0.0;
  for (const auto& p : a) sum += b_index.nearest_squared(a_to_b ? (*a_to_b)(p) : p).second;
  return sum / static_cast<double>(a.size());
}

/// Symmetric Chamfer distance with squared distances and per-side means:
///   (1/|A|) Σ_a min_b |a-b|² + (1/|B|) Σ_b min_a |b-a|².
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty cloud");
  const KdTree ta(a), tb(b);
  return mean_squared_nn(a.points, tb) + mean_squared_nn(b.points, ta);
}

/// Chamfer distance between t(b) and a, without materialising t(b):
/// nearest neighbours of a are looked up in b's frame through t⁻¹.
inline double chamfer_distance(const std::vector<Point3>& a, const KdTree& a_index,
                               const std::vector<Point3>& b, const KdTree& b_index,
                               const RigidTransform& t) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty cloud");
  const RigidTransform t_inv = inverse(t);
  return mean_squared_nn(b, a_index, &t) + mean_squared_nn(a, b_index, &t_inv);
}

/// Principal axes of a point set, columns in descending-variance order,
/// forming a right-handed frame.
struct PrincipalFrame {
  Point3 center = Point3::Zero();
  Matrix3 axes = Matrix3::Identity();
  Point3 variances = Point3::Zero();  // descending
};

inline PrincipalFrame principal_frame(const std::vector<Point3>& pts) {
  PrincipalFrame f;
  f.center = centroid(pts);
  Eigen::SelfAdjointEigenSolver<Matrix3> solver(covariance(pts));
  for (int c = 0; c < 3; ++c) {
    f.axes.col(c) = solver.eigenvectors().col(2 - c);
    f.variances[c] = std::max(0.0, solver.eigenvalues()[2 - c]);
  }
  // Orient the first two axes by the sign of the third moment along them
  // (rotation-invariant); fall back to the dominant component when the
  // distribution is symmetric along that axis.
  for (int c = 0; c < 2; ++c) {
    Point3 axis = f.axes.col(c);
    double m3 = 0.0;
    for (const auto& p : pts) {
      const double s = axis.dot(p - f.center);
      m3 += s * s * s;
    }
    m3 /= static_cast<double>(pts.size());
    const double sigma3 = std::pow(std::sqrt(f.variances[c]), 3);
    double sign = 0.0;
    if (sigma3 > 0.0 && std::abs(m3) > 1e-6 * sigma3) {
      sign = m3 > 0.0 ? 1.0 : -1.0;
    } else {
      int dom = 0;
      axis.cwiseAbs().maxCoeff(&dom);
      sign = axis[dom] >= 0.0 ? 1.0 : -1.0;
    }
    f.axes.col(c) = sign * axis;
  }
  f.axes.col(2) = f.axes.col(0).cross(f.axes.col(1)).normalized();
  return f;
}

/// Candidate poses mapping the q region onto the p region: centroid to
/// centroid, with q's principal frame turned onto p's under the four proper
/// sign assignments of the axes. A rank-deficient q or p (collinear or
/// coincident points) yields the centroid-only candidate.
inline std::vector<RigidTransform> initial_alignments(const std::vector<Point3>& rp,
                                                      const std::vector<Point3>& rq) {
  if (rp.empty() || rq.empty()) throw std::invalid_argument("initial_alignments: empty region");
  const PrincipalFrame fp = principal_frame(rp);
  const PrincipalFrame fq = principal_frame(rq);
  const auto rank_deficient = [](const PrincipalFrame& f) {
    return !(f.variances[0] > 0.0) || f.variances[1] <= tol::kRankRatio * f.variances[0];
  };
  if (rank_deficient(fp) || rank_deficient(fq)) return {RigidTransform::from_translation(fp.center - fq.center)};

  static constexpr std::array<std::array<double, 3>, 4> kSigns{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
  std::vector<RigidTransform> out;
  out.reserve(kSigns.size());
  for (const auto& s : kSigns) {
    const Matrix3 flip = Point3(s[0], s[1], s[2]).asDiagonal();
    const Matrix3 r = fp.axes * flip * fq.axes.transpose();
    out.emplace_back(r, fp.center - r * fq.center);
  }
  return out;
}

struct MatchResult {
  std::size_t region_p = 0;
  std::size_t region_q = 0;
  RigidTransform transform;  // maps the q region into p's frame
  double chamfer = std::numeric_limits<double>::infinity();
  std::size_t icp_iterations_used = 0;
  std::size_t candidate_index = 0;
  double icp_rms = 0.0;
};

struct MatchOutcome {
  MatchResult best;
  std::vector<MatchResult> all;  // ascending chamfer, ties by (region_p, region_q)
  std::size_t pairs_evaluated = 0;
  std::size_t icp_runs = 0;
};

/// Exhaustive region-pair registration. Every retained p region is paired
/// with every retained q region; each pair runs ICP from every initial
/// alignment and keeps the lowest post-ICP Chamfer distance.
inline MatchOutcome match_regions(const PointCloud& p_cloud, const RegionSegmentation& p_seg,
                                  const std::vector<std::size_t>& p_retained, const PointCloud& q_cloud,
                                  const RegionSegmentation& q_seg, const std::vector<std::size_t>& q_retained,
                                  const IcpParams& params) {
  if (p_retained.empty() || q_retained.empty()) throw std::runtime_error("no candidate regions");
  params.validate();

  const auto gather = [](const PointCloud& c, const RegionSegmentation& s, const std::vector<std::size_t>& ids) {
    std::vector<std::vector<Point3>> pts;
    std::vector<KdTree> trees;
    for (auto id : ids) {
      if (id >= s.regions.size()) throw std::out_of_range("match_regions: region id out of range");
      pts.push_back(c.subset(s.regions[id]).points);
      if (pts.back().empty()) throw std::invalid_argument("match_regions: empty region");
    }
    trees.resize(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { trees[i] = KdTree(pts[i]); });
    return std::make_pair(std::move(pts), std::move(trees));
  };
  const auto [p_pts, p_trees] = gather(p_cloud, p_seg, p_retained);
  const auto [q_pts, q_trees] = gather(q_cloud, q_seg, q_retained);

  const std::size_t np = p_retained.size(), nq = q_retained.size();
  std::vector<MatchResult> results(np * nq);
  std::vector<std::size_t> runs(np * nq, 0);
  parallel_for(np * nq, [&](std::size_t pair) {
    const std::size_t i = pair / nq, j = pair % nq;
    MatchResult best;
    best.region_p = p_retained[i];
    best.region_q = q_retained[j];
    const auto candidates = initial_alignments(p_pts[i], q_pts[j]);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const IcpResult icp = icp_point_to_point(q_pts[j], p_trees[i], candidates[c], params);
      const double cd = chamfer_distance(p_pts[i], p_trees[i], q_pts[j], q_trees[j], icp.transform);
      if (cd < best.chamfer) {
        best.transform = icp.transform;
        best.chamfer = cd;
        best.icp_iterations_used = icp.iterations;
        best.candidate_index = c;
        best.icp_rms = icp.rms_residual;
      }
    }
    runs[pair] = candidates.size();
    results[pair] = best;
  });

  MatchOutcome out;
  out.pairs_evaluated = results.size();
  for (auto r : runs) out.icp_runs += r;
  out.all = std::move(results);
  std::stable_sort(out.all.begin(), out.all.end(), [](const MatchResult& a, const MatchResult& b) {
    return std::tie(a.chamfer, a.region_p, a.region_q) < std::tie(b.chamfer, b.region_p, b.region_q);
  });
  out.best = out.all.front();
  return out;
}

/// The whole q fragment moved by the winning region-pair transform.
inline PointCloud align_fragments(const PointCloud& q_cloud, const MatchResult& best) {
  return apply_transform(best.transform, q_cloud);
}

}  // namespace fragmatch
