#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fragmatch/breaking_curves.hpp"
#include "fragmatch/config.hpp"
#include "fragmatch/evaluation.hpp"
#include "fragmatch/geometry.hpp"
#include "fragmatch/graph.hpp"
#include "fragmatch/parallel.hpp"
#include "fragmatch/ply.hpp"
#include "fragmatch/registration.hpp"
#include "fragmatch/segmentation.hpp"
#include "fragmatch/spatial_index.hpp"
#include "fragmatch/transform_io.hpp"

namespace fragmatch {

/// A module error tagged with the pipeline stage it came from.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Removes exact duplicates (first occurrence kept, order preserved). With
/// a voxel size, each occupied cell of a grid anchored at the bounding-box
/// minimum is replaced by the centroid of its points, cells ordered by their
/// first point.
inline PointCloud preprocess(const PointCloud& c, std::optional<double> voxel_size = std::nullopt) {
  if (voxel_size && !(*voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
  c.validate();

  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto key = [&](std::size_t i) { return std::make_tuple(c[i].x(), c[i].y(), c[i].z(), i); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<bool> keep(c.size(), true);
  for (std::size_t k = 1; k < order.size(); ++k)
    if (c[order[k]] == c[order[k - 1]]) keep[order[k]] = false;

  PointCloud dedup;
  dedup.source_id = c.source_id;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (keep[i]) dedup.points.push_back(c[i]);
  if (!voxel_size) return dedup;

  const Point3 origin = Aabb::of(dedup).min_corner;
  std::map<std::array<std::int64_t, 3>, std::size_t> cell_of;
  std::vector<Point3> sums;
  std::vector<std::size_t> counts;
  for (const auto& p : dedup.points) {
    std::array<std::int64_t, 3> cell{};
    for (int a = 0; a < 3; ++a) cell[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(std::floor((p[a] - origin[a]) / *voxel_size));
    auto [it, inserted] = cell_of.try_emplace(cell, sums.size());
    if (inserted) {
      sums.push_back(Point3::Zero());
      counts.push_back(0);
    }
    sums[it->second] += p;
    ++counts[it->second];
  }
  PointCloud out;
  out.source_id = c.source_id;
  out.points.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out.points.push_back(sums[i] / static_cast<double>(counts[i]));
  return out;
}

/// Everything computed for one fragment up to the retained regions.
struct FragmentAnalysis {
  PointCloud cloud;  // after preprocessing
  KdTree index;
  NeighborhoodGraph graph;
  CornerPenaltyField penalty;
  std::vector<bool> raw_curve;
  BreakingCurveSet curves;
  RegionSegmentation grown;         // before voting; curve points unassigned
  RegionSegmentation segmentation;  // after voting; total
  std::vector<std::size_t> retained;
  std::map<std::string, double> timings_ms;
};

namespace pipeline_detail {

template <class F>
auto timed(std::map<std::string, double>& timings, const std::string& stage, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings[stage] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    } else {
      auto r = f();
      timings[stage] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return r;
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

}  // namespace pipeline_detail

/// Preprocess, graph, corner penalty, threshold, refinement, region growing,
/// voting and small-region filtering for one fragment. `stop_after_segmentation`
/// skips the filtering step (its failure is not an error for `segment`).
inline FragmentAnalysis analyze_fragment(const PointCloud& input, const PipelineConfig& config,
                                         const std::string& label, bool stop_after_segmentation = false) {
  using pipeline_detail::timed;
  FragmentAnalysis f;
  auto& tm = f.timings_ms;
  const auto stage = [&](const char* s) { return label + "/" + s; };
  f.cloud = timed(tm, stage("preprocess"), [&] { return preprocess(input, config.voxel_size); });
  timed(tm, stage("graph"), [&] {
    if (f.cloud.size() < config.k + 1)
      throw std::invalid_argument("cloud too small: " + std::to_string(f.cloud.size()) + " points for k = " +
                                  std::to_string(config.k));
    f.index = KdTree(f.cloud);
    f.graph = build_graph(f.index, config.k, config.epsilon_scale);
  });
  f.penalty = timed(tm, stage("corner_penalty"),
                    [&] { return corner_penalty(f.cloud, f.graph, config.corner_neighborhood, &f.index); });
  f.raw_curve = timed(tm, stage("threshold"), [&] { return threshold_curve_points(f.penalty, config.tau); });
  f.curves = timed(tm, stage("refine_curves"), [&] { return refine_curves(f.raw_curve, f.graph, config.refine_params()); });
  f.grown = timed(tm, stage("grow_regions"), [&] { return grow_regions(f.graph, f.curves); });
  f.segmentation = timed(tm, stage("assign_curve_points"),
                         [&] { return assign_curve_points(f.grown, f.index, config.k_vote); });
  if (!stop_after_segmentation)
    f.retained = timed(tm, stage("filter_small_regions"),
                       [&] { return filter_small_regions(f.segmentation, config.min_region_fraction); });
  return f;
}

inline IcpParams icp_params_for(const PipelineConfig& config, double epsilon) {
  IcpParams p;
  p.max_iterations = config.icp_max_iterations;
  p.correspondence_cutoff = config.icp_cutoff_epsilons * epsilon;
  p.convergence_eps = config.icp_convergence_eps;
  p.max_source_points = config.icp_max_source_points;
  return p;
}

inline nlohmann::json fragment_counts(const FragmentAnalysis& f, std::size_t input_points) {
  return {{"points_in", input_points},
          {"points", f.cloud.size()},
          {"epsilon", f.graph.epsilon()},
          {"edges", f.graph.edge_count()},
          {"sparse_points", f.penalty.sparse_points},
          {"raw_curve_points", static_cast<std::size_t>(std::count(f.raw_curve.begin(), f.raw_curve.end(), true))},
          {"curve_points", f.curves.member_count()},
          {"curves", f.curves.curves.size()},
          {"regions", f.segmentation.region_count()},
          {"region_sizes", f.segmentation.region_sizes()},
          {"retained_regions", f.retained}};
}

inline nlohmann::json match_to_json(const MatchResult& m) {
  return {{"region_p", m.region_p},
          {"region_q", m.region_q},
          {"chamfer", m.chamfer},
          {"icp_iterations", m.icp_iterations_used},
          {"candidate", m.candidate_index},
          {"icp_rms", m.icp_rms},
          {"transform", transform_to_json(m.transform)}};
}

struct PipelineResult {
  RigidTransform transform;  // maps fragment B into fragment A's frame
  PointCloud aligned_b;
  FragmentAnalysis a, b;
  MatchOutcome matches;
  nlohmann::json report;
};

/// Full two-fragment reassembly on in-memory clouds.
inline PipelineResult run_pipeline(const PointCloud& cloud_a, const PointCloud& cloud_b, const PipelineConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult r;

  // The two fragments are independent until registration.
  std::array<FragmentAnalysis, 2> frag;
  parallel_for(2, [&](std::size_t i) { frag[i] = analyze_fragment(i == 0 ? cloud_a : cloud_b, config, i == 0 ? "A" : "B"); },
               std::min(2u, thread_count()));
  r.a = std::move(frag[0]);
  r.b = std::move(frag[1]);

  std::map<std::string, double> timings;
  const IcpParams icp = icp_params_for(config, r.a.graph.epsilon());
  r.matches = pipeline_detail::timed(timings, "match_regions", [&] {
    return match_regions(r.a.cloud, r.a.segmentation, r.a.retained, r.b.cloud, r.b.segmentation, r.b.retained, icp);
  });
  r.transform = r.matches.best.transform;
  r.aligned_b = pipeline_detail::timed(timings, "align_fragments",
                                       [&] { return align_fragments(r.b.cloud, r.matches.best); });

  for (const auto* f : {&r.a, &r.b})
    for (const auto& [k, v] : f->timings_ms) timings[k] = v;

  nlohmann::json warnings = nlohmann::json::array();
  for (const auto* f : {&r.a, &r.b}) {
    if (f->penalty.sparse_points > 0)
      warnings.push_back(f->cloud.source_id + ": " + std::to_string(f->penalty.sparse_points) +
                         " points with fewer than 3 graph neighbours treated as flat");
    if (f->curves.member_count() == 0) warnings.push_back(f->cloud.source_id + ": no breaking curves detected");
  }

  nlohmann::json all = nlohmann::json::array();
  for (const auto& m : r.matches.all)
    all.push_back({{"region_p", m.region_p}, {"region_q", m.region_q}, {"chamfer", m.chamfer}});

  r.report = {{"best", match_to_json(r.matches.best)},
              {"matches", {{"pairs_evaluated", r.matches.pairs_evaluated}, {"icp_runs", r.matches.icp_runs}, {"all", all}}},
              {"fragments", {{"A", fragment_counts(r.a, cloud_a.size())}, {"B", fragment_counts(r.b, cloud_b.size())}}},
              {"timings_ms", timings},
              {"runtime_ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()},
              {"config", to_json(config)},
              {"warnings", warnings}};
  return r;
}

/// Labels for a coloured export: region ids, curve points as kCurveLabel.
inline std::vector<std::int32_t> curve_labels(const std::vector<bool>& member) {
  std::vector<std::int32_t> l(member.size(), 0);
  for (std::size_t i = 0; i < member.size(); ++i) l[i] = member[i] ? kCurveLabel : 0;
  return l;
}

inline void write_matches_csv(const MatchOutcome& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "region_p,region_q,chamfer,iterations,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
  out.precision(17);
  for (const auto& r : m.all) {
    out << r.region_p << ',' << r.region_q << ',' << r.chamfer << ',' << r.icp_iterations_used;
    for (int i = 0; i < 9; ++i) out << ',' << r.transform.rotation()(i / 3, i % 3);
    for (int i = 0; i < 3; ++i) out << ',' << r.transform.translation()[i];
    out << '\n';
  }
}

/// Debug exports for one fragment, named `<prefix>_*.ply` / `.txt`.
inline void write_fragment_debug(const FragmentAnalysis& f, const std::filesystem::path& dir, const std::string& prefix) {
  write_labeled_cloud({f.cloud, curve_labels(f.raw_curve)}, (dir / (prefix + "_curves_raw.ply")).string());
  write_labeled_cloud({f.cloud, curve_labels(f.curves.member)}, (dir / (prefix + "_curves.ply")).string());
  write_labeled_cloud({f.cloud, f.grown.region_of}, (dir / (prefix + "_regions_grown.ply")).string());
  write_labeled_cloud({f.cloud, f.segmentation.region_of}, (dir / (prefix + "_regions.ply")).string());
  f.graph.write_edge_list((dir / (prefix + "_graph_edges.txt")).string());
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

/// Writes transform.json, aligned_b.ply, matches.csv and report.json into
/// `out_dir` (created if needed), plus coloured debug PLYs on request.
inline void write_outputs(const PipelineResult& r, const std::filesystem::path& out_dir, bool debug_exports) {
  std::filesystem::create_directories(out_dir);
  write_transform(r.transform, (out_dir / "transform.json").string());
  write_point_cloud(r.aligned_b, (out_dir / "aligned_b.ply").string(), PlyFormat::binary, PlyScalar::f32);
  write_matches_csv(r.matches, (out_dir / "matches.csv").string());
  write_json(r.report, (out_dir / "report.json").string());
  if (debug_exports) {
    write_fragment_debug(r.a, out_dir, "a");
    write_fragment_debug(r.b, out_dir, "b");
  }
}

/// Metrics block for the report when a ground-truth transform is known.
inline nlohmann::json metrics_json(const RigidTransform& pred, const RigidTransform& gt, std::optional<double> normalizer,
                                   const PipelineResult* r = nullptr) {
  nlohmann::json j;
  j["rot_err_deg"] = rotation_rmse(pred, gt);
  j["trans_err"] = translation_rmse(pred, gt, normalizer);
  j["trans_normalizer"] = normalizer ? nlohmann::json(*normalizer) : nlohmann::json(nullptr);
  j["metric"] =
      "pairwise reduction of the multi-part RMSE: fragment A is the reference frame, so the error of B's relative "
      "pose is the whole prediction; rot_err_deg is the geodesic angle of R_pred^T R_gt, trans_err is |dt|/sqrt(3)";
  if (r) {
    j["chamfer_best"] = r->matches.best.chamfer;
    j["regions_p"] = r->a.segmentation.region_count();
    j["regions_q"] = r->b.segmentation.region_count();
    j["runtime_ms"] = r->report["runtime_ms"];
    j["parameters"] = r->report["config"];
  }
  return j;
}

}  // namespace fragmatch
