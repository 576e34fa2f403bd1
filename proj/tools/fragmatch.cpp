// fragmatch command-line front end.
//
//   fragmatch assemble A.ply B.ply --out dir [--config cfg] [--debug-exports] [--gt gt.json]
//   fragmatch segment A.ply --out dir [--config cfg]
//   fragmatch synthbreak source.ply --out dir --seed N [--jitter J]
//   fragmatch evaluate pred.json gt.json [--normalizer D]
//   fragmatch sample cube|sphere|cylinder out.ply [--points N] [--seed S]
//
// Exit codes: 0 success, 1 usage error or unreadable input, 2 pipeline failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fragmatch/fragmatch.hpp"

namespace fs = std::filesystem;
using namespace fragmatch;

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flag name -> config key. Every key is settable from the command line.
const std::vector<std::pair<std::string, std::string>> kConfigFlags = {
    {"--preset", "preset"},
    {"--k", "k"},
    {"--epsilon-scale", "epsilon_scale"},
    {"--tau", "tau"},
    {"--min-component", "min_component"},
    {"--prune-depth", "prune_depth"},
    {"--dilate-steps", "dilate_steps"},
    {"--k-vote", "k_vote"},
    {"--min-region-fraction", "min_region_fraction"},
    {"--icp-max-iterations", "icp.max_iterations"},
    {"--icp-cutoff-epsilons", "icp.cutoff_epsilons"},
    {"--icp-convergence-eps", "icp.convergence_eps"},
    {"--icp-max-source-points", "icp.max_source_points"},
    {"--corner-neighborhood", "corner_neighborhood"},
    {"--voxel-size", "voxel_size"},
    {"--seed", "seed"},
};

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "config file (key = value, [section] headers)");
    for (const auto& [flag, key] : kConfigFlags)
      app->add_option(flag, values[key], "config key '" + key + "'");
  }

  PipelineConfig resolve() const {
    ConfigEntries file, flags;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw UsageError(config_path + ": no such file");
      file = read_config_file(config_path);
    }
    for (const auto& [flag, key] : kConfigFlags) {
      const auto it = values.find(key);
      if (it != values.end() && !it->second.empty()) flags.emplace_back(key, it->second);
    }
    return resolve_config(file, flags);
  }
};

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError(path + ": no such file");
}

PointCloud load(const std::string& path) {
  require_file(path);
  auto c = read_point_cloud(path);
  c.source_id = path;
  return c;
}

int run_assemble(const std::string& a_path, const std::string& b_path, const ConfigFlags& cf, const std::string& out,
                 bool debug, const std::string& gt_path, std::optional<double> normalizer) {
  const PipelineConfig config = cf.resolve();
  const PointCloud a = load(a_path);
  const PointCloud b = load(b_path);
  std::optional<RigidTransform> gt;
  if (!gt_path.empty()) {
    require_file(gt_path);
    gt = read_transform(gt_path);
  }
  auto result = run_pipeline(a, b, config);
  if (gt) result.report["metrics"] = metrics_json(result.transform, *gt, normalizer, &result);
  write_outputs(result, out, debug);
  if (gt) write_json(result.report["metrics"], (fs::path(out) / "metrics.json").string());
  std::cout << "best pair " << result.matches.best.region_p << "," << result.matches.best.region_q
            << " chamfer " << result.matches.best.chamfer << "\n";
  if (gt)
    std::cout << "rot_err " << result.report["metrics"]["rot_err_deg"].get<double>() << " trans_err "
              << result.report["metrics"]["trans_err"].get<double>() << "\n";
  return 0;
}

int run_segment(const std::string& path, const ConfigFlags& cf, const std::string& out) {
  const PipelineConfig config = cf.resolve();
  const PointCloud c = load(path);
  const FragmentAnalysis f = analyze_fragment(c, config, "A", true);
  fs::create_directories(out);
  write_fragment_debug(f, out, "a");
  nlohmann::json j = fragment_counts(f, c.size());
  j["region_of"] = f.segmentation.region_of;
  j["timings_ms"] = f.timings_ms;
  j["config"] = to_json(config);
  write_json(j, (fs::path(out) / "segmentation.json").string());
  std::cout << f.segmentation.region_count() << " regions, " << f.curves.member_count() << " curve points\n";
  return 0;
}

int run_synthbreak(const std::string& src_path, const std::string& out, std::uint64_t seed, double jitter,
                   const std::string& fill_shape, double max_angle, double max_shift, double fill_density) {
  PointCloud src = load(src_path);
  FractureSpec spec;
  const Aabb box = Aabb::of(src);
  spec.plane = corner_cut(box, seed);
  spec.jitter_amp = jitter * box.diagonal();
  spec.pose_seed = seed;
  spec.max_angle_deg = max_angle;
  spec.max_shift = max_shift;
  if (!fill_shape.empty()) {
    const auto shape = parse_primitive(fill_shape);
    if (!shape) throw UsageError("unknown fill shape '" + fill_shape + "'");
    const double density = fill_density > 0.0 ? fill_density : static_cast<double>(src.size()) / primitive_area(*shape);
    spec.face_fill = FaceFill{primitive_inside(*shape), density};
  }
  const SyntheticFracture f = generate_fracture(src, spec);
  fs::create_directories(out);
  const fs::path dir(out);
  write_point_cloud(f.fragment_a, (dir / "fragment_a.ply").string());
  write_point_cloud(f.fragment_b, (dir / "fragment_b.ply").string());
  write_transform(f.gt_relative, (dir / "gt.json").string());
  write_json({{"seed", seed},
              {"jitter_fraction", jitter},
              {"jitter_amp", spec.jitter_amp},
              {"plane", {{"normal", {spec.plane.normal.x(), spec.plane.normal.y(), spec.plane.normal.z()}},
                         {"offset", spec.plane.offset}}},
              {"max_angle_deg", max_angle},
              {"max_shift", max_shift},
              {"source_diagonal", f.source_diagonal},
              {"points_a", f.fragment_a.size()},
              {"points_b", f.fragment_b.size()},
              {"pose_a", transform_to_json(f.pose_a)},
              {"pose_b", transform_to_json(f.pose_b)}},
             (dir / "meta.json").string());
  std::cout << "fragment A " << f.fragment_a.size() << " points, fragment B " << f.fragment_b.size()
            << " points, diagonal " << f.source_diagonal << "\n";
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path, std::optional<double> normalizer) {
  require_file(pred_path);
  require_file(gt_path);
  const RigidTransform pred = read_transform(pred_path);
  const RigidTransform gt = read_transform(gt_path);
  std::cout << "rot_err " << rotation_rmse(pred, gt) << "\n"
            << "trans_err " << translation_rmse(pred, gt, normalizer) << "\n";
  return 0;
}

int run_sample(const std::string& shape_name, const std::string& out, std::size_t n, std::uint64_t seed) {
  const auto shape = parse_primitive(shape_name);
  if (!shape) throw UsageError("unknown shape '" + shape_name + "' (expected cube, sphere or cylinder)");
  write_point_cloud(sample_primitive(*shape, n, seed), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-fragment reassembly from breaking curves and region matching"};
  app.require_subcommand(1);

  std::string a_path, b_path, out, gt_path, pred_path, src_path, fill_shape, shape_name;
  bool debug = false;
  std::optional<double> normalizer;
  std::uint64_t seed = 0;
  double jitter = 0.0, max_angle = 60.0, max_shift = 0.3, fill_density = 0.0;
  std::size_t points = 20000;

  ConfigFlags assemble_cfg, segment_cfg;

  auto* assemble = app.add_subcommand("assemble", "register fragment B onto fragment A");
  assemble->add_option("A", a_path, "fragment A (PLY or OBJ)")->required();
  assemble->add_option("B", b_path, "fragment B (PLY or OBJ)")->required();
  assemble->add_option("--out", out, "output directory")->required();
  assemble->add_flag("--debug-exports", debug, "write coloured curve and region PLYs");
  assemble->add_option("--gt", gt_path, "ground-truth transform JSON; adds metrics to the report");
  assemble->add_option("--normalizer", normalizer, "divide the translation error by this length");
  assemble_cfg.attach(assemble);

  auto* segment = app.add_subcommand("segment", "breaking curves and regions of one fragment");
  segment->add_option("A", a_path, "fragment (PLY or OBJ)")->required();
  segment->add_option("--out", out, "output directory")->required();
  segment_cfg.attach(segment);

  auto* synth = app.add_subcommand("synthbreak", "split a cloud by a seeded corner cut and scramble both pieces");
  synth->add_option("source", src_path, "source cloud")->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--seed", seed, "cut and pose seed")->required();
  synth->add_option("--jitter", jitter, "relief amplitude as a fraction of the bounding-box diagonal");
  synth->add_option("--fill-shape", fill_shape, "sample the fracture face inside this primitive (cube|sphere|cylinder)");
  synth->add_option("--fill-density", fill_density, "face samples per unit area (default: source density)");
  synth->add_option("--max-angle", max_angle, "pose rotation bound in degrees");
  synth->add_option("--max-shift", max_shift, "pose shift bound as a fraction of the diagonal");

  auto* evaluate = app.add_subcommand("evaluate", "pose error between two transform files");
  evaluate->add_option("pred", pred_path, "predicted transform JSON")->required();
  evaluate->add_option("gt", gt_path, "ground-truth transform JSON")->required();
  evaluate->add_option("--normalizer", normalizer, "divide the translation error by this length");

  auto* sample = app.add_subcommand("sample", "write a uniformly sampled unit primitive");
  sample->add_option("shape", shape_name, "cube, sphere or cylinder")->required();
  sample->add_option("out", out, "output PLY")->required();
  sample->add_option("--points", points, "number of points");
  sample->add_option("--seed", seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*assemble) return run_assemble(a_path, b_path, assemble_cfg, out, debug, gt_path, normalizer);
    if (*segment) return run_segment(a_path, segment_cfg, out);
    if (*synth) return run_synthbreak(src_path, out, seed, jitter, fill_shape, max_angle, max_shift, fill_density);
    if (*evaluate) return run_evaluate(pred_path, gt_path, normalizer);
    if (*sample) return run_sample(shape_name, out, points, seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
