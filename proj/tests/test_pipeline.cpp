#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include <sys/wait.h>
#include <unistd.h>

#include <fragmatch/fragmatch.hpp>

#include "oracles.hpp"

using namespace fragmatch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fragmatch_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticFracture cube_fracture(std::uint64_t seed, double jitter = 0.0) {
  const auto src = sample_primitive(Primitive::cube, 20000, 1000 + seed);
  const Aabb box = Aabb::of(src);
  FractureSpec spec;
  spec.plane = corner_cut(box, seed);
  spec.jitter_amp = jitter * box.diagonal();
  spec.pose_seed = seed;
  spec.face_fill = FaceFill{primitive_inside(Primitive::cube), 20000.0 / primitive_area(Primitive::cube)};
  return generate_fracture(src, spec);
}

std::size_t ply_vertex_count(const fs::path& p) { return read_point_cloud(p.string()).size(); }

}  // namespace

TEST(Preprocess, NoDuplicatesIsIdentity) {
  const PointCloud c(oracle::random_cloud(100, 91));
  EXPECT_EQ(preprocess(c).points, c.points);
}

TEST(Preprocess, DuplicateDropped) {
  const PointCloud c(std::vector<Point3>{Point3(1, 2, 3), Point3(0, 0, 0), Point3(1, 2, 3)});
  EXPECT_EQ(preprocess(c).points, (std::vector<Point3>{Point3(1, 2, 3), Point3(0, 0, 0)}));
}

TEST(Preprocess, VoxelGridShrinksByEight) {
  std::vector<Point3> grid;
  const int n = 100;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) grid.emplace_back(0.01 * i + 0.001, 0.01 * j + 0.001, 0.01 * k + 0.001);
  const auto out = preprocess(PointCloud(std::move(grid)), 0.02);
  const double ratio = 1e6 / static_cast<double>(out.size());
  EXPECT_NEAR(ratio, 8.0, 0.4);
}

TEST(Pipeline, SelfAlignmentIsIdentity) {
  const auto f = cube_fracture(3);
  const auto r = run_pipeline(f.fragment_b, f.fragment_b, PipelineConfig::for_preset(Preset::synthetic));
  EXPECT_LT(r.matches.best.chamfer, 1e-9);
  EXPECT_LT(geodesic_rotation_angle(r.transform, RigidTransform::identity()), 1e-6);
  EXPECT_LT(r.transform.translation().norm(), 1e-6);
}

TEST(Pipeline, PlanarCutCubePair) {
  const auto f = cube_fracture(0);
  const auto r = run_pipeline(f.fragment_a, f.fragment_b, PipelineConfig::for_preset(Preset::synthetic));
  const auto e = evaluate_pair(r.transform, f);
  EXPECT_LT(e.rot_err_deg, 5.0);
  EXPECT_LT(e.trans_err, 0.05);
}

TEST(Pipeline, DeterministicAcrossThreadCounts) {
  const auto f = cube_fracture(5);
  const auto config = PipelineConfig::for_preset(Preset::synthetic);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "3", "8"}) {
    setenv("FRAGMATCH_THREADS", threads, 1);
    outputs.push_back(transform_to_string(run_pipeline(f.fragment_a, f.fragment_b, config).transform));
  }
  unsetenv("FRAGMATCH_THREADS");
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST(Pipeline, ReportCountsMatchDebugArtifacts) {
  const auto f = cube_fracture(7);
  const auto r = run_pipeline(f.fragment_a, f.fragment_b, PipelineConfig::for_preset(Preset::synthetic));
  const auto dir = scratch("debug");
  write_outputs(r, dir, true);
  for (const char* name : {"transform.json", "aligned_b.ply", "matches.csv", "report.json", "a_curves.ply",
                           "a_regions.ply", "b_regions_grown.ply", "b_graph_edges.txt"})
    EXPECT_TRUE(fs::exists(dir / name)) << name;

  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  const auto& fa = report["fragments"]["A"];
  EXPECT_EQ(fa["points"].get<std::size_t>(), ply_vertex_count(dir / "a_regions.ply"));
  const auto red = [&](const fs::path& p) {
    const auto d = read_ply(p.string());
    return static_cast<std::size_t>(std::count(d.colors->begin(), d.colors->end(), Rgb{255, 0, 0}));
  };
  EXPECT_EQ(fa["curve_points"].get<std::size_t>(), red(dir / "a_curves.ply"));
  EXPECT_EQ(fa["raw_curve_points"].get<std::size_t>(), red(dir / "a_curves_raw.ply"));
  std::ifstream edges(dir / "a_graph_edges.txt");
  std::size_t lines = 0;
  for (std::string l; std::getline(edges, l);) ++lines;
  EXPECT_EQ(fa["edges"].get<std::size_t>(), lines);

  std::ifstream csv(dir / "matches.csv");
  std::size_t rows = 0;
  for (std::string l; std::getline(csv, l);) ++rows;
  EXPECT_EQ(rows - 1, report["matches"]["pairs_evaluated"].get<std::size_t>());
  EXPECT_EQ(ply_vertex_count(dir / "aligned_b.ply"), r.b.cloud.size());
  fs::remove_all(dir);
}

TEST(Pipeline, SegmentMatchesAssembleSegmentation) {
  const auto f = cube_fracture(8);
  const auto config = PipelineConfig::for_preset(Preset::synthetic);
  const auto r = run_pipeline(f.fragment_a, f.fragment_b, config);
  const auto alone = analyze_fragment(f.fragment_a, config, "A", true);
  EXPECT_EQ(alone.segmentation.region_of, r.a.segmentation.region_of);
  EXPECT_EQ(alone.curves.member, r.a.curves.member);
}

TEST(Pipeline, StageLabelledErrors) {
  PipelineConfig config;
  config.min_region_fraction = 0.9;
  const auto f = cube_fracture(9);
  try {
    run_pipeline(f.fragment_a, f.fragment_b, config);
    FAIL() << "expected a pipeline error";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "A/filter_small_regions");
    EXPECT_NE(std::string(e.what()).find("no candidate regions"), std::string::npos);
  }
  const PointCloud tiny(oracle::random_cloud(5, 92));
  EXPECT_THROW(run_pipeline(tiny, tiny, PipelineConfig{}), PipelineError);
}

// ---------------------------------------------------------------------------
// Command-line integration

namespace {

struct CliResult {
  int code;
  std::string output;
};

CliResult cli(const std::string& args) {
  static int calls = 0;
  const auto log = fs::temp_directory_path() /
                   ("fragmatch_cli_" + std::to_string(getpid()) + "_" + std::to_string(calls++) + ".txt");
  const std::string cmd = std::string("\"") + FRAGMATCH_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  fs::remove(log);
  return r;
}

}  // namespace

TEST(Cli, EndToEnd) {
  const auto dir = scratch("cli");
  const auto p = [&](const char* name) { return (dir / name).string(); };

  ASSERT_EQ(cli("sample cube " + p("cube.ply") + " --points 20000 --seed 1004").code, 0);
  ASSERT_EQ(cli("synthbreak " + p("cube.ply") + " --out " + p("frac") + " --seed 4 --fill-shape cube").code, 0);
  for (const char* f : {"frac/fragment_a.ply", "frac/fragment_b.ply", "frac/gt.json", "frac/meta.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;

  const auto run = cli("assemble " + p("frac/fragment_a.ply") + " " + p("frac/fragment_b.ply") + " --out " + p("out") +
                       " --gt " + p("frac/gt.json") + " --debug-exports");
  ASSERT_EQ(run.code, 0) << run.output;
  EXPECT_TRUE(fs::exists(dir / "out/transform.json"));
  EXPECT_TRUE(fs::exists(dir / "out/metrics.json"));
  EXPECT_TRUE(fs::exists(dir / "out/a_regions.ply"));
  const auto report = nlohmann::json::parse(slurp(dir / "out/report.json"));
  EXPECT_TRUE(report.contains("metrics"));
  EXPECT_EQ(report["config"]["tau"].get<double>(), 0.99);

  // Flags override the config file, which overrides the preset.
  {
    std::ofstream cfg(p("c.cfg"));
    cfg << "preset = scanned\nk_vote = 9\ntau = 0.95\n";
  }
  const auto seg = cli("segment " + p("frac/fragment_a.ply") + " --out " + p("seg") + " --config " + p("c.cfg") +
                       " --tau 0.97");
  ASSERT_EQ(seg.code, 0) << seg.output;
  const auto sj = nlohmann::json::parse(slurp(dir / "seg/segmentation.json"));
  EXPECT_EQ(sj["config"]["preset"], "scanned");
  EXPECT_EQ(sj["config"]["k_vote"], 9);
  EXPECT_EQ(sj["config"]["tau"].get<double>(), 0.97);
  EXPECT_EQ(sj["config"]["min_component"], 20);

  const auto ev = cli("evaluate " + p("frac/gt.json") + " " + p("frac/gt.json"));
  EXPECT_EQ(ev.code, 0);
  EXPECT_NE(ev.output.find("rot_err 0\n"), std::string::npos) << ev.output;
  EXPECT_NE(ev.output.find("trans_err 0\n"), std::string::npos) << ev.output;

  // Identical reruns give byte-identical transforms.
  ASSERT_EQ(cli("assemble " + p("frac/fragment_a.ply") + " " + p("frac/fragment_b.ply") + " --out " + p("out2")).code, 0);
  EXPECT_EQ(slurp(dir / "out/transform.json"), slurp(dir / "out2/transform.json"));
  fs::remove_all(dir);
}

TEST(Cli, UsageErrors) {
  const auto missing = (fs::temp_directory_path() / "fragmatch_no_such_file.ply").string();
  const auto m = cli("assemble " + missing + " " + missing + " --out /tmp/fragmatch_never");
  EXPECT_EQ(m.code, 1);
  EXPECT_NE(m.output.find(missing), std::string::npos) << m.output;
  EXPECT_EQ(cli("assemble a.ply b.ply --out x --frobnicate").code, 1);
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("evaluate only_one.json").code, 1);
  const auto badcfg = cli("segment " + missing + " --out /tmp/fragmatch_never --tau nope");
  EXPECT_EQ(badcfg.code, 1);
}

TEST(Cli, PipelineFailureExitsTwo) {
  const auto dir = scratch("cli_fail");
  const auto cube = (dir / "cube.ply").string();
  ASSERT_EQ(cli("sample cube " + cube + " --points 3000").code, 0);
  const auto r = cli("assemble " + cube + " " + cube + " --out " + (dir / "o").string() + " --min-region-fraction 0.9");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("no candidate regions"), std::string::npos) << r.output;
  fs::remove_all(dir);
}
