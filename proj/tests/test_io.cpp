#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <fragmatch/ply.hpp>
#include <fragmatch/transform_io.hpp>

#include "oracles.hpp"

using namespace fragmatch;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("fragmatch_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Ply, AsciiThreeVertices) {
  TempDir d;
  write_text(d.file("t.ply"),
             "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 3\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n");
  const auto c = read_point_cloud(d.file("t.ply"));
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], Point3(0, 0, 0));
  EXPECT_EQ(c[1], Point3(1, 0, 0));
  EXPECT_EQ(c[2], Point3(0, 1, 0));
}

TEST(Ply, SkipsOtherElementsAndProperties) {
  TempDir d;
  write_text(d.file("m.ply"),
             "ply\nformat ascii 1.0\nelement vertex 2\nproperty double nx\nproperty double x\nproperty double y\n"
             "property double z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "9 1.5 2.5 3.5 10 20 30\n9 4 5 6 40 50 60\n3 0 1 1\n");
  const auto data = read_ply(d.file("m.ply"));
  ASSERT_EQ(data.cloud.size(), 2u);
  EXPECT_EQ(data.cloud[0], Point3(1.5, 2.5, 3.5));
  ASSERT_TRUE(data.colors.has_value());
  EXPECT_EQ((*data.colors)[1], (Rgb{40, 50, 60}));
}

TEST(Ply, BinaryRoundTripIsBitExact) {
  TempDir d;
  const PointCloud c(oracle::random_cloud(500, 81, 3.0));
  write_point_cloud(c, d.file("d.ply"), PlyFormat::binary, PlyScalar::f64);
  EXPECT_EQ(read_point_cloud(d.file("d.ply")).points, c.points);

  std::vector<Point3> fl;
  for (const auto& p : c.points) fl.push_back(p.cast<float>().cast<double>());
  write_point_cloud(PointCloud(fl), d.file("f.ply"), PlyFormat::binary, PlyScalar::f32);
  EXPECT_EQ(read_point_cloud(d.file("f.ply")).points, fl);
}

TEST(Ply, AsciiRoundTripWithinTolerance) {
  TempDir d;
  const PointCloud c(oracle::random_cloud(500, 82, 3.0));
  write_point_cloud(c, d.file("a.ply"), PlyFormat::ascii, PlyScalar::f32);
  const auto back = read_point_cloud(d.file("a.ply"));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT((back[i] - c[i]).cwiseAbs().maxCoeff(), 1e-6);
  write_point_cloud(c, d.file("a64.ply"), PlyFormat::ascii, PlyScalar::f64);
  EXPECT_EQ(read_point_cloud(d.file("a64.ply")).points, c.points);
}

TEST(Ply, Errors) {
  TempDir d;
  write_text(d.file("empty.ply"),
             "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
  EXPECT_NE(error_of([&] { read_point_cloud(d.file("empty.ply")); }).find("empty cloud"), std::string::npos);

  write_text(d.file("short.ply"),
             "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
             "0 0 0\n");
  EXPECT_NE(error_of([&] { read_point_cloud(d.file("short.ply")); }).find("vertex count mismatch"), std::string::npos);

  write_text(d.file("big.ply"),
             "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n");
  EXPECT_NE(error_of([&] { read_point_cloud(d.file("big.ply")); }).find("unsupported format"), std::string::npos);

  write_text(d.file("bad.ply"), "ply\nformat ascii 1.0\nelement vertex 1\nend_header\n0 0 0\n");
  EXPECT_NE(error_of([&] { read_point_cloud(d.file("bad.ply")); }).find("malformed header"), std::string::npos);

  write_text(d.file("trunc.ply"),
             "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n" +
                 std::string(12, '\0'));
  EXPECT_NE(error_of([&] { read_point_cloud(d.file("trunc.ply")); }).find("count mismatch"), std::string::npos);

  const std::string missing = d.file("nope.ply");
  EXPECT_NE(error_of([&] { read_point_cloud(missing); }).find(missing), std::string::npos);
  EXPECT_THROW(write_point_cloud(PointCloud(), d.file("x.ply")), std::invalid_argument);
}

TEST(Ply, ObjVertices) {
  TempDir d;
  write_text(d.file("m.obj"), "# comment\nv 1 2 3\nvn 0 0 1\nv 4 5 6\nf 1 2 1\n");
  const auto c = read_point_cloud(d.file("m.obj"));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1], Point3(4, 5, 6));
}

TEST(LabeledExport, CurvePointsAreRed) {
  TempDir d;
  const PointCloud c(oracle::random_cloud(20, 83));
  write_labeled_cloud({c, std::vector<std::int32_t>(20, kCurveLabel)}, d.file("r.ply"));
  const auto data = read_ply(d.file("r.ply"));
  ASSERT_TRUE(data.colors);
  for (const auto& rgb : *data.colors) EXPECT_EQ(rgb, (Rgb{255, 0, 0}));
}

TEST(LabeledExport, TwoRegionsTwoColours) {
  TempDir d;
  const PointCloud c(oracle::random_cloud(20, 84));
  std::vector<std::int32_t> labels(20, 0);
  for (std::size_t i = 10; i < 20; ++i) labels[i] = 1;
  write_labeled_cloud({c, labels}, d.file("a.ply"));
  write_labeled_cloud({c, labels}, d.file("b.ply"));
  const auto data = read_ply(d.file("a.ply"));
  std::set<Rgb> colours(data.colors->begin(), data.colors->end());
  EXPECT_EQ(colours.size(), 2u);
  EXPECT_EQ(colours.count(Rgb{255, 0, 0}), 0u);
  EXPECT_EQ(read_bytes(d.file("a.ply")), read_bytes(d.file("b.ply")));
}

TEST(Palette, NeverRedForManyIds) {
  for (std::int32_t id = 0; id < 1000; ++id) EXPECT_NE(region_color(id), (Rgb{255, 0, 0}));
}

TEST(TransformJson, IdentityLayout) {
  const auto j = transform_to_json(RigidTransform::identity());
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["rotation"], nlohmann::json({1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0}));
  EXPECT_EQ(j["translation"], nlohmann::json({0.0, 0.0, 0.0}));
}

TEST(TransformJson, RoundTrip) {
  TempDir d;
  std::mt19937_64 rng(85);
  for (int i = 0; i < 20; ++i) {
    const RigidTransform t(random_rotation(rng), Point3(1.0 / 3.0, -2e-7, 12345.678));
    write_transform(t, d.file("t.json"));
    const auto back = read_transform(d.file("t.json"));
    EXPECT_LE((back.rotation() - t.rotation()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((back.translation() - t.translation()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(TransformJson, RejectsBadInput) {
  nlohmann::json j = transform_to_json(RigidTransform::identity());
  j["rotation"][8] = -1.0;
  EXPECT_NE(error_of([&] { transform_from_json(j); }).find("improper rotation"), std::string::npos);
  j = transform_to_json(RigidTransform::identity());
  j["rotation"][0] = 1.5;
  EXPECT_NE(error_of([&] { transform_from_json(j); }).find("non-orthonormal rotation"), std::string::npos);
  j = transform_to_json(RigidTransform::identity());
  j["schema_version"] = 2;
  EXPECT_THROW(transform_from_json(j), TransformFormatError);
  TempDir d;
  write_text(d.file("bad.json"), "{ not json");
  EXPECT_NE(error_of([&] { read_transform(d.file("bad.json")); }).find("malformed JSON"), std::string::npos);
}
