#include <gtest/gtest.h>

#include <random>

#include <fragmatch/evaluation.hpp>
#include <fragmatch/registration.hpp>

#include "oracles.hpp"

using namespace fragmatch;

TEST(RotationRmse, Cases) {
  const RigidTransform gt(axis_angle_rotation(Point3(1, 2, 3), 40.0), Point3(1, 1, 1));
  EXPECT_EQ(rotation_rmse(gt, gt), 0.0);
  const RigidTransform quarter = compose(RigidTransform::from_rotation(axis_angle_rotation(Point3::UnitZ(), 90.0)), gt);
  EXPECT_NEAR(rotation_rmse(quarter, gt), 90.0, 1e-9);
  std::mt19937_64 rng(71);
  const RigidTransform small =
      compose(RigidTransform::from_rotation(axis_angle_rotation(random_unit_vector(rng), 2.5)), gt);
  EXPECT_NEAR(rotation_rmse(small, gt), 2.5, 1e-9);
}

TEST(TranslationRmse, Cases) {
  const RigidTransform gt = RigidTransform::from_translation(Point3(1, 2, 3));
  EXPECT_EQ(translation_rmse(gt, gt), 0.0);
  EXPECT_NEAR(translation_rmse(RigidTransform::from_translation(Point3(2, 3, 4)), gt), 1.0, 1e-15);
  EXPECT_NEAR(translation_rmse(RigidTransform::from_translation(Point3(4, 2, 3)), gt, 10.0), std::sqrt(3.0) / 10.0,
              1e-15);
  EXPECT_NEAR(std::sqrt(3.0) / 10.0, 0.17320508075688773, 1e-15);
  EXPECT_THROW(translation_rmse(gt, gt, 0.0), std::invalid_argument);
}

TEST(Synthbreak, AxisPlaneHalvesCube) {
  const auto src = sample_primitive(Primitive::cube, 20000, 72);
  FractureSpec spec;
  spec.plane = {Point3::UnitX(), centroid(src.points).x()};
  spec.pose_seed = 72;
  const auto f = generate_fracture(src, spec);
  const double na = static_cast<double>(f.fragment_a.size()), nb = static_cast<double>(f.fragment_b.size());
  EXPECT_LT(std::abs(na - nb), 0.1 * std::max(na, nb));
}

TEST(Synthbreak, ReassemblyReproducesSource) {
  const auto src = sample_primitive(Primitive::cube, 5000, 73);
  FractureSpec spec;
  spec.plane = corner_cut(Aabb::of(src), 73);
  spec.pose_seed = 73;
  const auto f = generate_fracture(src, spec);
  std::vector<Point3> joined = f.fragment_a.points;
  for (const auto& p : apply_transform(f.gt_relative, f.fragment_b).points) joined.push_back(p);
  // Into the assembled frame of A, then compare with the source.
  const PointCloud assembled = apply_transform(inverse(f.pose_a), PointCloud(joined));
  EXPECT_LT(chamfer_distance(assembled, src), 1e-12);
  // Every source point lands in exactly one fragment.
  std::vector<int> hits(src.size(), 0);
  for (auto i : f.source_index_a) ++hits[static_cast<std::size_t>(i)];
  for (auto i : f.source_index_b) ++hits[static_cast<std::size_t>(i)];
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Synthbreak, SeedDeterminism) {
  const auto src = sample_primitive(Primitive::sphere, 3000, 74);
  FractureSpec spec;
  spec.plane = {Point3(1, 1, 0), 0.05};
  spec.jitter_amp = 0.02;
  spec.pose_seed = 5;
  const auto f1 = generate_fracture(src, spec);
  const auto f2 = generate_fracture(src, spec);
  EXPECT_EQ(f1.fragment_a.points, f2.fragment_a.points);
  EXPECT_EQ(f1.fragment_b.points, f2.fragment_b.points);
  EXPECT_EQ(f1.gt_relative, f2.gt_relative);
  spec.pose_seed = 6;
  const auto f3 = generate_fracture(src, spec);
  EXPECT_FALSE(f3.pose_a == f1.pose_a);
}

TEST(Synthbreak, PosesRespectBounds) {
  const auto src = sample_primitive(Primitive::cylinder, 4000, 75);
  const double diag = Aabb::of(src).diagonal();
  const Point3 pivot = centroid(src.points);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FractureSpec spec;
    spec.plane = {Point3(0, 0, 1), 0.1};
    spec.pose_seed = seed;
    const auto f = generate_fracture(src, spec);
    for (const auto* pose : {&f.pose_a, &f.pose_b}) {
      EXPECT_LE(geodesic_rotation_angle(pose->rotation(), Matrix3::Identity()), 60.0 + 1e-9);
      EXPECT_LE(((*pose)(pivot) - pivot).norm(), 0.3 * diag + 1e-9);
    }
  }
}

TEST(Synthbreak, JitterStaysWithinAmplitude) {
  const CutSurface s({Point3(0, 0, 1), 0.0}, 0.05, 1.0, 9);
  std::mt19937_64 rng(76);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) EXPECT_LE(std::abs(s.height(u(rng), u(rng))), 0.05 + 1e-15);
}

TEST(Synthbreak, DegenerateCut) {
  const auto src = sample_primitive(Primitive::cube, 2000, 77);
  FractureSpec spec;
  spec.plane = {Point3::UnitX(), 10.0};
  EXPECT_THROW(generate_fracture(src, spec), std::invalid_argument);
}

TEST(EvaluatePair, ConstructionOracle) {
  const auto src = sample_primitive(Primitive::cube, 3000, 78);
  FractureSpec spec;
  spec.plane = corner_cut(Aabb::of(src), 78);
  spec.pose_seed = 78;
  const auto f = generate_fracture(src, spec);
  const auto zero = evaluate_pair(f.gt_relative, f);
  EXPECT_EQ(zero.rot_err_deg, 0.0);
  EXPECT_EQ(zero.trans_err, 0.0);
  // Rotation perturbed by 3°, translation moved by 0.01·diag along x.
  const RigidTransform pred(axis_angle_rotation(Point3(0, 1, 1), 3.0) * f.gt_relative.rotation(),
                            f.gt_relative.translation() + Point3(0.01 * f.source_diagonal, 0, 0));
  const auto e = evaluate_pair(pred, f);
  EXPECT_NEAR(e.rot_err_deg, 3.0, 1e-9);
  EXPECT_NEAR(e.trans_err, 0.01 / std::sqrt(3.0), 1e-12);
}

TEST(EvaluatePair, SwappingFragmentsKeepsMetrics) {
  // Rotation error is symmetric under inversion for any error; translation
  // error is symmetric when the prediction differs by a pure translation.
  std::mt19937_64 rng(79);
  const RigidTransform gt(random_rotation(rng), Point3(0.3, -0.2, 0.5));
  const RigidTransform rot_off = compose(gt, RigidTransform::from_rotation(axis_angle_rotation(Point3(1, 0, 0), 7.0)));
  EXPECT_NEAR(rotation_rmse(rot_off, gt), rotation_rmse(inverse(rot_off), inverse(gt)), 1e-9);
  const RigidTransform shifted(gt.rotation(), gt.translation() + Point3(0.01, 0.02, -0.03));
  EXPECT_NEAR(translation_rmse(shifted, gt), translation_rmse(inverse(shifted), inverse(gt)), 1e-12);
  EXPECT_NEAR(rotation_rmse(shifted, gt), rotation_rmse(inverse(shifted), inverse(gt)), 1e-9);
}

TEST(Primitives, SamplesLieOnSurface) {
  for (auto shape : {Primitive::cube, Primitive::sphere, Primitive::cylinder}) {
    const auto c = sample_primitive(shape, 2000, 80);
    ASSERT_EQ(c.size(), 2000u);
    for (const auto& p : c.points) {
      switch (shape) {
        case Primitive::cube: EXPECT_NEAR(p.cwiseAbs().maxCoeff(), 0.5, 1e-12); break;
        case Primitive::sphere: EXPECT_NEAR(p.norm(), 0.5, 1e-12); break;
        case Primitive::cylinder:
          EXPECT_TRUE(std::abs(p.head<2>().norm() - 0.5) < 1e-12 || std::abs(std::abs(p.z()) - 0.5) < 1e-12);
          break;
      }
    }
  }
}
