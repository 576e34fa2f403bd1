#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fragmatch/geometry.hpp"

namespace fragmatch {

// Pose-error metrics. For two fragments, fixing fragment A as the reference
// frame makes the relative pose of B the whole prediction, so the multi-part
// RMSE over parts reduces to the error of that one relative transform.

/// Relative rotation error in degrees: angle of R_predᵀ·R_gt.
inline double rotation_rmse(const RigidTransform& pred, const RigidTransform& gt) {
  return geodesic_rotation_angle(pred, gt);
}

/// RMS over the three translation components, ‖Δt‖/√3, optionally divided
/// by a normalizer such as the bounding-box diagonal.
inline double translation_rmse(const RigidTransform& pred, const RigidTransform& gt,
                               std::optional<double> normalizer = std::nullopt) {
  if (normalizer && !(*normalizer > 0.0)) throw std::invalid_argument("normalizer must be positive");
  const double rms = (pred.translation() - gt.translation()).norm() / std::sqrt(3.0);
  return normalizer ? rms / *normalizer : rms;
}

// ---------------------------------------------------------------------------
// Synthetic fractures

struct CutPlane {
  Point3 normal = Point3::UnitZ();  // normalized on use
  double offset = 0.0;              // plane: normal·x = offset
};

/// Smooth low-frequency relief added to a cut plane: a normalized sum of
/// three sinusoids over the in-plane coordinates. |height| <= amplitude.
class CutSurface {
 public:
  CutSurface(const CutPlane& plane, double amplitude, double length_scale, std::uint64_t seed)
      : normal_(plane.normal.normalized()), offset_(plane.offset), amplitude_(amplitude) {
    if (!plane.normal.allFinite() || plane.normal.norm() == 0.0) throw std::invalid_argument("cut normal must be non-zero");
    if (amplitude < 0.0) throw std::invalid_argument("jitter amplitude must be non-negative");
    const Point3 helper = std::abs(normal_.x()) < 0.9 ? Point3::UnitX() : Point3::UnitY();
    u_ = normal_.cross(helper).normalized();
    v_ = normal_.cross(u_);
    std::mt19937_64 rng(seed ^ 0x6a09e667f3bcc909ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double weight_sum = 0.0;
    for (auto& w : waves_) {
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      const double cycles = 0.75 + 1.25 * unit(rng);  // wavelengths across the object
      w.kx = 2.0 * std::numbers::pi * cycles / length_scale * std::cos(theta);
      w.ky = 2.0 * std::numbers::pi * cycles / length_scale * std::sin(theta);
      w.phase = 2.0 * std::numbers::pi * unit(rng);
      w.weight = 0.5 + unit(rng);
      weight_sum += w.weight;
    }
    for (auto& w : waves_) w.weight /= weight_sum;
  }

  const Point3& normal() const noexcept { return normal_; }
  const Point3& u_axis() const noexcept { return u_; }
  const Point3& v_axis() const noexcept { return v_; }
  double offset() const noexcept { return offset_; }

  double height(double u, double v) const {
    if (amplitude_ == 0.0) return 0.0;
    double h = 0.0;
    for (const auto& w : waves_) h += w.weight * std::sin(w.kx * u + w.ky * v + w.phase);
    return amplitude_ * h;
  }

  /// Positive on the side the normal points to.
  double signed_distance(const Point3& p) const {
    return normal_.dot(p) - offset_ - height(u_.dot(p), v_.dot(p));
  }

  Point3 point_at(double u, double v) const {
    return u * u_ + v * v_ + (offset_ + height(u, v)) * normal_;
  }

 private:
  struct Wave {
    double kx = 0, ky = 0, phase = 0, weight = 0;
  };
  Point3 normal_, u_, v_;
  double offset_;
  double amplitude_;
  std::array<Wave, 3> waves_{};
};

/// Extra samples on the cut surface inside a solid, so that fragments carry
/// a fracture face. The source cloud alone only samples the outer surface.
struct FaceFill {
  std::function<bool(const Point3&)> inside;
  double density = 0.0;  // points per unit area
};

struct FractureSpec {
  CutPlane plane;
  double jitter_amp = 0.0;  // model units
  std::uint64_t pose_seed = 0;
  double max_angle_deg = 60.0;
  double max_shift = 0.3;  // fraction of the bounding-box diagonal
  std::optional<FaceFill> face_fill;
};

struct SyntheticFracture {
  PointCloud fragment_a, fragment_b;  // scrambled frames
  RigidTransform pose_a, pose_b;      // assembled frame -> scrambled frame
  RigidTransform gt_relative;         // maps b's frame into a's frame
  std::vector<std::int64_t> source_index_a, source_index_b;  // -1 for fill points
  std::uint64_t seed = 0;
  FractureSpec spec;
  double source_diagonal = 0.0;
};

/// Rigid motion about `pivot` with rotation angle <= max_angle_deg and
/// shift length <= max_shift.
template <class Rng>
RigidTransform random_bounded_pose(Rng& rng, const Point3& pivot, double max_angle_deg, double max_shift) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Point3 axis = random_unit_vector(rng);
  const double angle = max_angle_deg * unit(rng);
  const Point3 dir = random_unit_vector(rng);
  const double shift = max_shift * unit(rng);
  const Matrix3 r = axis_angle_rotation(axis, angle);
  return {r, pivot + shift * dir - r * pivot};
}

/// Splits `source` by the (optionally jittered) cut surface and scrambles
/// each side with an independent bounded random pose. Points with positive
/// signed distance go to fragment A.
inline SyntheticFracture generate_fracture(const PointCloud& source, const FractureSpec& spec) {
  if (source.size() < 1000) throw std::invalid_argument("generate_fracture: source needs at least 1000 points");
  if (spec.max_angle_deg < 0.0 || spec.max_shift < 0.0) throw std::invalid_argument("generate_fracture: negative pose bound");
  const Aabb box = Aabb::of(source);
  const double diag = box.diagonal();
  const CutSurface cut(spec.plane, spec.jitter_amp, diag, spec.pose_seed);

  SyntheticFracture f;
  f.seed = spec.pose_seed;
  f.spec = spec;
  f.source_diagonal = diag;
  std::vector<Point3> a, b;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (cut.signed_distance(source[i]) > 0.0) {
      a.push_back(source[i]);
      f.source_index_a.push_back(static_cast<std::int64_t>(i));
    } else {
      b.push_back(source[i]);
      f.source_index_b.push_back(static_cast<std::int64_t>(i));
    }
  }
  if (a.empty() || b.empty()) throw std::invalid_argument("degenerate cut: one side is empty");

  if (spec.face_fill && spec.face_fill->density > 0.0) {
    const auto& fill = *spec.face_fill;
    if (!fill.inside) throw std::invalid_argument("face fill needs an inside predicate");
    // Bounds of the box in cut-plane coordinates.
    double u0 = std::numeric_limits<double>::infinity(), u1 = -u0, v0 = u0, v1 = -u0;
    for (int corner = 0; corner < 8; ++corner) {
      const Point3 c((corner & 1) ? box.max_corner.x() : box.min_corner.x(),
                     (corner & 2) ? box.max_corner.y() : box.min_corner.y(),
                     (corner & 4) ? box.max_corner.z() : box.min_corner.z());
      u0 = std::min(u0, cut.u_axis().dot(c));
      u1 = std::max(u1, cut.u_axis().dot(c));
      v0 = std::min(v0, cut.v_axis().dot(c));
      v1 = std::max(v1, cut.v_axis().dot(c));
    }
    const auto count = static_cast<std::size_t>(std::llround(fill.density * (u1 - u0) * (v1 - v0)));
    // Each side gets its own independent sample of the face.
    const auto sample_face = [&](std::uint64_t stream, std::vector<Point3>& out, std::vector<std::int64_t>& idx) {
      std::mt19937_64 rng(spec.pose_seed * 0x9e3779b97f4a7c15ULL + stream);
      std::uniform_real_distribution<double> du(u0, u1), dv(v0, v1);
      for (std::size_t s = 0; s < count; ++s) {
        const double u = du(rng), v = dv(rng);
        const Point3 p = cut.point_at(u, v);
        if (fill.inside(p)) {
          out.push_back(p);
          idx.push_back(-1);
        }
      }
    };
    sample_face(1, a, f.source_index_a);
    sample_face(2, b, f.source_index_b);
  }

  std::mt19937_64 rng(spec.pose_seed);
  const Point3 pivot = centroid(source.points);
  f.pose_a = random_bounded_pose(rng, pivot, spec.max_angle_deg, spec.max_shift * diag);
  f.pose_b = random_bounded_pose(rng, pivot, spec.max_angle_deg, spec.max_shift * diag);
  f.gt_relative = compose(f.pose_a, inverse(f.pose_b));
  f.fragment_a = apply_transform(f.pose_a, PointCloud(std::move(a), source.source_id + "#A"));
  f.fragment_b = apply_transform(f.pose_b, PointCloud(std::move(b), source.source_id + "#B"));
  return f;
}

/// A plane cutting one corner off `box`. The corner is picked by the seed;
/// the three edge intercepts are a shuffled draw from the lower, middle and
/// upper thirds of [lo, hi] (as fractions of the edge lengths), kept away
/// from the stratum borders. Distinct intercepts keep the triangular cut
/// face clear of mirror symmetry. The normal points toward the corner, so
/// the corner piece becomes fragment A.
inline CutPlane corner_cut(const Aabb& box, std::uint64_t seed, double lo = 0.5, double hi = 0.95) {
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw std::invalid_argument("corner_cut: need 0 < lo < hi < 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> inner(0.2, 0.8);
  const Point3 ext = box.extent();
  Point3 corner, dir;
  for (int a = 0; a < 3; ++a) {
    const bool high = (rng() & 1) != 0;
    corner[a] = high ? box.max_corner[a] : box.min_corner[a];
    dir[a] = high ? -1.0 : 1.0;
  }
  std::array<double, 3> f{};
  for (int i = 0; i < 3; ++i) f[static_cast<std::size_t>(i)] = lo + (hi - lo) * (i + inner(rng)) / 3.0;
  std::shuffle(f.begin(), f.end(), rng);
  std::array<Point3, 3> p{corner, corner, corner};
  for (int a = 0; a < 3; ++a) p[static_cast<std::size_t>(a)][a] += f[static_cast<std::size_t>(a)] * ext[a] * dir[a];
  Point3 n = (p[1] - p[0]).cross(p[2] - p[0]).normalized();
  if (n.dot(corner - p[0]) < 0.0) n = -n;
  return {n, n.dot(p[0])};
}

struct PairErrors {
  double rot_err_deg = 0.0;
  double trans_err = 0.0;  // normalized by the source bounding-box diagonal
};

inline PairErrors evaluate_pair(const RigidTransform& pred, const SyntheticFracture& f) {
  return {rotation_rmse(pred, f.gt_relative), translation_rmse(pred, f.gt_relative, f.source_diagonal)};
}

// ---------------------------------------------------------------------------
// Primitive surface samplers (uniform by area), unit-sized and centred at
// the origin, with matching solid-interior predicates for face fill.

enum class Primitive { cube, sphere, cylinder };

inline std::optional<Primitive> parse_primitive(const std::string& s) {
  if (s == "cube") return Primitive::cube;
  if (s == "sphere") return Primitive::sphere;
  if (s == "cylinder") return Primitive::cylinder;
  return std::nullopt;
}

inline double primitive_area(Primitive shape) {
  switch (shape) {
    case Primitive::cube: return 6.0;
    case Primitive::sphere: return std::numbers::pi;  // diameter 1
    case Primitive::cylinder: return std::numbers::pi * 0.5 + 2.0 * std::numbers::pi * 0.25;  // radius 0.5, height 1
  }
  return 0.0;
}

inline std::function<bool(const Point3&)> primitive_inside(Primitive shape) {
  switch (shape) {
    case Primitive::cube:
      return [](const Point3& p) { return p.cwiseAbs().maxCoeff() < 0.5; };
    case Primitive::sphere:
      return [](const Point3& p) { return p.norm() < 0.5; };
    case Primitive::cylinder:
      return [](const Point3& p) { return std::abs(p.z()) < 0.5 && p.head<2>().norm() < 0.5; };
  }
  return {};
}

inline PointCloud sample_primitive(Primitive shape, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (shape) {
      case Primitive::cube: {
        const int face = static_cast<int>(unit(rng) * 6.0) % 6;
        const double a = unit(rng) - 0.5, b = unit(rng) - 0.5;
        const double s = (face % 2 == 0) ? 0.5 : -0.5;
        const int axis = face / 2;
        Point3 p;
        p[axis] = s;
        p[(axis + 1) % 3] = a;
        p[(axis + 2) % 3] = b;
        pts.push_back(p);
        break;
      }
      case Primitive::sphere:
        pts.push_back(0.5 * random_unit_vector(rng));
        break;
      case Primitive::cylinder: {
        const double side = std::numbers::pi * 1.0 * 1.0;  // 2πr·h
        const double caps = 2.0 * std::numbers::pi * 0.25;
        const double pick = unit(rng) * (side + caps);
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        if (pick < side) {
          pts.emplace_back(0.5 * std::cos(theta), 0.5 * std::sin(theta), unit(rng) - 0.5);
        } else {
          const double r = 0.5 * std::sqrt(unit(rng));
          pts.emplace_back(r * std::cos(theta), r * std::sin(theta), pick - side < caps / 2 ? 0.5 : -0.5);
        }
        break;
      }
    }
  }
  const char* name = shape == Primitive::cube ? "cube" : shape == Primitive::sphere ? "sphere" : "cylinder";
  return PointCloud(std::move(pts), name);
}

}  // namespace fragmatch
