#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fragmatch/constants.hpp"

namespace fragmatch {

using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

/// Squared Euclidean distance, evaluated in a fixed x, y, z order so that
/// every caller (spatial index, brute-force checks, Chamfer) produces the
/// same bits for the same pair.
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Ordered list of points. Index i names the same point for the whole
/// lifetime of a pipeline run.
struct PointCloud {
  std::vector<Point3> points;
  std::string source_id;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts, std::string id = {})
      : points(std::move(pts)), source_id(std::move(id)) {}

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }

  /// Throws std::invalid_argument on an empty cloud or non-finite coordinate.
  void validate() const {
    if (points.empty()) throw std::invalid_argument("empty cloud");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!is_finite(points[i]))
        throw std::invalid_argument("non-finite coordinate at point " + std::to_string(i));
    }
  }

  /// Points at the given indices, in the given order.
  PointCloud subset(const std::vector<std::size_t>& indices) const {
    PointCloud out;
    out.source_id = source_id;
    out.points.reserve(indices.size());
    for (auto i : indices) out.points.push_back(points.at(i));
    return out;
  }
};

inline Point3 centroid(const std::vector<Point3>& pts) {
  Point3 c = Point3::Zero();
  for (const auto& p : pts) c += p;
  return pts.empty() ? c : Point3(c / static_cast<double>(pts.size()));
}

struct Aabb {
  Point3 min_corner = Point3::Zero();
  Point3 max_corner = Point3::Zero();

  static Aabb of(const std::vector<Point3>& pts) {
    if (pts.empty()) throw std::invalid_argument("bounding box of empty point set");
    Aabb box{pts.front(), pts.front()};
    for (const auto& p : pts) {
      box.min_corner = box.min_corner.cwiseMin(p);
      box.max_corner = box.max_corner.cwiseMax(p);
    }
    return box;
  }
  static Aabb of(const PointCloud& c) { return of(c.points); }

  Point3 extent() const { return max_corner - min_corner; }
  Point3 center() const { return 0.5 * (min_corner + max_corner); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Point3& p) const {
    return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
  }
};

/// Largest absolute entry of RᵀR − I, combined with |det R − 1|.
inline double orthonormality_error(const Matrix3& r) {
  const double ortho = (r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

/// Closest rotation in the Frobenius sense (polar factor via SVD).
/// A reflection input is mapped to the nearest proper rotation.
inline Matrix3 project_to_rotation(const Matrix3& m) {
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 d = Matrix3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Proper rigid motion x ↦ R·x + t. Immutable once built.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Matrix3::Identity()), translation_(Point3::Zero()) {}

  /// Throws std::invalid_argument when `rotation` is improper or further than
  /// kOrthonormalAccept from SO(3). Small drift is projected away.
  RigidTransform(const Matrix3& rotation, const Point3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite())
      throw std::invalid_argument("non-finite transform");
    if (rotation.determinant() < 0.0) throw std::invalid_argument("improper rotation");
    const double err = orthonormality_error(rotation);
    if (err > tol::kOrthonormalAccept) throw std::invalid_argument("non-orthonormal rotation");
    if (err > tol::kOrthonormal) rotation_ = project_to_rotation(rotation);
  }

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Point3& t) { return {Matrix3::Identity(), t}; }
  static RigidTransform from_rotation(const Matrix3& r) { return {r, Point3::Zero()}; }

  const Matrix3& rotation() const noexcept { return rotation_; }
  const Point3& translation() const noexcept { return translation_; }

  Point3 operator()(const Point3& p) const { return rotation_ * p + translation_; }

  bool operator==(const RigidTransform&) const = default;

 private:
  Matrix3 rotation_;
  Point3 translation_;
};

inline PointCloud apply_transform(const RigidTransform& t, const PointCloud& c) {
  PointCloud out;
  out.source_id = c.source_id;
  out.points.reserve(c.size());
  for (const auto& p : c.points) out.points.push_back(t(p));
  return out;
}

/// b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline RigidTransform inverse(const RigidTransform& t) {
  const Matrix3 rt = t.rotation().transpose();
  return {rt, -(rt * t.translation())};
}

inline double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }
inline double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

/// Rotation angle of a proper rotation, in radians, in [0, π].
/// Uses atan2 of the skew and symmetric parts; accurate near 0 and π.
inline double rotation_angle(const Matrix3& r) {
  const Point3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * vee.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  return std::atan2(s, c);
}

/// Magnitude of the relative rotation R_aᵀ·R_b, in degrees.
inline double geodesic_rotation_angle(const Matrix3& a, const Matrix3& b) {
  return degrees(rotation_angle(a.transpose() * b));
}
inline double geodesic_rotation_angle(const RigidTransform& a, const RigidTransform& b) {
  return geodesic_rotation_angle(a.rotation(), b.rotation());
}

inline Matrix3 axis_angle_rotation(const Point3& axis, double angle_deg) {
  return Eigen::AngleAxisd(radians(angle_deg), axis.normalized()).toRotationMatrix();
}

/// Rotation from a (not necessarily unit) quaternion w + xi + yj + zk.
inline Matrix3 quaternion_to_rotation(double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  if (q.norm() == 0.0) throw std::invalid_argument("zero quaternion");
  return q.normalized().toRotationMatrix();
}

/// Uniformly distributed rotation (normalized 4D Gaussian quaternion).
template <class Rng>
Matrix3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
    if (w * w + x * x + y * y + z * z > 1e-12) return quaternion_to_rotation(w, x, y, z);
  }
}

template <class Rng>
Point3 random_unit_vector(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Point3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

}  // namespace fragmatch
