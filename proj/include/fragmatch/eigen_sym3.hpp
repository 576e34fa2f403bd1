#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "fragmatch/constants.hpp"
#include "fragmatch/geometry.hpp"

namespace fragmatch {

/// Eigenvalues of a symmetric 3x3 matrix in ascending order.
///
/// Trigonometric closed form on the scaled matrix; near a repeated root the
/// acos argument loses precision, so those cases go to Eigen's iterative
/// self-adjoint solver instead.
inline std::array<double, 3> symmetric_eigenvalues(const Matrix3& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0 || !std::isfinite(scale)) return {0.0, 0.0, 0.0};
  const Matrix3 m = a / scale;

  const double off = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
  const double q = m.trace() / 3.0;
  const double d0 = m(0, 0) - q, d1 = m(1, 1) - q, d2 = m(2, 2) - q;
  const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off;
  const double p = std::sqrt(p2 / 6.0);

  bool iterative = p < tol::kEigenDiscriminant;
  double r = 0.0;
  if (!iterative) {
    const Matrix3 b = (m - q * Matrix3::Identity()) / p;
    r = 0.5 * b.determinant();
    iterative = 1.0 - std::abs(r) < tol::kEigenDiscriminant;
  }

  std::array<double, 3> ev{};
  if (iterative) {
    Eigen::SelfAdjointEigenSolver<Matrix3> solver(m, Eigen::EigenvaluesOnly);
    const auto& v = solver.eigenvalues();  // ascending
    ev = {v[0], v[1], v[2]};
  } else {
    const double phi = std::acos(std::clamp(r, -1.0, 1.0)) / 3.0;
    const double hi = q + 2.0 * p * std::cos(phi);
    const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    ev = {lo, 3.0 * q - hi - lo, hi};
    std::sort(ev.begin(), ev.end());
  }
  for (auto& e : ev) e *= scale;
  return ev;
}

/// Centered covariance (1/n) Σ (x - x̄)(x - x̄)ᵀ of the given points.
template <class Range, class Get>
Matrix3 covariance(const Range& items, Get&& get) {
  Point3 mean = Point3::Zero();
  std::size_t n = 0;
  for (const auto& it : items) {
    mean += get(it);
    ++n;
  }
  Matrix3 c = Matrix3::Zero();
  if (n == 0) return c;
  mean /= static_cast<double>(n);
  for (const auto& it : items) {
    const Point3 d = get(it) - mean;
    c.noalias() += d * d.transpose();
  }
  return c / static_cast<double>(n);
}

inline Matrix3 covariance(const std::vector<Point3>& pts) {
  return covariance(pts, [](const Point3& p) -> const Point3& { return p; });
}

}  // namespace fragmatch
