#pragma once

// Numerical tolerances shared across the library. Tests may pass their own
// tolerances to the checking helpers; these are only the defaults.

namespace fragmatch::tol {

// RᵀR = I and det(R) = +1 are considered satisfied below this deviation.
inline constexpr double kOrthonormal = 1e-9;

// Rotations read from disk are rejected above this deviation and
// re-projected onto SO(3) between kOrthonormal and this value.
inline constexpr double kOrthonormalAccept = 1e-6;

// Largest eigenvalue at or below this is a degenerate neighborhood.
inline constexpr double kDegenerateEigenvalue = 1e-15;

// Relative discriminant below which the closed-form 3x3 eigensolver hands
// over to the iterative one.
inline constexpr double kEigenDiscriminant = 1e-8;

// Covariance rank test for PCA-based alignment (ratio to largest eigenvalue).
inline constexpr double kRankRatio = 1e-10;

}  // namespace fragmatch::tol
