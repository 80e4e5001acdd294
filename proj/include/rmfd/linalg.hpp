#pragma once

#include "rmfd/types.hpp"

#include <optional>

namespace rmfd::linalg {

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double spectral_radius(const Matrix& a);

/// Solves P = A P A' + Q through (I - A kron A) vec(P) = vec(Q).
/// Throws NumericalError when A is not stable.
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q);

/// Singular values below rel_tol * sigma_max count as zero; when rel_tol is
/// absent the threshold is max(rows, cols) * eps.
int numerical_rank(const Matrix& m, std::optional<double> rel_tol = std::nullopt);
double default_rank_tol(const Matrix& m);

/// Symmetric square root and inverse square root of a PSD / PD matrix.
Matrix psd_sqrt(const Matrix& m);
Matrix pd_inv_sqrt(const Matrix& m, double rcond = 1e-12);

/// Lower Cholesky factor. PSD input gets a diagonal jitter ladder before
/// giving up; indefinite input throws NumericalError.
Matrix cholesky_lower(const Matrix& m);

// Min eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

/// Percentile (0..100) with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

}  // namespace rmfd::linalg
