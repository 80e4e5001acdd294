#pragma once

// Comparison estimators: principal-components static factor model with a
// factor VAR, and a small recursive VAR.

#include "rmfd/types.hpp"

#include <vector>

namespace rmfd {

struct SdfmFit {
  Matrix D;                       // n x r, orthonormal columns
  Matrix factors;                 // T x r
  std::vector<Matrix> var_coeffs; // C_1..C_m, r x r
  Matrix resid_cov;               // r x r
  Matrix reduction;               // r x q: leading eigenvectors * sqrt(eigenvalues)
  PolyMatrix irf = PolyMatrix::identity(1);  // n x q

  PolyMatrix factor_irf(int horizon) const;  // (I - C_1 z - ...)^{-1}, r x r
};

/// X is T x n and assumed centred (standardized).
SdfmFit estimate_sdfm(const Matrix& X, int r, int m, int q, int horizon = 48);

struct SvarFit {
  std::vector<Matrix> coeffs;  // A_1..A_p
  Vector intercept;
  Matrix resid_cov;
  Matrix H;                     // lower Cholesky factor of resid_cov
  PolyMatrix irf = PolyMatrix::identity(1);  // structural: Psi_j H
};

SvarFit estimate_svar(const Matrix& X, int lags = 9, bool intercept = true, int horizon = 48);

/// MA coefficients Psi_0 = I, Psi_j = sum_i A_i Psi_{j-i}.
PolyMatrix var_ma(const std::vector<Matrix>& coeffs, int horizon);

}  // namespace rmfd
