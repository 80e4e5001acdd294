#pragma once

#include "rmfd/data.hpp"
#include "rmfd/echelon.hpp"

#include <cstdint>
#include <vector>

namespace rmfd {

struct DgpSpec {
  RmfdModel model;
  Matrix sigma_eps;
  double sigma_xi = 1.0;  // variance
  int T = 200;
  int burn_in = 500;
  std::uint64_t seed = 1;
  YearMonth start{1960, 1};

  void validate() const;
};

struct SimResult {
  Panel panel;      // tcodes all 1
  Matrix factors;   // T x q, z_t with c(L) z_t = eps_t
  Matrix shocks;    // T x q, eps_t = H u_t
  Matrix common;    // T x n, d(L) z_t
};

SimResult simulate(const DgpSpec& spec);

struct SdfmDgp {
  Matrix D;                       // n x r
  std::vector<Matrix> var_coeffs; // r x r
  Matrix B;                       // r x q
  double sigma_xi = 1.0;
  int T = 200;
  int burn_in = 500;
  std::uint64_t seed = 1;
};

/// F_t = sum_i C_i F_{t-i} + B u_t, x_t = D F_t + xi_t.
SimResult simulate_sdfm(const SdfmDgp& spec);

/// sum_{j <= horizon} k_j Sigma k_j'.
Matrix common_covariance(const RmfdModel& model, const Matrix& sigma_eps, int horizon = 500);

/// Rescales the rows of d so every series has unit common variance, then
/// restores the echelon normalization by a diagonal change of factor basis
/// (sigma_eps changes accordingly). Zero patterns and links are preserved.
void equalize_common_variance(RmfdModel& model, Matrix& sigma_eps);

/// sigma_xi giving mean common variance / sigma_xi = snr.
double sigma_xi_for_snr(const RmfdModel& model, const Matrix& sigma_eps, double snr);

}  // namespace rmfd
