#pragma once

// Gaussian filtering and smoothing for
//   s_t = A s_{t-1} + B eps_t,   x_t = C s_t + xi_t,   xi_t ~ N(0, sigma_xi I_n),
// with s_1 drawn from the stationary distribution. X is T x n (rows are time
// points); NaN entries are treated as missing and dropped from the update.

#include "rmfd/echelon.hpp"

#include <vector>

namespace rmfd {

enum class FilterMethod {
  woodbury,  // r x r algebra using the spherical idiosyncratic covariance
  dense,     // factors the n x n innovation covariance directly
};

struct FilterOutput {
  std::vector<Vector> s_pred;  // s_{t|t-1}
  std::vector<Matrix> P_pred;  // P_{t|t-1}
  std::vector<Vector> innov;   // nu_t, NaN where x_t is missing
  std::vector<Matrix> Z;       // C' S_t^{-1} C (observed rows only)
  std::vector<Vector> u;       // C' S_t^{-1} nu_t
  std::vector<Matrix> L;       // A - K_t C
  std::vector<double> logdet_S;
  double loglik = 0.0;         // total, not scaled by T
  int T() const { return static_cast<int>(s_pred.size()); }
};

/// Initial state covariance: solves P = A P A' + B Sigma B'.
Matrix stationary_state_cov(const StateSpaceModel& ss);

FilterOutput kalman_filter(const StateSpaceModel& ss, const Matrix& X,
                           FilterMethod method = FilterMethod::woodbury);

// Innovation covariance and gain at time t, rebuilt from the stored P_{t|t-1}.
Matrix innovation_cov(const StateSpaceModel& ss, const FilterOutput& f, int t, const Matrix& X);
Matrix kalman_gain(const StateSpaceModel& ss, const FilterOutput& f, int t, const Matrix& X);

struct SmootherOutput {
  std::vector<Vector> s_smooth;  // s_{t|T}
  std::vector<Matrix> P_smooth;  // P_{t|T}
  // lag_cov[t] = Cov(s_{t-1}, s_t | X); lag_cov[0] is zero.
  std::vector<Matrix> lag_cov;
  // eps_smooth[t] = E[eps_t | X] = B'(s_{t|T} - A s_{t-1|T}); eps_smooth[0] unset (zero).
  std::vector<Vector> eps_smooth;
  std::vector<Vector> e_smooth;  // x_t - C s_{t|T}, NaN where missing
};

SmootherOutput kalman_smooth(const StateSpaceModel& ss, const FilterOutput& f, const Matrix& X);

enum class MomentVariant {
  literal,    // old A, divisor T
  corrected,  // divisor T - 1; EM re-evaluates at the updated A
};

struct SmoothedMoments {
  Matrix M_ss;      // (1/T) sum_{t=1..T} E[s_t s_t']
  Matrix M_sx;      // (1/T) sum_{t=1..T} s_{t|T} x_t'
  Matrix M_s1s1;    // (1/T) sum_{t=2..T} E[s_{t-1} s_{t-1}']
  Matrix M_s1s;     // (1/T) sum_{t=2..T} E[s_{t-1} s_t']
  Matrix M_ss_tail; // (1/T) sum_{t=2..T} E[s_t s_t']
  double trace_xx = 0.0;  // (1/T) sum x_t' x_t
  int T = 0;
  int n = 0;
  double sigma_xi_new = 0.0;
  Matrix sigma_eps_new;
};

/// Requires complete data.
SmoothedMoments smoothed_moments(const StateSpaceModel& ss, const SmootherOutput& sm, const Matrix& X,
                                 MomentVariant variant = MomentVariant::corrected);

/// B' E[(s_t - A s_{t-1})(s_t - A s_{t-1})' | X] B summed over t = 2..T and
/// divided by `divisor`.
Matrix sigma_eps_from_moments(const SmoothedMoments& m, const Matrix& A, int q, double divisor);

/// (1/n) tr E[(x_t - C s_t)(x_t - C s_t)' | X], averaged over t.
double sigma_xi_from_moments(const SmoothedMoments& m, const Matrix& C);

}  // namespace rmfd
