#pragma once

#include "rmfd/echelon.hpp"
#include "rmfd/kalman.hpp"

#include <optional>
#include <vector>

namespace rmfd {

struct EmOptions {
  int max_iter = 1000;
  double tol = 1e-5;
  double variance_floor = 1e-8;
  MomentVariant moment_variant = MomentVariant::corrected;
  double guard_radius = 0.99;  // A is shrunk to this radius when an update leaves it unstable
  bool keep_snapshots = false;

  void validate() const;
};

struct EmTrace {
  std::vector<double> loglik;  // loglik[0] at the initial value, total (not / T)
  std::vector<double> delta;   // delta[j-1] compares loglik[j] with loglik[j-1]
  std::vector<Vector> theta_A;
  std::vector<Vector> theta_C;
  int stability_guards = 0;
};

/// Minimizes tr(W (L M L' - L P - P' L')) over vec(L) = H theta + h. M is the
/// (symmetric) regressor moment, P the cross moment, W the row weight.
/// Throws NumericalError naming the offending theta indices when the reduced
/// normal matrix is singular.
Vector constrained_gls(const RestrictionTemplate& tmpl, const Matrix& M, const Matrix& P, const Matrix& W);

struct MStepResult {
  Vector theta_A;
  Vector theta_C;
};

MStepResult m_step(const SmoothedMoments& moments, const RestrictionTemplate& tA, const RestrictionTemplate& tC,
                   const Matrix& sigma_eps, double sigma_xi);

struct EmResult {
  RmfdModel model;
  StateSpaceModel ss;
  EmTrace trace;
  double loglik = 0.0;  // total
  int T = 0;
  int iterations = 0;
  bool converged = false;
  int n_params = 0;

  double loglik_scaled() const { return loglik / T; }
};

/// EM estimation on complete, standardized data X (T x n). init must match the
/// fixed entries of the templates for (gamma, s_cap, p_cap).
EmResult em_estimate(const Matrix& X, const KroneckerIndices& gamma, std::optional<int> s_cap,
                     std::optional<int> p_cap, const StateSpaceModel& init, const EmOptions& opts = {});

}  // namespace rmfd
