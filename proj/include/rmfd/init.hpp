#pragma once

// Starting values: CCA subspace estimate of an innovation-form state-space
// model, shock reduction to q columns, and conversion to the echelon template.

#include "rmfd/echelon.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace rmfd {

struct CcaOptions {
  int state_dim = 0;
  std::optional<int> f;       // future horizon; default max(2, ceil(state_dim / q) + 1)
  std::optional<int> p_lags;  // past horizon; same default
  int q_hint = 1;             // only used by the horizon default
  double ridge = 0.0;         // added to the past and future covariances, relative to their mean diagonals

  int future_horizon() const;
  int past_horizon() const;
};

struct CcaResult {
  // B = I, sigma_eps = covariance of the state residuals s_{t+1} - A s_t.
  StateSpaceModel ss;
  Matrix K;            // innovation gain (state_dim x n)
  Matrix sigma_innov;  // n x n covariance of x_t - C s_t
  Vector canonical_correlations;
};

/// Throws NumericalError when the past covariance is rank deficient.
CcaResult cca_init(const Matrix& X, const CcaOptions& opts);

/// n x q IRF: (I_n, C K, C A K, ...) times the leading q eigenvectors of
/// sigma_innov scaled by root eigenvalues.
PolyMatrix shock_reduce(const CcaResult& cca, int q, int horizon);

struct CanonicalInit {
  RmfdModel model;
  StateSpaceModel ss;
  std::optional<KroneckerIndices> realized_gamma;  // empty if realization failed
  bool projected = false;  // target pattern differed from the realization
  double fit_residual = 0.0;
};

/// Fits the target RMFD-E template to a tall IRF k (n x q). The realization is
/// used as a starting point; entries the target does not allow are dropped
/// and a minimum-norm least-squares correction of k(z) c(z) = d(z) over the
/// available lags is added. sigma_eps = T T' for T the top q x q block of k_0.
CanonicalInit init_to_canonical(const PolyMatrix& k, const KroneckerIndices& gamma, std::optional<int> s_cap,
                                std::optional<int> p_cap, double sigma_xi, double max_radius = 0.99);

struct InitOptions {
  CcaOptions cca;
  int S = 10;
  int rho0 = 10;
  int rho_steps = 10;  // failed retries per draw before the draw is abandoned
  std::uint64_t seed = 1;
};

struct RobustInitResult {
  CcaResult best;
  double best_score = 0.0;
  bool direct_succeeded = false;
  std::vector<double> scores;  // one per successful candidate, direct first
  int failures = 0;
};

using CandidateScore = std::function<double(const CcaResult&, const Matrix&)>;

/// Direct CCA first, then noise-regularized retries until S candidates; returns
/// the candidate maximizing `score` (default: filter loglik of the unrestricted
/// model). Scoring failures count as failed candidates.
RobustInitResult robust_init(const Matrix& X, const InitOptions& opts, const CandidateScore& score = {});

struct EchelonInitResult {
  CanonicalInit init;
  double loglik = 0.0;
  RobustInitResult search;
};

/// robust_init scored by the loglik of the canonical initial model for the
/// target (gamma, s_cap, p_cap). cca.state_dim defaults to the template's.
EchelonInitResult echelon_init(const Matrix& X, const KroneckerIndices& gamma, std::optional<int> s_cap,
                               std::optional<int> p_cap, InitOptions opts);

}  // namespace rmfd
