#pragma once

// Reversed-echelon RMFD parametrization: k(z) = d(z) c(z)^{-1}.
//
// Polynomials are stored with their raw coefficients, c(z) = c_0 + c_1 z + ...
// The VAR form used by the state-space representation, z_t = a_1 z_{t-1} + ...,
// has a_i = -c_i c_0^{-1}; that conversion happens only in assemble_statespace
// and model_from_statespace.

#include "rmfd/types.hpp"

#include <optional>
#include <vector>

namespace rmfd {

/// Position of one polynomial coefficient entry.
struct CoeffEntry {
  int lag;
  int row;
  int col;
  friend bool operator==(const CoeffEntry&, const CoeffEntry&) = default;
};

/// c_{kl,0} = d_{kl,0}: one shared free parameter.
struct CrossLink {
  CoeffEntry c_entry;
  CoeffEntry d_entry;
};

/// Free/fixed layout of the coefficients of c(z) (q x q, degree p) and
/// d(z) (n x q, degree s) for RMFD-E(gamma).
struct EchelonPattern {
  KroneckerIndices gamma;
  int n = 0;
  int q = 0;
  int p = 0;
  int s = 0;
  std::vector<Mask> c_free;    // lags 0..p
  std::vector<Mask> d_free;    // lags 0..s; d_0 top-block entries that are
                               // cross-linked are marked free here
  std::vector<Matrix> c_fixed; // values of fixed entries (0 or 1)
  std::vector<Matrix> d_fixed;
  std::vector<CrossLink> links;

  int free_count() const;  // shared entries counted once
};

/// Throws on s_cap/p_cap above kappa or n < q.
EchelonPattern echelon_pattern(const KroneckerIndices& gamma, int n,
                               std::optional<int> s_cap = std::nullopt,
                               std::optional<int> p_cap = std::nullopt);

/// Affine map vec(L) = H theta + h with H a 0/1 selection matrix.
class RestrictionTemplate {
 public:
  RestrictionTemplate(int rows, int cols, std::vector<int> free_positions, Vector fixed_values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int free_count() const { return static_cast<int>(free_.size()); }
  // Column-major positions in vec(L), one per theta entry.
  const std::vector<int>& free_positions() const { return free_; }
  const Vector& h() const { return h_; }
  Matrix H() const;
  bool is_free(int position) const { return position_to_theta_[static_cast<std::size_t>(position)] >= 0; }
  int theta_index(int row, int col) const {
    return position_to_theta_[static_cast<std::size_t>(col * rows_ + row)];
  }

  Matrix reconstruct(const Vector& theta) const;
  Vector extract(const Matrix& l) const;
  // Largest deviation of l from h over the fixed positions.
  double fixed_violation(const Matrix& l) const;

 private:
  int rows_;
  int cols_;
  std::vector<int> free_;
  std::vector<int> position_to_theta_;
  Vector h_;
};

/// Templates for the state-space matrices of an RMFD-E(gamma) model. C is
/// n x (blocks q) holding (d_0, ..., d_{blocks-1}); A is (blocks q) square with
/// the VAR coefficients in its first q rows and a fixed companion shift below.
/// blocks = max(p, s + 1), which is kappa + 1 when s = p = kappa and kappa when
/// s < p.
struct StateSpaceTemplates {
  EchelonPattern pattern;
  RestrictionTemplate template_C;
  RestrictionTemplate template_A;
  std::vector<CrossLink> cross_links;
  int blocks = 0;
  int state_dim() const { return blocks * pattern.q; }
};

StateSpaceTemplates build_templates(const KroneckerIndices& gamma, int n, int q,
                                    std::optional<int> s_cap = std::nullopt,
                                    std::optional<int> p_cap = std::nullopt);

int count_free_params(const KroneckerIndices& gamma, int n, int q,
                      std::optional<int> s_cap = std::nullopt,
                      std::optional<int> p_cap = std::nullopt);

struct RmfdModel {
  PolyMatrix c = PolyMatrix::identity(1);  // q x q, degree p
  PolyMatrix d = PolyMatrix::identity(1);  // n x q, degree s
  KroneckerIndices gamma{std::vector<int>{0}};

  int n() const { return d.rows(); }
  int q() const { return c.rows(); }
  int p() const { return c.degree(); }
  int s() const { return d.degree(); }

  // Checks c/d shapes against each other and gamma. Throws DimensionError.
  void validate() const;
  // Max deviation of fixed entries and cross-links from the pattern.
  double pattern_violation(const EchelonPattern& pattern) const;
};

struct StateSpaceModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix sigma_eps;
  double sigma_xi = 1.0;  // idiosyncratic variance sigma_xi^2

  int state_dim() const { return static_cast<int>(A.rows()); }
  int n() const { return static_cast<int>(C.rows()); }
  int q() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

StateSpaceModel assemble_statespace(const RmfdModel& model, const Matrix& sigma_eps, double sigma_xi);

/// Inverse of assemble_statespace for c_0 = I models: reads c_1..c_p from A's
/// first q rows and d_0..d_s from C.
RmfdModel model_from_statespace(const StateSpaceModel& ss, const KroneckerIndices& gamma, int p, int s);

PolyMatrix irf_rmfd(const RmfdModel& model, int horizon);
PolyMatrix irf_statespace(const StateSpaceModel& ss, int horizon);

bool is_minimal(const StateSpaceModel& ss, std::optional<double> rank_tol = std::nullopt);

/// (c m, d m). Non-canonical output; gamma is carried over unchanged.
RmfdModel apply_unimodular(const RmfdModel& model, const PolyMatrix& m);

struct RealizationResult {
  RmfdModel model;
  // k = k_normalized * top_block; model realizes k_normalized (top block of
  // k_0 equal to I_q).
  Matrix top_block;
  int mcmillan_degree = 0;
  double singular_gap = 0.0;  // sigma_m / sigma_{m+1} of the Hankel matrix
};

/// Reversed-echelon realization from impulse responses k_0..k_N.
/// rank_tol is relative to the largest Hankel singular value.
RealizationResult echelon_realize(const PolyMatrix& k, std::optional<double> rank_tol = std::nullopt);

/// Random canonical model drawn on the pattern, rescaled so that the VAR part
/// has spectral radius at most max_radius. Used by tests, simulation and
/// generic-minimality checks.
template <class Rng>
RmfdModel random_canonical_model(const EchelonPattern& pattern, Rng& rng, double scale = 0.5,
                                 double max_radius = 0.9);

RmfdModel model_from_pattern_values(const EchelonPattern& pattern, const std::vector<double>& values);

// Radially shrinks the VAR roots until the companion spectral radius is at most
// max_radius; zero patterns are preserved. Returns the applied factor (1 when
// already stable).
double stabilize(RmfdModel& model, double max_radius);
double var_spectral_radius(const RmfdModel& model);

}  // namespace rmfd

#include "rmfd/echelon_random.hpp"
