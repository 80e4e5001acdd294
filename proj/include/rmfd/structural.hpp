#pragma once

#include "rmfd/data.hpp"
#include "rmfd/em.hpp"
#include "rmfd/init.hpp"
#include "rmfd/modelsel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rmfd {

/// Lower-triangular H with H H' = sigma_eps and positive diagonal.
Matrix cholesky_identify(const Matrix& sigma_eps);

struct IrfNormalization {
  int variable = 0;
  double size = 1.0;
};

struct StructuralIrf {
  Matrix responses;  // n x (horizon + 1), column h is the response at lag h
  int shock = 0;
  std::string shock_label;
  std::optional<IrfNormalization> normalization;

  int horizon() const { return static_cast<int>(responses.cols()) - 1; }
};

/// Column `shock` of k(z) H up to `horizon`; rescaled so the impact response of
/// the normalization variable equals its size.
StructuralIrf structural_irf(const RmfdModel& model, const Matrix& H, int shock, int horizon,
                             std::optional<IrfNormalization> normalize = std::nullopt);
/// Same from any IRF already multiplied by H.
StructuralIrf structural_irf_from(const PolyMatrix& kH, int shock, std::optional<IrfNormalization> normalize);
StructuralIrf normalize_irf(const StructuralIrf& irf, IrfNormalization norm);

/// Number of cumulations undoing tcode: 0 for 1/4, 1 for 2/5, 2 for 3/6/7.
int cumulation_count(int tcode);

/// Rows scaled by sds and cumulated according to tcodes; the normalization,
/// if any, is re-imposed in the resulting units.
StructuralIrf finalize_irf(const StructuralIrf& irf, const Vector& sds, const std::vector<int>& tcodes);

struct StructuralOptions {
  int shock = 0;
  std::optional<IrfNormalization> normalize;
  int horizon = 48;
  EmOptions em;
  InitOptions init;
};

struct StructuralFit {
  EmResult fit;
  Matrix H;
  StructuralIrf irf;  // original units
};

/// panel holds complete data in original (transformed) units; it is
/// standardized internally. warm replaces the CCA initialization.
StructuralFit estimate_structural(const Panel& panel, const CandidateSpec& spec, const StructuralOptions& opts,
                                  const std::optional<StateSpaceModel>& warm = std::nullopt);

struct BootstrapOptions {
  int draws = 500;
  int block_len = 52;
  double level = 0.68;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool warm_start = false;
  double max_failure_share = 0.2;
};

struct BootstrapBands {
  Matrix point;
  Matrix lower;
  Matrix upper;
  double level = 0.68;
  int draws = 0;     // successful draws
  int failures = 0;
  Mask outside;      // point outside [lower, upper]
};

/// Index sequence of one draw: floor(T / block_len) blocks, resampled with
/// replacement and trimmed to T.
std::vector<int> bootstrap_indices(int T, int block_len, std::mt19937_64& rng);

BootstrapBands block_bootstrap(const Panel& panel, const CandidateSpec& spec, const StructuralOptions& sopts,
                               const BootstrapOptions& bopts, const StructuralFit& point);

}  // namespace rmfd
