#include "rmfd/structural.hpp"

#include "rmfd/linalg.hpp"
#include "rmfd/random.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace rmfd {

Matrix cholesky_identify(const Matrix& sigma_eps) {
  if (sigma_eps.rows() != sigma_eps.cols()) throw DimensionError("sigma_eps must be square");
  Matrix H = linalg::cholesky_lower(sigma_eps);
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    if (H(i, i) < 0.0) H.col(i) *= -1.0;
  return H;
}

StructuralIrf normalize_irf(const StructuralIrf& irf, IrfNormalization norm) {
  if (norm.variable < 0 || norm.variable >= irf.responses.rows())
    throw ValidationError("normalization variable out of range");
  const double impact = irf.responses(norm.variable, 0);
  if (impact == 0.0 || !std::isfinite(impact))
    throw NumericalError("zero impact response at the normalization variable");
  StructuralIrf out = irf;
  out.responses *= norm.size / impact;
  out.normalization = norm;
  return out;
}

StructuralIrf structural_irf_from(const PolyMatrix& kH, int shock, std::optional<IrfNormalization> normalize) {
  if (shock < 0 || shock >= kH.cols()) throw ValidationError("shock column out of range");
  StructuralIrf out;
  out.shock = shock;
  out.responses.resize(kH.rows(), kH.degree() + 1);
  for (int h = 0; h <= kH.degree(); ++h) out.responses.col(h) = kH[h].col(shock);
  if (normalize) out = normalize_irf(out, *normalize);
  return out;
}

StructuralIrf structural_irf(const RmfdModel& model, const Matrix& H, int shock, int horizon,
                             std::optional<IrfNormalization> normalize) {
  if (H.rows() != model.q() || H.cols() != model.q()) throw DimensionError("H must be q x q");
  return structural_irf_from(irf_rmfd(model, horizon) * H, shock, normalize);
}

int cumulation_count(int tcode) {
  switch (tcode) {
    case 1: case 4: return 0;
    case 2: case 5: return 1;
    case 3: case 6: case 7: return 2;
  }
  throw ValidationError("unknown transform code " + std::to_string(tcode));
}

StructuralIrf finalize_irf(const StructuralIrf& irf, const Vector& sds, const std::vector<int>& tcodes) {
  const auto n = irf.responses.rows();
  if (sds.size() != n || static_cast<Eigen::Index>(tcodes.size()) != n)
    throw DimensionError("finalize_irf: sds/tcodes length differs from the IRF rows");
  StructuralIrf out = irf;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.responses.row(i) *= sds(i);
    const int times = cumulation_count(tcodes[static_cast<std::size_t>(i)]);
    for (int c = 0; c < times; ++c)
      for (Eigen::Index h = 1; h < out.responses.cols(); ++h) out.responses(i, h) += out.responses(i, h - 1);
  }
  if (irf.normalization) out = normalize_irf(out, *irf.normalization);
  return out;
}

StructuralFit estimate_structural(const Panel& panel, const CandidateSpec& spec, const StructuralOptions& opts,
                                  const std::optional<StateSpaceModel>& warm) {
  const Panel z = standardize(panel);
  StateSpaceModel init;
  if (warm) init = *warm;
  else init = echelon_init(z.values, spec.gamma, spec.s, spec.p, opts.init).init.ss;
  StructuralFit out;
  out.fit = em_estimate(z.values, spec.gamma, spec.s, spec.p, init, opts.em);
  out.H = cholesky_identify(out.fit.ss.sigma_eps);
  StructuralIrf raw = structural_irf(out.fit.model, out.H, opts.shock, opts.horizon);
  raw.normalization = opts.normalize;
  raw.shock_label = "shock" + std::to_string(opts.shock + 1);
  out.irf = finalize_irf(raw, z.sds, panel.tcodes);
  return out;
}

std::vector<int> bootstrap_indices(int T, int block_len, std::mt19937_64& rng) {
  if (block_len < 1) throw ValidationError("block length must be >= 1");
  const int nblocks = T / block_len;
  if (nblocks < 2) throw ValidationError("bootstrap needs T >= 2 * block_len");
  std::uniform_int_distribution<int> pick(0, nblocks - 1);
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(T));
  while (static_cast<int>(idx.size()) < T) {
    const int b = pick(rng);
    for (int k = 0; k < block_len && static_cast<int>(idx.size()) < T; ++k) idx.push_back(b * block_len + k);
  }
  return idx;
}

BootstrapBands block_bootstrap(const Panel& panel, const CandidateSpec& spec, const StructuralOptions& sopts,
                               const BootstrapOptions& bopts, const StructuralFit& point) {
  if (bopts.draws < 1) throw ValidationError("bootstrap needs at least one draw");
  if (!(bopts.level > 0.0 && bopts.level < 1.0)) throw ValidationError("band level must lie in (0, 1)");
  const int T = panel.T();
  if (T < 2 * bopts.block_len) throw ValidationError("bootstrap needs T >= 2 * block_len");

  std::vector<std::optional<Matrix>> results(static_cast<std::size_t>(bopts.draws));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int d = next++; d < bopts.draws; d = next++) {
      auto rng = stream_rng(bopts.seed, static_cast<std::uint64_t>(d));
      const std::vector<int> idx = bootstrap_indices(T, bopts.block_len, rng);
      Panel draw = panel;
      for (int t = 0; t < T; ++t) draw.values.row(t) = panel.values.row(idx[static_cast<std::size_t>(t)]);
      StructuralOptions so = sopts;
      so.init.seed = splitmix64(bopts.seed ^ splitmix64(static_cast<std::uint64_t>(d) + 1));
      try {
        std::optional<StateSpaceModel> warm;
        if (bopts.warm_start) warm = point.fit.ss;
        results[static_cast<std::size_t>(d)] = estimate_structural(draw, spec, so, warm).irf.responses;
      } catch (const Error&) {
      }
    }
  };
  const int jobs = std::max(1, std::min(bopts.jobs, bopts.draws));
  if (jobs == 1) worker();
  else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BootstrapBands out;
  out.point = point.irf.responses;
  out.level = bopts.level;
  std::vector<const Matrix*> ok;
  for (const auto& r : results)
    if (r) ok.push_back(&*r);
  out.draws = static_cast<int>(ok.size());
  out.failures = bopts.draws - out.draws;
  if (out.failures > bopts.max_failure_share * bopts.draws || ok.empty())
    throw NumericalError("bootstrap aborted: " + std::to_string(out.failures) + " of " + std::to_string(bopts.draws) +
                         " draws failed");
  const auto n = out.point.rows();
  const auto H = out.point.cols();
  out.lower.resize(n, H);
  out.upper.resize(n, H);
  const double lo = 50.0 * (1.0 - bopts.level);
  const double hi = 50.0 * (1.0 + bopts.level);
  std::vector<double> vals(ok.size());
  for (Eigen::Index h = 0; h < H; ++h)
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < ok.size(); ++k) vals[k] = (*ok[k])(i, h);
      out.lower(i, h) = linalg::percentile(vals, lo);
      out.upper(i, h) = linalg::percentile(vals, hi);
    }
  out.outside = (out.point.array() < out.lower.array()) || (out.point.array() > out.upper.array());
  return out;
}

}  // namespace rmfd
