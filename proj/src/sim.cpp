#include "rmfd/sim.hpp"

#include "rmfd/linalg.hpp"
#include "rmfd/random.hpp"

#include <cmath>

namespace rmfd {

void DgpSpec::validate() const {
  model.validate();
  if (sigma_eps.rows() != model.q() || sigma_eps.cols() != model.q()) throw DimensionError("sigma_eps must be q x q");
  if (!(sigma_xi >= 0.0)) throw ValidationError("sigma_xi must be non-negative");
  if (T < 1) throw ValidationError("T must be >= 1");
  if (burn_in < 100) throw ValidationError("burn_in must be >= 100");
  if (var_spectral_radius(model) >= 1.0) throw ValidationError("unstable VAR in the DGP");
}

namespace {

Panel make_panel(const Matrix& X, YearMonth start) {
  Panel p;
  p.values = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    p.mnemonics.push_back("X" + std::to_string(j + 1));
    p.tcodes.push_back(1);
  }
  for (Eigen::Index t = 0; t < X.rows(); ++t) p.dates.push_back(YearMonth::from_ordinal(start.ordinal() + static_cast<int>(t)));
  return p;
}

}  // namespace

SimResult simulate(const DgpSpec& spec) {
  spec.validate();
  const RmfdModel& m = spec.model;
  const int q = m.q();
  const int n = m.n();
  const int total = spec.T + spec.burn_in;
  const Matrix H = linalg::cholesky_lower(spec.sigma_eps);
  const Matrix c0_inv = m.c[0].inverse();
  auto rng = stream_rng(spec.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd_xi = std::sqrt(spec.sigma_xi);

  Matrix z = Matrix::Zero(total, q);
  Matrix eps(total, q);
  for (int t = 0; t < total; ++t) {
    Vector u(q);
    for (int i = 0; i < q; ++i) u(i) = normal(rng);
    eps.row(t) = (H * u).transpose();
    Vector acc = eps.row(t).transpose();
    for (int i = 1; i <= std::min(t, m.p()); ++i) acc -= m.c[i] * z.row(t - i).transpose();
    z.row(t) = (c0_inv * acc).transpose();
  }
  Matrix common = Matrix::Zero(total, n);
  for (int t = 0; t < total; ++t)
    for (int j = 0; j <= std::min(t, m.s()); ++j) common.row(t) += (m.d[j] * z.row(t - j).transpose()).transpose();
  Matrix X = common;
  for (int j = 0; j < n; ++j)
    for (int t = 0; t < total; ++t) X(t, j) += sd_xi * normal(rng);

  SimResult out;
  out.panel = make_panel(X.bottomRows(spec.T), spec.start);
  out.factors = z.bottomRows(spec.T);
  out.shocks = eps.bottomRows(spec.T);
  out.common = common.bottomRows(spec.T);
  return out;
}

SimResult simulate_sdfm(const SdfmDgp& spec) {
  const auto n = spec.D.rows();
  const auto r = spec.D.cols();
  const auto q = spec.B.cols();
  if (spec.B.rows() != r) throw DimensionError("B must be r x q");
  for (const auto& c : spec.var_coeffs)
    if (c.rows() != r || c.cols() != r) throw DimensionError("VAR coefficients must be r x r");
  if (spec.burn_in < 100) throw ValidationError("burn_in must be >= 100");
  const int total = spec.T + spec.burn_in;
  auto rng = stream_rng(spec.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix F = Matrix::Zero(total, r);
  Matrix eps(total, q);
  for (int t = 0; t < total; ++t) {
    Vector u(q);
    for (Eigen::Index i = 0; i < q; ++i) u(i) = normal(rng);
    eps.row(t) = u.transpose();
    Vector acc = spec.B * u;
    for (int i = 1; i <= std::min<int>(t, static_cast<int>(spec.var_coeffs.size())); ++i)
      acc += spec.var_coeffs[static_cast<std::size_t>(i - 1)] * F.row(t - i).transpose();
    F.row(t) = acc.transpose();
    if (!acc.allFinite() || acc.norm() > 1e12) throw ValidationError("unstable S-DFM factor VAR");
  }
  const Matrix common = F * spec.D.transpose();
  Matrix X = common;
  const double sd_xi = std::sqrt(spec.sigma_xi);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int t = 0; t < total; ++t) X(t, j) += sd_xi * normal(rng);
  SimResult out;
  out.panel = make_panel(X.bottomRows(spec.T), YearMonth{1960, 1});
  out.factors = F.bottomRows(spec.T);
  out.shocks = eps.bottomRows(spec.T);
  out.common = common.bottomRows(spec.T);
  return out;
}

Matrix common_covariance(const RmfdModel& model, const Matrix& sigma_eps, int horizon) {
  const PolyMatrix k = irf_rmfd(model, horizon);
  Matrix s = Matrix::Zero(model.n(), model.n());
  for (int j = 0; j <= horizon; ++j) s += k[j] * sigma_eps * k[j].transpose();
  return linalg::symmetrize(s);
}

void equalize_common_variance(RmfdModel& model, Matrix& sigma_eps) {
  const Vector v = common_covariance(model, sigma_eps).diagonal();
  if ((v.array() <= 0.0).any()) throw ValidationError("a series has no common variance");
  const Vector row = v.cwiseSqrt().cwiseInverse();
  const int q = model.q();
  const Vector top = row.head(q);
  for (int j = 0; j <= model.s(); ++j)
    model.d.coeff(j) = row.asDiagonal() * model.d[j] * top.cwiseInverse().asDiagonal();
  for (int j = 0; j <= model.p(); ++j)
    model.c.coeff(j) = top.asDiagonal() * model.c[j] * top.cwiseInverse().asDiagonal();
  sigma_eps = linalg::symmetrize(top.asDiagonal() * sigma_eps * top.asDiagonal());
}

double sigma_xi_for_snr(const RmfdModel& model, const Matrix& sigma_eps, double snr) {
  if (!(snr > 0.0)) throw ValidationError("snr must be positive");
  return common_covariance(model, sigma_eps).diagonal().mean() / snr;
}

}  // namespace rmfd
