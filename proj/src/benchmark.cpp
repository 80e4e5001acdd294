#include "rmfd/benchmark.hpp"

#include "rmfd/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace rmfd {

namespace {

struct VarLs {
  std::vector<Matrix> coeffs;
  Vector intercept;
  Matrix resid;
};

VarLs fit_var(const Matrix& Y, int lags, bool intercept) {
  const int T = static_cast<int>(Y.rows());
  const int k = static_cast<int>(Y.cols());
  const int N = T - lags;
  const int cols = k * lags + (intercept ? 1 : 0);
  if (N <= cols) throw ValidationError("VAR: too few observations for the number of regressors");
  Matrix Z(N, cols);
  for (int t = 0; t < N; ++t) {
    for (int i = 1; i <= lags; ++i) Z.block(t, (i - 1) * k, 1, k) = Y.row(lags + t - i);
    if (intercept) Z(t, cols - 1) = 1.0;
  }
  const Matrix Yt = Y.bottomRows(N);
  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  qr.setThreshold(1e-12);
  if (qr.rank() < cols) throw NumericalError("VAR: near-singular regressor matrix");
  const Matrix B = qr.solve(Yt);  // cols x k
  VarLs out;
  for (int i = 1; i <= lags; ++i) out.coeffs.push_back(B.middleRows((i - 1) * k, k).transpose());
  out.intercept = intercept ? Vector(B.row(cols - 1).transpose()) : Vector::Zero(k);
  out.resid = Yt - Z * B;
  return out;
}

}  // namespace

PolyMatrix var_ma(const std::vector<Matrix>& coeffs, int horizon) {
  if (coeffs.empty()) throw ValidationError("VAR needs at least one lag");
  const auto k = coeffs.front().rows();
  std::vector<Matrix> psi{Matrix::Identity(k, k)};
  for (int j = 1; j <= horizon; ++j) {
    Matrix acc = Matrix::Zero(k, k);
    for (int i = 1; i <= std::min<int>(j, static_cast<int>(coeffs.size())); ++i)
      acc += coeffs[static_cast<std::size_t>(i - 1)] * psi[static_cast<std::size_t>(j - i)];
    psi.push_back(acc);
  }
  return PolyMatrix(std::move(psi));
}

PolyMatrix SdfmFit::factor_irf(int horizon) const { return var_ma(var_coeffs, horizon); }

SdfmFit estimate_sdfm(const Matrix& X, int r, int m, int q, int horizon) {
  const int T = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols());
  if (X.hasNaN()) throw ValidationError("S-DFM needs complete data");
  if (r < 1 || r > n) throw ValidationError("S-DFM: r must lie in [1, n]");
  if (q < 1 || q > r) throw ValidationError("S-DFM: q must lie in [1, r]");
  if (m < 1) throw ValidationError("S-DFM: m must be >= 1");
  const Matrix cov = linalg::symmetrize(X.transpose() * X / T);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector ev = es.eigenvalues().reverse();
  if (!(ev(r - 1) > 1e-12 * ev(0))) throw NumericalError("S-DFM: sample covariance has rank below r");
  SdfmFit fit;
  fit.D = es.eigenvectors().rowwise().reverse().leftCols(r);
  fit.factors = X * fit.D;
  const VarLs var = fit_var(fit.factors, m, false);
  fit.var_coeffs = var.coeffs;
  fit.resid_cov = linalg::symmetrize(var.resid.transpose() * var.resid / static_cast<double>(var.resid.rows()));
  Eigen::SelfAdjointEigenSolver<Matrix> er(fit.resid_cov);
  const Vector rev = er.eigenvalues().reverse();
  if (!(rev(q - 1) > 0.0)) throw NumericalError("S-DFM: residual covariance has fewer than q positive eigenvalues");
  fit.reduction = er.eigenvectors().rowwise().reverse().leftCols(q) * rev.head(q).cwiseSqrt().asDiagonal();
  fit.irf = PolyMatrix(std::vector<Matrix>{fit.D}) * fit.factor_irf(horizon) * fit.reduction;
  return fit;
}

SvarFit estimate_svar(const Matrix& X, int lags, bool intercept, int horizon) {
  const int T = static_cast<int>(X.rows());
  const int k = static_cast<int>(X.cols());
  if (X.hasNaN()) throw ValidationError("SVAR needs complete data");
  if (lags < 1) throw ValidationError("SVAR: lags must be >= 1");
  if (T <= k * lags + 1) throw ValidationError("SVAR: sample too short for the lag order");
  const VarLs var = fit_var(X, lags, intercept);
  SvarFit fit;
  fit.coeffs = var.coeffs;
  fit.intercept = var.intercept;
  const double dof = static_cast<double>(var.resid.rows());
  fit.resid_cov = linalg::symmetrize(var.resid.transpose() * var.resid / dof);
  fit.H = linalg::cholesky_lower(fit.resid_cov);
  fit.irf = var_ma(fit.coeffs, horizon) * fit.H;
  return fit;
}

}  // namespace rmfd
