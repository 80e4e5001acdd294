#include "rmfd/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmfd::linalg {

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q) {
  const Eigen::Index m = a.rows();
  if (a.cols() != m || q.rows() != m || q.cols() != m)
    throw DimensionError("Lyapunov: A and Q must be square and conformable");
  if (spectral_radius(a) >= 1.0)
    throw NumericalError("Lyapunov: transition matrix is not stable (spectral radius >= 1)");
  Matrix kron(m * m, m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) kron.block(i * m, j * m, m, m) = a(i, j) * a;
  Matrix lhs = Matrix::Identity(m * m, m * m) - kron;
  Vector rhs = Eigen::Map<const Vector>(q.data(), m * m);
  Vector sol = lhs.partialPivLu().solve(rhs);
  Matrix p = Eigen::Map<Matrix>(sol.data(), m, m);
  return symmetrize(p);
}

double default_rank_tol(const Matrix& m) {
  return static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon();
}

int numerical_rank(const Matrix& m, std::optional<double> rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double tol = rel_tol.value_or(default_rank_tol(m)) * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank;
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix pd_inv_sqrt(const Matrix& m, double rcond) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector& ev = es.eigenvalues();
  if (ev.size() == 0) return Matrix(0, 0);
  if (ev.maxCoeff() <= 0.0 || ev.minCoeff() <= rcond * ev.maxCoeff())
    throw NumericalError("covariance matrix is rank deficient");
  Vector w = ev.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

Matrix cholesky_lower(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("Cholesky: matrix must be square");
  Matrix s = symmetrize(m);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  if (min_eigenvalue(s) < -1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff()))
    throw NumericalError("Cholesky: matrix is indefinite");
  const double scale = std::max(s.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (double jitter = 1e-14; jitter < 1e-4; jitter *= 10.0) {
    Eigen::LLT<Matrix> retry(s + jitter * scale * Matrix::Identity(s.rows(), s.cols()));
    if (retry.info() == Eigen::Success) return retry.matrixL();
  }
  throw NumericalError("Cholesky: factorization failed after jitter");
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace rmfd::linalg
