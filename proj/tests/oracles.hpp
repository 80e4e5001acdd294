#pragma once

// Reference computations used only by the tests. They take the slow, direct
// route (full joint covariances, KKT systems, frequency-domain inversion).

#include "rmfd/echelon.hpp"
#include "rmfd/kalman.hpp"
#include "rmfd/linalg.hpp"
#include "rmfd/random.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using rmfd::Matrix;
using rmfd::Vector;

inline Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

inline Matrix random_spd(int k, std::mt19937_64& rng, double ridge = 0.5) {
  const Matrix g = random_matrix(k, k, rng);
  return g * g.transpose() / k + ridge * Matrix::Identity(k, k);
}

/// vec(P) = (I - A (x) A)^{-1} vec(Q).
inline Matrix lyapunov_kron(const Matrix& A, const Matrix& Q) {
  const auto m = A.rows();
  Matrix K = Matrix::Identity(m * m, m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) K.block(i * m, j * m, m, m) -= A(i, j) * A;
  const Vector q = Eigen::Map<const Vector>(Q.data(), m * m);
  const Vector p = K.fullPivLu().solve(q);
  Matrix P = Eigen::Map<const Matrix>(p.data(), m, m);
  return 0.5 * (P + P.transpose());
}

struct RandomSystem {
  rmfd::StateSpaceModel ss;
  Matrix X;
};

/// Stable system with B = [I; 0], plus a simulated panel with optional
/// missing entries.
inline RandomSystem random_system(int m, int q, int n, int T, std::mt19937_64& rng, double missing_share = 0.0) {
  RandomSystem out;
  Matrix A = random_matrix(m, m, rng);
  const double rho = rmfd::linalg::spectral_radius(A);
  std::uniform_real_distribution<double> u(0.3, 0.9);
  A *= u(rng) / rho;
  out.ss.A = A;
  out.ss.B = Matrix::Zero(m, q);
  out.ss.B.topRows(q).setIdentity();
  out.ss.C = random_matrix(n, m, rng);
  out.ss.sigma_eps = random_spd(q, rng);
  out.ss.sigma_xi = 0.2 + u(rng);
  const Matrix P = lyapunov_kron(A, out.ss.B * out.ss.sigma_eps * out.ss.B.transpose());
  Eigen::LLT<Matrix> lp(P + 1e-12 * Matrix::Identity(m, m));
  Eigen::LLT<Matrix> le(out.ss.sigma_eps);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector s = lp.matrixL() * random_matrix(m, 1, rng);
  std::bernoulli_distribution miss(missing_share);
  out.X.resize(T, n);
  for (int t = 0; t < T; ++t) {
    if (t > 0) s = A * s + out.ss.B * (le.matrixL() * random_matrix(q, 1, rng));
    const Vector x = out.ss.C * s + std::sqrt(out.ss.sigma_xi) * random_matrix(n, 1, rng);
    for (int i = 0; i < n; ++i) out.X(t, i) = (missing_share > 0 && miss(rng)) ? std::nan("") : x(i);
  }
  return out;
}

struct JointResult {
  std::vector<Vector> mean;
  std::vector<Matrix> cov;
  std::vector<Matrix> lag_cov;  // Cov(s_{t-1}, s_t | X); [0] zero
  double loglik = 0.0;
};

/// Direct conditioning of the stacked state vector on all observed x.
inline JointResult joint_gaussian(const rmfd::StateSpaceModel& ss, const Matrix& X) {
  const int T = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols());
  const int m = static_cast<int>(ss.A.rows());
  const Matrix P0 = lyapunov_kron(ss.A, ss.B * ss.sigma_eps * ss.B.transpose());
  std::vector<Matrix> Apow{Matrix::Identity(m, m)};
  for (int k = 1; k < T; ++k) Apow.push_back(ss.A * Apow.back());
  Matrix Sss(m * T, m * T);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < T; ++u)
      Sss.block(t * m, u * m, m, m) = t >= u ? Matrix(Apow[t - u] * P0) : Matrix(P0 * Apow[u - t].transpose());
  std::vector<int> obs_t, obs_i;
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i)
      if (!std::isnan(X(t, i))) {
        obs_t.push_back(t);
        obs_i.push_back(i);
      }
  const int N = static_cast<int>(obs_t.size());
  Matrix G = Matrix::Zero(N, m * T);  // x_obs = G s + noise
  Vector x(N);
  for (int k = 0; k < N; ++k) {
    G.block(k, obs_t[k] * m, 1, m) = ss.C.row(obs_i[k]);
    x(k) = X(obs_t[k], obs_i[k]);
  }
  const Matrix Sxx = G * Sss * G.transpose() + ss.sigma_xi * Matrix::Identity(N, N);
  const Matrix Ssx = Sss * G.transpose();
  Eigen::LDLT<Matrix> ldlt(Sxx);
  const Vector mean = Ssx * ldlt.solve(x);
  const Matrix cov = Sss - Ssx * ldlt.solve(Ssx.transpose());
  JointResult out;
  for (int t = 0; t < T; ++t) {
    out.mean.push_back(mean.segment(t * m, m));
    out.cov.push_back(cov.block(t * m, t * m, m, m));
    out.lag_cov.push_back(t == 0 ? Matrix(Matrix::Zero(m, m)) : Matrix(cov.block((t - 1) * m, t * m, m, m)));
  }
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) logdet += std::log(ldlt.vectorD()(i));
  out.loglik = -0.5 * (N * std::log(2.0 * std::numbers::pi) + logdet + x.dot(ldlt.solve(x)));
  return out;
}

/// min_v v'(M (x) W)v - 2 vec(W P')'v subject to the fixed entries of tmpl,
/// solved as one KKT system over the full vec(L).
inline Matrix constrained_ls_kkt(const rmfd::RestrictionTemplate& tmpl, const Matrix& M, const Matrix& P,
                                 const Matrix& W) {
  const int rows = tmpl.rows();
  const int cols = tmpl.cols();
  const int N = rows * cols;
  Matrix Q(N, N);
  for (int a = 0; a < cols; ++a)
    for (int b = 0; b < cols; ++b) Q.block(a * rows, b * rows, rows, rows) = M(a, b) * W;
  const Matrix WP = W * P.transpose();
  const Vector g = Eigen::Map<const Vector>(WP.data(), N);
  std::vector<int> fixed;
  for (int k = 0; k < N; ++k)
    if (!tmpl.is_free(k)) fixed.push_back(k);
  const int F = static_cast<int>(fixed.size());
  Matrix K = Matrix::Zero(N + F, N + F);
  Vector rhs = Vector::Zero(N + F);
  K.topLeftCorner(N, N) = 2.0 * Q;
  rhs.head(N) = 2.0 * g;
  for (int f = 0; f < F; ++f) {
    K(N + f, fixed[f]) = 1.0;
    K(fixed[f], N + f) = 1.0;
    rhs(N + f) = tmpl.h()(fixed[f]);
  }
  const Vector sol = K.fullPivLu().solve(rhs);
  const Vector v = sol.head(N);
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Power-series coefficients of d(z) c(z)^{-1} by sampling on the unit circle
/// and an inverse DFT. Aliasing error is of order rho^N.
inline std::vector<Matrix> irf_by_dft(const rmfd::RmfdModel& m, int horizon, int N = 1024) {
  using C = std::complex<double>;
  using CMatrix = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = m.n();
  const int q = m.q();
  std::vector<CMatrix> vals;
  for (int w = 0; w < N; ++w) {
    const C z = std::polar(1.0, 2.0 * std::numbers::pi * w / N);
    CMatrix c = CMatrix::Zero(q, q);
    CMatrix d = CMatrix::Zero(n, q);
    C zp = 1.0;
    for (int j = 0; j <= std::max(m.p(), m.s()); ++j) {
      if (j <= m.p()) c += zp * m.c[j].cast<C>();
      if (j <= m.s()) d += zp * m.d[j].cast<C>();
      zp *= z;
    }
    vals.push_back(d * c.inverse());
  }
  std::vector<Matrix> out;
  for (int j = 0; j <= horizon; ++j) {
    CMatrix acc = CMatrix::Zero(n, q);
    for (int w = 0; w < N; ++w) acc += vals[w] * std::polar(1.0, -2.0 * std::numbers::pi * w * j / N);
    out.push_back((acc / static_cast<double>(N)).real());
  }
  return out;
}

}  // namespace oracle
