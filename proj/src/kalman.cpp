#include "rmfd/kalman.hpp"

#include "rmfd/linalg.hpp"

#include <cmath>
#include <limits>

namespace rmfd {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::vector<int> observed_rows(const Matrix& X, int t) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < X.cols(); ++i)
    if (!std::isnan(X(t, i))) idx.push_back(static_cast<int>(i));
  return idx;
}

Matrix select_rows(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

Vector select(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

void check_inputs(const StateSpaceModel& ss, const Matrix& X) {
  ss.validate();
  if (X.cols() != ss.n()) throw DimensionError("data column count differs from the model's n");
  if (X.rows() < 1) throw ValidationError("data has no rows");
}

}  // namespace

Matrix stationary_state_cov(const StateSpaceModel& ss) {
  const Matrix q = ss.B * ss.sigma_eps * ss.B.transpose();
  return linalg::solve_discrete_lyapunov(ss.A, q);
}

FilterOutput kalman_filter(const StateSpaceModel& ss, const Matrix& X, FilterMethod method) {
  check_inputs(ss, X);
  const int T = static_cast<int>(X.rows());
  const int n = ss.n();
  const int r = ss.state_dim();
  const double s2 = ss.sigma_xi;
  if (method == FilterMethod::woodbury && !(s2 > 0.0))
    throw NumericalError("woodbury filter needs a positive idiosyncratic variance");

  const Matrix Q = linalg::symmetrize(ss.B * ss.sigma_eps * ss.B.transpose());
  const Matrix G_full = ss.C.transpose() * ss.C;
  const Matrix I_r = Matrix::Identity(r, r);

  FilterOutput out;
  out.s_pred.reserve(static_cast<std::size_t>(T));
  out.P_pred.reserve(static_cast<std::size_t>(T));
  out.innov.reserve(static_cast<std::size_t>(T));
  out.Z.reserve(static_cast<std::size_t>(T));
  out.u.reserve(static_cast<std::size_t>(T));
  out.L.reserve(static_cast<std::size_t>(T));
  out.logdet_S.reserve(static_cast<std::size_t>(T));

  Vector s = Vector::Zero(r);
  Matrix P = stationary_state_cov(ss);
  double loglik = 0.0;

  for (int t = 0; t < T; ++t) {
    const Vector xt = X.row(t).transpose();
    const bool complete = !xt.hasNaN();
    std::vector<int> obs;
    if (!complete) obs = observed_rows(X, t);
    const int n_obs = complete ? n : static_cast<int>(obs.size());

    Vector nu = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    Matrix Z = Matrix::Zero(r, r);
    Vector u = Vector::Zero(r);
    double logdet = 0.0;
    double quad = 0.0;

    if (n_obs > 0) {
      const Matrix Co = complete ? ss.C : select_rows(ss.C, obs);
      const Vector xo = complete ? xt : select(xt, obs);
      const Vector nuo = xo - Co * s;
      if (complete) nu = nuo;
      else
        for (std::size_t k = 0; k < obs.size(); ++k) nu(obs[k]) = nuo(static_cast<Eigen::Index>(k));

      if (method == FilterMethod::woodbury) {
        const Matrix G = complete ? G_full : Matrix(Co.transpose() * Co);
        const Vector g = Co.transpose() * nuo;
        const Matrix PG = P * G;
        const Matrix M = s2 * I_r + PG;
        Eigen::PartialPivLU<Matrix> lu(M);
        const Matrix MinvPG = lu.solve(PG);
        const Vector MinvPg = lu.solve(P * g);
        Z = linalg::symmetrize((G - G * MinvPG) / s2);
        u = (g - G * MinvPg) / s2;
        quad = (nuo.squaredNorm() - g.dot(MinvPg)) / s2;
        double logdet_M = 0.0;
        const Matrix& lu_m = lu.matrixLU();
        for (int i = 0; i < r; ++i) logdet_M += std::log(std::abs(lu_m(i, i)));
        logdet = (n_obs - r) * std::log(s2) + logdet_M;
      } else {
        Matrix S = linalg::symmetrize(Co * P * Co.transpose());
        S.diagonal().array() += s2;
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success) throw NumericalError("innovation covariance is not positive definite");
        const Matrix SinvC = llt.solve(Co);
        const Vector Sinvnu = llt.solve(nuo);
        Z = linalg::symmetrize(Co.transpose() * SinvC);
        u = Co.transpose() * Sinvnu;
        quad = nuo.dot(Sinvnu);
        const Matrix& l = llt.matrixLLT();
        for (int i = 0; i < n_obs; ++i) logdet += 2.0 * std::log(l(i, i));
      }
      loglik -= 0.5 * (n_obs * kLog2Pi + logdet + quad);
      if (!std::isfinite(loglik)) throw NumericalError("non-finite log-likelihood");
    }

    const Matrix PZ = P * Z;
    const Matrix Lt = ss.A * (I_r - PZ);
    const Vector s_filt = s + P * u;
    const Matrix P_filt = linalg::symmetrize(P - PZ * P);

    out.s_pred.push_back(s);
    out.P_pred.push_back(P);
    out.innov.push_back(nu);
    out.Z.push_back(Z);
    out.u.push_back(u);
    out.L.push_back(Lt);
    out.logdet_S.push_back(logdet);

    s = ss.A * s_filt;
    P = linalg::symmetrize(ss.A * P_filt * ss.A.transpose() + Q);
  }
  out.loglik = loglik;
  return out;
}

Matrix innovation_cov(const StateSpaceModel& ss, const FilterOutput& f, int t, const Matrix& X) {
  std::vector<int> obs = observed_rows(X, t);
  const Matrix Co = select_rows(ss.C, obs);
  Matrix S = Co * f.P_pred[static_cast<std::size_t>(t)] * Co.transpose();
  S.diagonal().array() += ss.sigma_xi;
  return linalg::symmetrize(S);
}

Matrix kalman_gain(const StateSpaceModel& ss, const FilterOutput& f, int t, const Matrix& X) {
  std::vector<int> obs = observed_rows(X, t);
  const Matrix Co = select_rows(ss.C, obs);
  const Matrix S = innovation_cov(ss, f, t, X);
  const Matrix PCt = f.P_pred[static_cast<std::size_t>(t)] * Co.transpose();
  return ss.A * S.llt().solve(PCt.transpose()).transpose();
}

SmootherOutput kalman_smooth(const StateSpaceModel& ss, const FilterOutput& f, const Matrix& X) {
  check_inputs(ss, X);
  const int T = f.T();
  if (T != X.rows()) throw DimensionError("filter output and data lengths differ");
  const int r = ss.state_dim();
  const Matrix I_r = Matrix::Identity(r, r);

  SmootherOutput out;
  out.s_smooth.resize(static_cast<std::size_t>(T));
  out.P_smooth.resize(static_cast<std::size_t>(T));
  out.lag_cov.assign(static_cast<std::size_t>(T), Matrix::Zero(r, r));
  out.eps_smooth.assign(static_cast<std::size_t>(T), Vector::Zero(ss.q()));
  out.e_smooth.resize(static_cast<std::size_t>(T));

  Vector rr = Vector::Zero(r);
  Matrix N = Matrix::Zero(r, r);
  for (int t = T - 1; t >= 0; --t) {
    const auto ti = static_cast<std::size_t>(t);
    const Matrix& P = f.P_pred[ti];
    const Matrix& L = f.L[ti];
    if (t < T - 1) out.lag_cov[ti + 1] = P * L.transpose() * (I_r - N * f.P_pred[ti + 1]);
    rr = f.u[ti] + L.transpose() * rr;
    N = linalg::symmetrize(f.Z[ti] + L.transpose() * N * L);
    out.s_smooth[ti] = f.s_pred[ti] + P * rr;
    out.P_smooth[ti] = linalg::symmetrize(P - P * N * P);
    out.e_smooth[ti] = X.row(t).transpose() - ss.C * out.s_smooth[ti];
  }
  for (int t = 1; t < T; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    out.eps_smooth[ti] = ss.B.transpose() * (out.s_smooth[ti] - ss.A * out.s_smooth[ti - 1]);
  }
  return out;
}

SmoothedMoments smoothed_moments(const StateSpaceModel& ss, const SmootherOutput& sm, const Matrix& X,
                                 MomentVariant variant) {
  check_inputs(ss, X);
  if (X.hasNaN()) throw ValidationError("smoothed moments need complete data");
  const int T = static_cast<int>(X.rows());
  const int n = ss.n();
  const int r = ss.state_dim();
  SmoothedMoments m;
  m.T = T;
  m.n = n;
  m.M_ss = Matrix::Zero(r, r);
  m.M_sx = Matrix::Zero(r, n);
  m.M_s1s1 = Matrix::Zero(r, r);
  m.M_s1s = Matrix::Zero(r, r);
  m.M_ss_tail = Matrix::Zero(r, r);
  double resid = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    const Vector& s = sm.s_smooth[ti];
    const Matrix Ess = s * s.transpose() + sm.P_smooth[ti];
    m.M_ss += Ess;
    m.M_sx.noalias() += s * X.row(t);
    m.trace_xx += X.row(t).squaredNorm();
    resid += sm.e_smooth[ti].squaredNorm() + (ss.C * sm.P_smooth[ti]).cwiseProduct(ss.C).sum();
    if (t > 0) {
      const Vector& s1 = sm.s_smooth[ti - 1];
      m.M_ss_tail += Ess;
      m.M_s1s1 += s1 * s1.transpose() + sm.P_smooth[ti - 1];
      m.M_s1s += s1 * s.transpose() + sm.lag_cov[ti];
    }
  }
  const double inv_t = 1.0 / T;
  m.M_ss = linalg::symmetrize(m.M_ss * inv_t);
  m.M_sx *= inv_t;
  m.M_s1s1 = linalg::symmetrize(m.M_s1s1 * inv_t);
  m.M_s1s *= inv_t;
  m.M_ss_tail = linalg::symmetrize(m.M_ss_tail * inv_t);
  m.trace_xx *= inv_t;
  m.sigma_xi_new = resid / (static_cast<double>(n) * T);
  const double divisor = variant == MomentVariant::literal ? T : std::max(1, T - 1);
  m.sigma_eps_new = sigma_eps_from_moments(m, ss.A, ss.q(), divisor);
  return m;
}

Matrix sigma_eps_from_moments(const SmoothedMoments& m, const Matrix& A, int q, double divisor) {
  const Matrix AM = A * m.M_s1s;
  const Matrix full = m.M_ss_tail - AM - AM.transpose() + A * m.M_s1s1 * A.transpose();
  return linalg::symmetrize(full.topLeftCorner(q, q) * (m.T / divisor));
}

double sigma_xi_from_moments(const SmoothedMoments& m, const Matrix& C) {
  const double cross = (C.array() * m.M_sx.transpose().array()).sum();
  const double quad = (C * m.M_ss).cwiseProduct(C).sum();
  return (m.trace_xx - 2.0 * cross + quad) / m.n;
}

}  // namespace rmfd
