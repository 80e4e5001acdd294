#include "rmfd/init.hpp"

#include "rmfd/kalman.hpp"
#include "rmfd/linalg.hpp"
#include "rmfd/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace rmfd {

namespace {

int default_horizon(int state_dim, int q) {
  const int per = (state_dim + q - 1) / q;
  return std::max(2, per + 1);
}

}  // namespace

int CcaOptions::future_horizon() const { return f.value_or(default_horizon(state_dim, std::max(1, q_hint))); }
int CcaOptions::past_horizon() const { return p_lags.value_or(default_horizon(state_dim, std::max(1, q_hint))); }

CcaResult cca_init(const Matrix& X_in, const CcaOptions& opts) {
  if (X_in.hasNaN()) throw ValidationError("CCA needs complete data");
  const int T = static_cast<int>(X_in.rows());
  const int n = static_cast<int>(X_in.cols());
  const int m = opts.state_dim;
  const int f = opts.future_horizon();
  const int p = opts.past_horizon();
  if (m < 1) throw ValidationError("CCA state_dim must be >= 1");
  if (f < 1 || p < 1) throw ValidationError("CCA horizons must be >= 1");
  if (m > n * p) throw ValidationError("CCA state_dim exceeds n * p_lags");
  if (T <= f + p) throw ValidationError("sample too short for the CCA horizons");

  const Matrix X = X_in.rowwise() - X_in.colwise().mean();
  const int N = T - p - f + 1;  // t = p .. T - f
  Matrix past(n * p, N);
  Matrix fut(n * f, N);
  for (int c = 0; c < N; ++c) {
    const int t = p + c;
    for (int i = 0; i < p; ++i) past.block(i * n, c, n, 1) = X.row(t - 1 - i).transpose();
    for (int i = 0; i < f; ++i) fut.block(i * n, c, n, 1) = X.row(t + i).transpose();
  }
  Matrix s_pp = linalg::symmetrize(past * past.transpose() / N);
  Matrix s_ff = linalg::symmetrize(fut * fut.transpose() / N);
  const Matrix s_fp = fut * past.transpose() / N;

  const double mean_diag = s_pp.diagonal().mean();
  if (opts.ridge > 0.0) {
    s_pp.diagonal().array() += opts.ridge * mean_diag;
    s_ff.diagonal().array() += opts.ridge * s_ff.diagonal().mean();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es_p(s_pp);
  const Vector& ev = es_p.eigenvalues();
  if (!(ev.maxCoeff() > 0.0) || ev.minCoeff() < 1e-12 * ev.maxCoeff())
    throw NumericalError("CCA: past covariance is rank deficient");
  const Matrix wp = es_p.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es_p.eigenvectors().transpose();
  const Matrix wf = linalg::pd_inv_sqrt(s_ff, 1e-14);

  Eigen::BDCSVD<Matrix> svd(wf * s_fp * wp, Eigen::ComputeThinV);
  const Matrix kp = svd.matrixV().leftCols(m).transpose() * wp;  // m x np

  // States for t = p .. T - 1 use only data strictly before t.
  const int Ns = T - p;
  Matrix past_all(n * p, Ns);
  for (int c = 0; c < Ns; ++c)
    for (int i = 0; i < p; ++i) past_all.block(i * n, c, n, 1) = X.row(p + c - 1 - i).transpose();
  const Matrix S = kp * past_all;                           // m x Ns
  const Matrix Xs = X.middleRows(p, Ns).transpose();        // n x Ns

  const Matrix Sss = S * S.transpose();
  Eigen::LDLT<Matrix> ldlt(Sss);
  const Matrix C = ldlt.solve(S * Xs.transpose()).transpose();
  const Matrix xi = Xs - C * S;

  const Matrix S0 = S.leftCols(Ns - 1);
  const Matrix S1 = S.rightCols(Ns - 1);
  const Matrix A = (S0 * S0.transpose()).ldlt().solve(S0 * S1.transpose()).transpose();
  const Matrix eps = S1 - A * S0;

  const Matrix xi0 = xi.leftCols(Ns - 1);
  const Matrix sig_innov = linalg::symmetrize(xi * xi.transpose() / Ns);
  // residual of s_{t+1} - A s_t on the innovation at t
  const Matrix K = (xi0 * xi0.transpose()).completeOrthogonalDecomposition().solve(xi0 * eps.transpose()).transpose();

  CcaResult out;
  out.ss.A = A;
  out.ss.B = Matrix::Identity(m, m);
  out.ss.C = C;
  out.ss.sigma_eps = linalg::symmetrize(eps * eps.transpose() / (Ns - 1));
  out.ss.sigma_xi = sig_innov.diagonal().mean();
  out.K = K;
  out.sigma_innov = sig_innov;
  out.canonical_correlations = svd.singularValues().head(std::min<Eigen::Index>(m, svd.singularValues().size()));
  if (!A.allFinite() || !C.allFinite() || !K.allFinite()) throw NumericalError("CCA produced non-finite estimates");
  return out;
}

PolyMatrix shock_reduce(const CcaResult& cca, int q, int horizon) {
  const int n = cca.ss.n();
  if (q < 1 || q > n) throw ValidationError("shock_reduce: q must lie in [1, n]");
  if (horizon < 0) throw ValidationError("shock_reduce: horizon must be >= 0");
  Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(cca.sigma_innov));
  const Vector ev = es.eigenvalues().reverse();
  const Matrix evec = es.eigenvectors().rowwise().reverse();
  if (!(ev(q - 1) > 0.0)) throw NumericalError("shock_reduce: fewer than q positive eigenvalues");
  const Matrix red = evec.leftCols(q) * ev.head(q).cwiseSqrt().asDiagonal();
  std::vector<Matrix> k;
  k.push_back(red);
  Matrix ak = cca.K * red;
  for (int j = 1; j <= horizon; ++j) {
    k.push_back(cca.ss.C * ak);
    ak = cca.ss.A * ak;
  }
  return PolyMatrix(std::move(k));
}

CanonicalInit init_to_canonical(const PolyMatrix& k, const KroneckerIndices& gamma, std::optional<int> s_cap,
                                std::optional<int> p_cap, double sigma_xi, double max_radius) {
  const int n = k.rows();
  const int q = k.cols();
  if (gamma.q() != q) throw DimensionError("init_to_canonical: gamma length differs from IRF columns");
  const EchelonPattern pat = echelon_pattern(gamma, n, s_cap, p_cap);
  const int N = k.degree();

  const Matrix top = k[0].topRows(q);
  Eigen::FullPivLU<Matrix> top_lu(top);
  if (!top_lu.isInvertible()) throw NumericalError("top q x q block of k_0 is singular");
  const Matrix top_inv = top_lu.inverse();
  std::vector<Matrix> kn;
  for (int j = 0; j <= N; ++j) kn.push_back(k[j] * top_inv);

  CanonicalInit out{RmfdModel{PolyMatrix::identity(q), PolyMatrix::zero(n, q, 0), gamma}, {}, std::nullopt, true, 0.0};
  std::optional<RmfdModel> realized;
  try {
    RealizationResult rr = echelon_realize(PolyMatrix(kn));
    out.realized_gamma = rr.model.gamma;
    realized = std::move(rr.model);
  } catch (const Error&) {
  }

  // Free c entries in pattern order.
  std::vector<CoeffEntry> cfree;
  for (int i = 0; i <= pat.p; ++i)
    for (int l = 0; l < q; ++l)
      for (int r = 0; r < q; ++r)
        if (pat.c_free[static_cast<std::size_t>(i)](r, l)) cfree.push_back({i, r, l});

  // Equations of (k c)_j = d_j at entries where d_j is fixed.
  struct Eq { int lag; int row; int col; };
  std::vector<Eq> eqs;
  for (int j = 0; j <= N; ++j)
    for (int l = 0; l < q; ++l)
      for (int r = 0; r < n; ++r) {
        const bool dfree = j <= pat.s && pat.d_free[static_cast<std::size_t>(j)](r, l) && !(j == 0 && r < q);
        if (!dfree) eqs.push_back({j, r, l});
      }

  const auto ne = static_cast<Eigen::Index>(eqs.size());
  const auto nc = static_cast<Eigen::Index>(cfree.size());
  Matrix J = Matrix::Zero(ne, nc);
  Vector b(ne);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const Eq& eq = eqs[static_cast<std::size_t>(e)];
    double base = 0.0;
    for (int i = 0; i <= std::min(eq.lag, pat.p); ++i) {
      const Matrix& ci_fixed = pat.c_fixed[static_cast<std::size_t>(i)];
      base += kn[static_cast<std::size_t>(eq.lag - i)].row(eq.row).dot(ci_fixed.col(eq.col));
    }
    const double dfix = eq.lag <= pat.s ? pat.d_fixed[static_cast<std::size_t>(eq.lag)](eq.row, eq.col) : 0.0;
    b(e) = base - dfix;
    for (Eigen::Index a = 0; a < nc; ++a) {
      const CoeffEntry& ce = cfree[static_cast<std::size_t>(a)];
      if (ce.col != eq.col || ce.lag > eq.lag) continue;
      J(e, a) = kn[static_cast<std::size_t>(eq.lag - ce.lag)](eq.row, ce.row);
    }
  }

  Vector phi0 = Vector::Zero(nc);
  if (realized) {
    for (Eigen::Index a = 0; a < nc; ++a) {
      const CoeffEntry& ce = cfree[static_cast<std::size_t>(a)];
      phi0(a) = realized->c.at(ce.lag)(ce.row, ce.col);
    }
    out.projected = !(realized->gamma == gamma && realized->p() == pat.p && realized->s() == pat.s);
  }
  Vector phi = phi0;
  if (nc > 0 && ne > 0) {
    const Vector resid0 = J * phi0 + b;
    phi = phi0 - J.completeOrthogonalDecomposition().solve(resid0);
  }
  out.fit_residual = ne > 0 ? (J * phi + b).norm() / std::max(1e-300, Vector(b).norm() + 1.0) : 0.0;

  std::vector<Matrix> c;
  for (int i = 0; i <= pat.p; ++i) c.push_back(pat.c_fixed[static_cast<std::size_t>(i)]);
  for (Eigen::Index a = 0; a < nc; ++a) {
    const CoeffEntry& ce = cfree[static_cast<std::size_t>(a)];
    c[static_cast<std::size_t>(ce.lag)](ce.row, ce.col) = phi(a);
  }
  PolyMatrix cp(std::move(c));
  std::vector<Matrix> d;
  for (int j = 0; j <= pat.s; ++j) {
    Matrix kc = Matrix::Zero(n, q);
    for (int i = 0; i <= std::min(j, pat.p); ++i) kc += kn[static_cast<std::size_t>(j - i)] * cp[i];
    Matrix dj = pat.d_fixed[static_cast<std::size_t>(j)];
    for (int l = 0; l < q; ++l)
      for (int r = 0; r < n; ++r)
        if (pat.d_free[static_cast<std::size_t>(j)](r, l)) dj(r, l) = (j == 0 && r < q) ? cp[0](r, l) : kc(r, l);
    d.push_back(dj);
  }
  out.model = RmfdModel{std::move(cp), PolyMatrix(std::move(d)), gamma};
  stabilize(out.model, max_radius);
  out.ss = assemble_statespace(out.model, linalg::symmetrize(top * top.transpose()), sigma_xi);
  return out;
}

RobustInitResult robust_init(const Matrix& X, const InitOptions& opts, const CandidateScore& score) {
  if (opts.S < 1) throw ValidationError("robust_init: S must be >= 1");
  const CandidateScore scorer = score ? score : CandidateScore([](const CcaResult& c, const Matrix& x) {
    return kalman_filter(c.ss, x).loglik;
  });

  RobustInitResult out;
  bool have = false;
  auto consider = [&](CcaResult cand) {
    double sc;
    try {
      sc = scorer(cand, X);
    } catch (const Error&) {
      ++out.failures;
      return false;
    }
    if (!std::isfinite(sc)) {
      ++out.failures;
      return false;
    }
    out.scores.push_back(sc);
    if (!have || sc > out.best_score) {
      out.best = std::move(cand);
      out.best_score = sc;
      have = true;
    }
    return true;
  };

  int produced = 0;
  try {
    if (consider(cca_init(X, opts.cca))) {
      out.direct_succeeded = true;
      ++produced;
    }
  } catch (const Error&) {
    ++out.failures;
  }

  std::uint64_t draw = 0;
  const int max_draws = opts.S * (opts.rho_steps + 1);
  while (produced < opts.S && static_cast<int>(draw) < max_draws) {
    int rho = opts.rho0;
    bool ok = false;
    for (int step = 0; step <= opts.rho_steps && !ok; ++step, ++rho) {
      auto rng = stream_rng(opts.seed, draw++);
      std::normal_distribution<double> noise(0.0, std::sqrt(std::pow(10.0, -rho)));
      Matrix xs = X;
      for (Eigen::Index j = 0; j < xs.cols(); ++j)
        for (Eigen::Index i = 0; i < xs.rows(); ++i) xs(i, j) += noise(rng);
      try {
        ok = consider(cca_init(xs, opts.cca));
      } catch (const Error&) {
        ++out.failures;
      }
    }
    if (!ok) break;
    ++produced;
  }
  if (!have)
    throw NumericalError("initialization failed: no CCA candidate succeeded (" + std::to_string(out.failures) +
                         " failures)");
  return out;
}

EchelonInitResult echelon_init(const Matrix& X, const KroneckerIndices& gamma, std::optional<int> s_cap,
                               std::optional<int> p_cap, InitOptions opts) {
  const int n = static_cast<int>(X.cols());
  const EchelonPattern pat = echelon_pattern(gamma, n, s_cap, p_cap);
  const int blocks = std::max(pat.p, pat.s + 1);
  if (opts.cca.state_dim == 0) opts.cca.state_dim = blocks * gamma.q();
  opts.cca.q_hint = gamma.q();
  const int horizon = 4 * (gamma.kappa() + 1);

  auto build = [&](const CcaResult& c) {
    return init_to_canonical(shock_reduce(c, gamma.q(), horizon), gamma, s_cap, p_cap, c.ss.sigma_xi);
  };
  const CandidateScore score = [&](const CcaResult& c, const Matrix& x) {
    return kalman_filter(build(c).ss, x).loglik;
  };
  EchelonInitResult out;
  out.search = robust_init(X, opts, score);
  out.init = build(out.search.best);
  out.loglik = out.search.best_score;
  return out;
}

}  // namespace rmfd
