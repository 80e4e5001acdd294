#include "rmfd/em.hpp"

#include "rmfd/linalg.hpp"

#include <cmath>
#include <sstream>

namespace rmfd {

namespace {

[[noreturn]] void report_singular(const Matrix& omega, const std::vector<int>& theta_ids, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(omega);
  qr.setThreshold(1e-12);
  std::ostringstream os;
  os << "singular normal matrix in the " << what << " regression; unidentified parameters:";
  const auto& perm = qr.colsPermutation().indices();
  const auto rank = qr.rank();
  for (Eigen::Index k = rank; k < perm.size(); ++k) os << ' ' << theta_ids[static_cast<std::size_t>(perm(k))];
  if (rank == perm.size()) os << " (ill-conditioned, rank not deficient)";
  throw NumericalError(os.str());
}

Vector solve_normal(const Matrix& omega, const Vector& rhs, const std::vector<int>& theta_ids, const char* what) {
  Eigen::LLT<Matrix> llt(omega);
  if (llt.info() != Eigen::Success) report_singular(omega, theta_ids, what);
  const Matrix& l = llt.matrixLLT();
  const double dmax = l.diagonal().maxCoeff();
  const double dmin = l.diagonal().minCoeff();
  if (!(dmin > 1e-8 * dmax)) report_singular(omega, theta_ids, what);
  return llt.solve(rhs);
}

bool is_diagonal(const Matrix& w) {
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      if (i != j && w(i, j) != 0.0) return false;
  return true;
}

}  // namespace

void EmOptions::validate() const {
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (!(variance_floor > 0.0)) throw ValidationError("variance_floor must be positive");
  if (!(guard_radius > 0.0 && guard_radius < 1.0)) throw ValidationError("guard_radius must lie in (0, 1)");
}

Vector constrained_gls(const RestrictionTemplate& tmpl, const Matrix& M, const Matrix& P, const Matrix& W) {
  const int rows = tmpl.rows();
  const int cols = tmpl.cols();
  if (M.rows() != cols || M.cols() != cols) throw DimensionError("GLS: M must be cols x cols");
  if (P.rows() != cols || P.cols() != rows) throw DimensionError("GLS: P must be cols x rows");
  if (W.rows() != rows || W.cols() != rows) throw DimensionError("GLS: W must be rows x rows");
  const int k = tmpl.free_count();
  Vector theta(k);
  if (k == 0) return theta;
  const Matrix h = Eigen::Map<const Matrix>(tmpl.h().data(), rows, cols);
  const auto& pos = tmpl.free_positions();

  if (is_diagonal(W)) {
    // Rows decouple; W_ii cancels.
    std::vector<std::vector<int>> by_row(static_cast<std::size_t>(rows));
    for (int t = 0; t < k; ++t) by_row[static_cast<std::size_t>(pos[static_cast<std::size_t>(t)] % rows)].push_back(t);
    for (int i = 0; i < rows; ++i) {
      const auto& ids = by_row[static_cast<std::size_t>(i)];
      if (ids.empty()) continue;
      const auto m = static_cast<Eigen::Index>(ids.size());
      std::vector<int> fcols(ids.size());
      for (std::size_t a = 0; a < ids.size(); ++a) fcols[a] = pos[static_cast<std::size_t>(ids[a])] / rows;
      if (!(W(i, i) > 0.0)) report_singular(Matrix::Zero(m, m), ids, "GLS");
      const Vector mh = M * h.row(i).transpose();
      Matrix omega(m, m);
      Vector rhs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        const int ja = fcols[static_cast<std::size_t>(a)];
        rhs(a) = P(ja, i) - mh(ja);
        for (Eigen::Index b = 0; b < m; ++b) omega(a, b) = M(ja, fcols[static_cast<std::size_t>(b)]);
      }
      const Vector sol = solve_normal(omega, rhs, ids, "GLS");
      for (Eigen::Index a = 0; a < m; ++a) theta(ids[static_cast<std::size_t>(a)]) = sol(a);
    }
    return theta;
  }

  const Matrix rhs_full = W * P.transpose() - W * h * M;
  Matrix omega(k, k);
  Vector rhs(k);
  std::vector<int> ids(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    ids[static_cast<std::size_t>(a)] = a;
    const int ia = pos[static_cast<std::size_t>(a)] % rows;
    const int ja = pos[static_cast<std::size_t>(a)] / rows;
    rhs(a) = rhs_full(ia, ja);
    for (int b = 0; b < k; ++b) {
      const int ib = pos[static_cast<std::size_t>(b)] % rows;
      const int jb = pos[static_cast<std::size_t>(b)] / rows;
      omega(a, b) = M(ja, jb) * W(ia, ib);
    }
  }
  return solve_normal(omega, rhs, ids, "GLS");
}

MStepResult m_step(const SmoothedMoments& moments, const RestrictionTemplate& tA, const RestrictionTemplate& tC,
                   const Matrix& sigma_eps, double sigma_xi) {
  const int r = tA.rows();
  const int q = static_cast<int>(sigma_eps.rows());
  if (!(sigma_xi > 0.0)) throw NumericalError("M-step needs a positive idiosyncratic variance");
  Eigen::LLT<Matrix> llt(linalg::symmetrize(sigma_eps));
  if (llt.info() != Eigen::Success) throw NumericalError("sigma_eps is not positive definite");
  Matrix W_A = Matrix::Zero(r, r);
  W_A.topLeftCorner(q, q) = llt.solve(Matrix::Identity(q, q));
  const Matrix W_C = Matrix::Identity(tC.rows(), tC.rows()) / sigma_xi;
  MStepResult out;
  out.theta_A = constrained_gls(tA, moments.M_s1s1, moments.M_s1s, W_A);
  out.theta_C = constrained_gls(tC, moments.M_ss, moments.M_sx, W_C);
  return out;
}

EmResult em_estimate(const Matrix& X, const KroneckerIndices& gamma, std::optional<int> s_cap,
                     std::optional<int> p_cap, const StateSpaceModel& init, const EmOptions& opts) {
  opts.validate();
  if (!gamma.is_weakly_increasing())
    throw ValidationError("estimation requires weakly increasing Kronecker indices, got " + gamma.to_string());
  if (X.hasNaN()) throw ValidationError("EM estimation needs complete data; impute missing values first");
  const int n = static_cast<int>(X.cols());
  const int q = gamma.q();
  const StateSpaceTemplates tpl = build_templates(gamma, n, q, s_cap, p_cap);
  const RestrictionTemplate& tA = tpl.template_A;
  const RestrictionTemplate& tC = tpl.template_C;
  init.validate();
  if (init.state_dim() != tpl.state_dim() || init.n() != n || init.q() != q)
    throw DimensionError("initial state-space model does not match the template dimensions");
  if (tA.fixed_violation(init.A) > 1e-8 || tC.fixed_violation(init.C) > 1e-8)
    throw ValidationError("initial model violates the fixed entries of the templates");

  StateSpaceModel ss = init;
  ss.A = tA.reconstruct(tA.extract(init.A));
  ss.C = tC.reconstruct(tC.extract(init.C));
  ss.sigma_eps = linalg::symmetrize(init.sigma_eps);
  ss.sigma_xi = std::max(init.sigma_xi, opts.variance_floor);

  EmResult res;
  res.T = static_cast<int>(X.rows());
  res.n_params = tpl.pattern.free_count();
  const int T = res.T;

  FilterOutput f = kalman_filter(ss, X);
  double ll_prev = f.loglik;
  res.trace.loglik.push_back(ll_prev);
  if (opts.keep_snapshots) {
    res.trace.theta_A.push_back(tA.extract(ss.A));
    res.trace.theta_C.push_back(tC.extract(ss.C));
  }

  for (int it = 1; it <= opts.max_iter; ++it) {
    const SmootherOutput sm = kalman_smooth(ss, f, X);
    const SmoothedMoments mom = smoothed_moments(ss, sm, X, opts.moment_variant);

    StateSpaceModel next = ss;
    const MStepResult th = m_step(mom, tA, tC, ss.sigma_eps, ss.sigma_xi);
    next.A = tA.reconstruct(th.theta_A);
    const double rho = linalg::spectral_radius(next.A);
    if (rho >= 1.0) {
      const double lambda = opts.guard_radius / rho;
      double scale = 1.0;
      for (int b = 0; b < tpl.blocks; ++b) {
        scale *= lambda;
        next.A.block(0, b * q, q, q) *= scale;
      }
      ++res.trace.stability_guards;
    }
    next.C = tC.reconstruct(th.theta_C);
    if (opts.moment_variant == MomentVariant::corrected) {
      next.sigma_eps = sigma_eps_from_moments(mom, next.A, q, std::max(1, T - 1));
      next.sigma_xi = sigma_xi_from_moments(mom, next.C);
    } else {
      next.sigma_eps = mom.sigma_eps_new;
      next.sigma_xi = mom.sigma_xi_new;
    }
    next.sigma_xi = std::max(next.sigma_xi, opts.variance_floor);

    f = kalman_filter(next, X);
    const double ll = f.loglik;
    if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood during EM");
    const double delta = std::abs(ll - ll_prev) / (0.5 * std::abs(ll + ll_prev));
    res.trace.loglik.push_back(ll);
    res.trace.delta.push_back(delta);
    if (opts.keep_snapshots) {
      res.trace.theta_A.push_back(tA.extract(next.A));
      res.trace.theta_C.push_back(th.theta_C);
    }
    ss = std::move(next);
    res.iterations = it;
    if (delta < opts.tol) {
      res.converged = true;
      break;
    }
    ll_prev = ll;
  }

  res.loglik = f.loglik;
  res.ss = ss;
  res.model = model_from_statespace(ss, gamma, tpl.pattern.p, tpl.pattern.s);
  return res;
}

}  // namespace rmfd
