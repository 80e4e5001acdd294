#include "rmfd/echelon.hpp"

#include "rmfd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rmfd {

namespace {

// Number of free coefficients in entry (k, l), k != l, of c(z) under the
// reversed echelon form. Column l has degree gamma_l.
int offdiag_free_count(const KroneckerIndices& g, int k, int l) {
  return k < l ? std::min(g[l] + 1, g[k]) : std::min(g[l], g[k]);
}

}  // namespace

int EchelonPattern::free_count() const {
  int count = 0;
  for (const auto& m : c_free) count += static_cast<int>(m.count());
  for (const auto& m : d_free) count += static_cast<int>(m.count());
  return count - static_cast<int>(links.size());
}

EchelonPattern echelon_pattern(const KroneckerIndices& gamma, int n, std::optional<int> s_cap,
                               std::optional<int> p_cap) {
  const int q = gamma.q();
  const int kappa = gamma.kappa();
  if (n < q) throw DimensionError("echelon pattern requires n >= q");
  if (s_cap && (*s_cap < 0 || *s_cap > kappa))
    throw ValidationError("s_cap must lie in [0, kappa]");
  if (p_cap && (*p_cap < 0 || *p_cap > kappa))
    throw ValidationError("p_cap must lie in [0, kappa]");

  EchelonPattern pat{gamma, n, q, p_cap.value_or(kappa), s_cap.value_or(kappa), {}, {}, {}, {}, {}};

  for (int i = 0; i <= pat.p; ++i) {
    Mask free = Mask::Constant(q, q, false);
    Matrix fixed = Matrix::Zero(q, q);
    for (int l = 0; l < q; ++l) {
      for (int k = 0; k < q; ++k) {
        if (k == l) {
          if (i == 0) fixed(k, l) = 1.0;
          else free(k, l) = i <= gamma[l];
          continue;
        }
        const int cnt = offdiag_free_count(gamma, k, l);
        free(k, l) = cnt > 0 && i >= gamma[l] - cnt + 1 && i <= gamma[l];
      }
    }
    pat.c_free.push_back(free);
    pat.c_fixed.push_back(fixed);
  }

  for (int j = 0; j <= pat.s; ++j) {
    Mask free = Mask::Constant(n, q, false);
    Matrix fixed = Matrix::Zero(n, q);
    for (int l = 0; l < q; ++l) {
      for (int k = 0; k < n; ++k) {
        if (j == 0 && k < q) {
          // zero-lag top block coincides with c_0
          free(k, l) = pat.c_free[0](k, l);
          fixed(k, l) = pat.c_fixed[0](k, l);
          if (free(k, l)) pat.links.push_back({{0, k, l}, {0, k, l}});
        } else {
          free(k, l) = j <= gamma[l];
        }
      }
    }
    pat.d_free.push_back(free);
    pat.d_fixed.push_back(fixed);
  }
  return pat;
}

RestrictionTemplate::RestrictionTemplate(int rows, int cols, std::vector<int> free_positions, Vector fixed_values)
    : rows_(rows), cols_(cols), free_(std::move(free_positions)), h_(std::move(fixed_values)) {
  const int total = rows * cols;
  if (h_.size() != total) throw DimensionError("template: h has wrong length");
  position_to_theta_.assign(static_cast<std::size_t>(total), -1);
  for (std::size_t t = 0; t < free_.size(); ++t) {
    const int pos = free_[t];
    if (pos < 0 || pos >= total) throw DimensionError("template: free position out of range");
    if (position_to_theta_[static_cast<std::size_t>(pos)] >= 0)
      throw ValidationError("template: duplicated free position");
    position_to_theta_[static_cast<std::size_t>(pos)] = static_cast<int>(t);
    if (h_(pos) != 0.0) throw ValidationError("template: free position must have h = 0");
  }
}

Matrix RestrictionTemplate::H() const {
  Matrix h = Matrix::Zero(rows_ * cols_, free_count());
  for (std::size_t t = 0; t < free_.size(); ++t) h(free_[t], static_cast<Eigen::Index>(t)) = 1.0;
  return h;
}

Matrix RestrictionTemplate::reconstruct(const Vector& theta) const {
  if (theta.size() != free_count()) throw DimensionError("template: theta has wrong length");
  Matrix l = Eigen::Map<const Matrix>(h_.data(), rows_, cols_);
  for (std::size_t t = 0; t < free_.size(); ++t) l.data()[free_[t]] = theta(static_cast<Eigen::Index>(t));
  return l;
}

Vector RestrictionTemplate::extract(const Matrix& l) const {
  if (l.rows() != rows_ || l.cols() != cols_) throw DimensionError("template: matrix has wrong shape");
  Vector theta(free_count());
  for (std::size_t t = 0; t < free_.size(); ++t) theta(static_cast<Eigen::Index>(t)) = l.data()[free_[t]];
  return theta;
}

double RestrictionTemplate::fixed_violation(const Matrix& l) const {
  double worst = 0.0;
  for (int pos = 0; pos < rows_ * cols_; ++pos)
    if (!is_free(pos)) worst = std::max(worst, std::abs(l.data()[pos] - h_(pos)));
  return worst;
}

StateSpaceTemplates build_templates(const KroneckerIndices& gamma, int n, int q, std::optional<int> s_cap,
                                    std::optional<int> p_cap) {
  if (q != gamma.q()) throw DimensionError("build_templates: q differs from the Kronecker index count");
  EchelonPattern pat = echelon_pattern(gamma, n, s_cap, p_cap);
  const int blocks = std::max(pat.p, pat.s + 1);
  const int dim = blocks * q;

  std::vector<int> c_free;
  Vector c_h = Vector::Zero(n * dim);
  for (int j = 0; j <= pat.s; ++j)
    for (int l = 0; l < q; ++l)
      for (int k = 0; k < n; ++k) {
        const int pos = (j * q + l) * n + k;
        if (pat.d_free[static_cast<std::size_t>(j)](k, l)) c_free.push_back(pos);
        else c_h(pos) = pat.d_fixed[static_cast<std::size_t>(j)](k, l);
      }
  std::sort(c_free.begin(), c_free.end());

  std::vector<int> a_free;
  Vector a_h = Vector::Zero(dim * dim);
  for (int i = 1; i <= pat.p; ++i)
    for (int l = 0; l < q; ++l)
      for (int k = 0; k < q; ++k)
        if (pat.c_free[static_cast<std::size_t>(i)](k, l)) a_free.push_back(((i - 1) * q + l) * dim + k);
  for (int r = q; r < dim; ++r) a_h((r - q) * dim + r) = 1.0;  // A(r, r - q) = 1
  std::sort(a_free.begin(), a_free.end());

  RestrictionTemplate tc(n, dim, std::move(c_free), std::move(c_h));
  RestrictionTemplate ta(dim, dim, std::move(a_free), std::move(a_h));
  std::vector<CrossLink> links = pat.links;
  return StateSpaceTemplates{std::move(pat), std::move(tc), std::move(ta), std::move(links), blocks};
}

int count_free_params(const KroneckerIndices& gamma, int n, int q, std::optional<int> s_cap,
                      std::optional<int> p_cap) {
  if (q != gamma.q()) throw DimensionError("count_free_params: q differs from the Kronecker index count");
  return echelon_pattern(gamma, n, s_cap, p_cap).free_count();
}

void RmfdModel::validate() const {
  if (c.rows() != c.cols()) throw DimensionError("c(z) must be square");
  if (d.cols() != c.cols()) throw DimensionError("c(z) and d(z) must have the same column count");
  if (gamma.q() != c.cols()) throw DimensionError("Kronecker index count differs from q");
}

double RmfdModel::pattern_violation(const EchelonPattern& pat) const {
  double worst = 0.0;
  for (int i = 0; i <= std::max(p(), pat.p); ++i) {
    const Matrix ci = c.at(i);
    for (int l = 0; l < q(); ++l)
      for (int k = 0; k < q(); ++k) {
        const bool free = i <= pat.p && pat.c_free[static_cast<std::size_t>(i)](k, l);
        const double target = i <= pat.p ? pat.c_fixed[static_cast<std::size_t>(i)](k, l) : 0.0;
        if (!free) worst = std::max(worst, std::abs(ci(k, l) - target));
      }
  }
  for (int j = 0; j <= std::max(s(), pat.s); ++j) {
    const Matrix dj = d.at(j);
    for (int l = 0; l < q(); ++l)
      for (int k = 0; k < n(); ++k) {
        const bool free = j <= pat.s && pat.d_free[static_cast<std::size_t>(j)](k, l);
        const double target = j <= pat.s ? pat.d_fixed[static_cast<std::size_t>(j)](k, l) : 0.0;
        if (!free) worst = std::max(worst, std::abs(dj(k, l) - target));
      }
  }
  for (const auto& link : pat.links)
    worst = std::max(worst, std::abs(c.at(link.c_entry.lag)(link.c_entry.row, link.c_entry.col) -
                                     d.at(link.d_entry.lag)(link.d_entry.row, link.d_entry.col)));
  return worst;
}

void StateSpaceModel::validate() const {
  const auto m = A.rows();
  if (A.cols() != m || B.rows() != m || C.cols() != m)
    throw DimensionError("state-space matrices are not conformable");
  if (sigma_eps.rows() != B.cols() || sigma_eps.cols() != B.cols())
    throw DimensionError("sigma_eps must be q x q");
  if (!(sigma_xi >= 0.0)) throw ValidationError("sigma_xi must be non-negative");
}

StateSpaceModel assemble_statespace(const RmfdModel& model, const Matrix& sigma_eps, double sigma_xi) {
  model.validate();
  const int q = model.q();
  const int n = model.n();
  const int p = model.p();
  const int s = model.s();
  Eigen::FullPivLU<Matrix> lu(model.c[0]);
  if (!lu.isInvertible()) throw NumericalError("c_0 is singular");
  const Matrix c0_inv = lu.inverse();

  const int blocks = std::max(p, s + 1);
  const int dim = blocks * q;
  StateSpaceModel ss;
  ss.A = Matrix::Zero(dim, dim);
  for (int i = 1; i <= p; ++i) ss.A.block(0, (i - 1) * q, q, q) = -model.c[i] * c0_inv;
  for (int b = 1; b < blocks; ++b) ss.A.block(b * q, (b - 1) * q, q, q).setIdentity();
  ss.B = Matrix::Zero(dim, q);
  ss.B.topRows(q).setIdentity();
  ss.C = Matrix::Zero(n, dim);
  for (int j = 0; j <= s; ++j) ss.C.block(0, j * q, n, q) = model.d[j] * c0_inv;
  ss.sigma_eps = sigma_eps;
  ss.sigma_xi = sigma_xi;
  ss.validate();
  return ss;
}

RmfdModel model_from_statespace(const StateSpaceModel& ss, const KroneckerIndices& gamma, int p, int s) {
  const int q = gamma.q();
  const int n = ss.n();
  if (ss.state_dim() < std::max(p, s + 1) * q) throw DimensionError("state dimension too small for (p, s)");
  std::vector<Matrix> c{Matrix::Identity(q, q)};
  for (int i = 1; i <= p; ++i) c.push_back(-ss.A.block(0, (i - 1) * q, q, q));
  std::vector<Matrix> d;
  for (int j = 0; j <= s; ++j) d.push_back(ss.C.block(0, j * q, n, q));
  return RmfdModel{PolyMatrix(std::move(c)), PolyMatrix(std::move(d)), gamma};
}

PolyMatrix irf_rmfd(const RmfdModel& model, int horizon) {
  model.validate();
  if (horizon < 0) throw ValidationError("horizon must be >= 0");
  Eigen::FullPivLU<Matrix> lu(model.c[0]);
  if (!lu.isInvertible()) throw NumericalError("c_0 is singular");
  const Matrix c0_inv = lu.inverse();
  std::vector<Matrix> k;
  k.reserve(static_cast<std::size_t>(horizon + 1));
  for (int j = 0; j <= horizon; ++j) {
    Matrix acc = model.d.at(j);
    for (int i = 1; i <= std::min(j, model.p()); ++i) acc.noalias() -= k[static_cast<std::size_t>(j - i)] * model.c[i];
    k.push_back(acc * c0_inv);
  }
  return PolyMatrix(std::move(k));
}

PolyMatrix irf_statespace(const StateSpaceModel& ss, int horizon) {
  ss.validate();
  if (horizon < 0) throw ValidationError("horizon must be >= 0");
  std::vector<Matrix> k;
  Matrix ab = ss.B;
  for (int j = 0; j <= horizon; ++j) {
    k.push_back(ss.C * ab);
    ab = ss.A * ab;
  }
  return PolyMatrix(std::move(k));
}

bool is_minimal(const StateSpaceModel& ss, std::optional<double> rank_tol) {
  ss.validate();
  const int m = ss.state_dim();
  const int n = ss.n();
  const int q = ss.q();
  Matrix obs(static_cast<Eigen::Index>(m) * n, m);
  Matrix ctrl(m, static_cast<Eigen::Index>(m) * q);
  Matrix ca = ss.C;
  Matrix ab = ss.B;
  for (int i = 0; i < m; ++i) {
    obs.middleRows(static_cast<Eigen::Index>(i) * n, n) = ca;
    ctrl.middleCols(static_cast<Eigen::Index>(i) * q, q) = ab;
    ca = ca * ss.A;
    ab = ss.A * ab;
  }
  return linalg::numerical_rank(obs, rank_tol) == m && linalg::numerical_rank(ctrl, rank_tol) == m;
}

RmfdModel apply_unimodular(const RmfdModel& model, const PolyMatrix& m) {
  model.validate();
  if (m.rows() != model.q() || m.cols() != model.q()) throw DimensionError("m(z) must be q x q");
  if (!Eigen::FullPivLU<Matrix>(m[0]).isInvertible()) throw NumericalError("m(0) is singular");
  return RmfdModel{model.c * m, model.d * m, model.gamma};
}

RealizationResult echelon_realize(const PolyMatrix& k, std::optional<double> rank_tol) {
  const int n = k.rows();
  const int q = k.cols();
  const int big_n = k.degree();
  if (n < q) throw DimensionError("realization requires a tall IRF (n >= q)");
  if (big_n < 1) throw ValidationError("realization needs at least k_0 and k_1");

  const Matrix top = k[0].topRows(q);
  Eigen::JacobiSVD<Matrix> top_svd(top);
  const Vector& tsv = top_svd.singularValues();
  if (tsv(0) == 0.0 || tsv(q - 1) < 1e-12 * tsv(0))
    throw NumericalError("first q rows of k_0 are linearly dependent");
  const Matrix top_inv = top.inverse();
  std::vector<Matrix> kn;
  for (int j = 0; j <= big_n; ++j) kn.push_back(k[j] * top_inv);

  const int nblock_cols = (big_n + 1) / 2;
  const int nblock_rows = big_n - nblock_cols + 1;
  Matrix hankel(static_cast<Eigen::Index>(nblock_rows) * n, static_cast<Eigen::Index>(nblock_cols) * q);
  for (int i = 0; i < nblock_rows; ++i)
    for (int j = 0; j < nblock_cols; ++j)
      hankel.block(static_cast<Eigen::Index>(i) * n, static_cast<Eigen::Index>(j) * q, n, q) =
          kn[static_cast<std::size_t>(i + j + 1)];

  Eigen::JacobiSVD<Matrix> svd(hankel);
  const Vector& sv = svd.singularValues();
  const double rel_tol = rank_tol.value_or(linalg::default_rank_tol(hankel));
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  const double abs_tol = rel_tol * sigma_max;
  int rank = 0;
  if (sigma_max > 0.0)
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > abs_tol) ++rank;
  double gap = std::numeric_limits<double>::infinity();
  if (rank > 0 && rank < sv.size() && sv(rank) > 0.0) gap = sv(rank - 1) / sv(rank);

  // First basis of the column space, scanned block by block, left to right.
  std::vector<int> gamma(static_cast<std::size_t>(q), -1);
  Matrix basis(hankel.rows(), 0);
  struct Col { int block; int var; };
  std::vector<Col> basis_cols;
  for (int b = 0; b < nblock_cols; ++b) {
    for (int v = 0; v < q; ++v) {
      if (gamma[static_cast<std::size_t>(v)] >= 0) continue;
      Vector col = hankel.col(static_cast<Eigen::Index>(b) * q + v);
      Vector resid = col;
      for (int pass = 0; pass < 2 && basis.cols() > 0; ++pass) resid -= basis * (basis.transpose() * resid);
      const double norm = resid.norm();
      if (sigma_max > 0.0 && norm > abs_tol) {
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = resid / norm;
        basis_cols.push_back({b, v});
      } else {
        gamma[static_cast<std::size_t>(v)] = b;
      }
    }
  }
  for (int v = 0; v < q; ++v)
    if (gamma[static_cast<std::size_t>(v)] < 0)
      throw NumericalError("Hankel truncation too short to determine all Kronecker indices");
  if (static_cast<int>(basis_cols.size()) != rank) {
    std::ostringstream os;
    os << "Hankel basis selection is ambiguous: greedy basis has " << basis_cols.size()
       << " columns but the singular-value rank is " << rank;
    throw NumericalError(os.str());
  }

  KroneckerIndices gi(gamma);
  const int kappa = gi.kappa();
  std::vector<Matrix> ct(static_cast<std::size_t>(kappa + 1), Matrix::Zero(q, q));
  for (int j = 0; j < q; ++j) {
    const int gj = gamma[static_cast<std::size_t>(j)];
    std::vector<Col> regs;
    for (const auto& bc : basis_cols)
      if (bc.block < gj || (bc.block == gj && bc.var < j)) regs.push_back(bc);
    ct[static_cast<std::size_t>(gj)](j, j) = 1.0;
    if (regs.empty()) continue;
    Matrix x(hankel.rows(), static_cast<Eigen::Index>(regs.size()));
    for (std::size_t r = 0; r < regs.size(); ++r)
      x.col(static_cast<Eigen::Index>(r)) = hankel.col(static_cast<Eigen::Index>(regs[r].block) * q + regs[r].var);
    const Vector target = -hankel.col(static_cast<Eigen::Index>(gj) * q + j);
    const Vector coef = x.colPivHouseholderQr().solve(target);
    for (std::size_t r = 0; r < regs.size(); ++r)
      ct[static_cast<std::size_t>(regs[r].block)](regs[r].var, j) = coef(static_cast<Eigen::Index>(r));
  }

  // d~_i = sum_{u > i} k_{u-i} c~_u: non-negative powers of k~(z) c~(z).
  std::vector<Matrix> dt(static_cast<std::size_t>(std::max(kappa, 1)), Matrix::Zero(n, q));
  for (int i = 0; i < kappa; ++i)
    for (int u = i + 1; u <= kappa; ++u)
      dt[static_cast<std::size_t>(i)] += kn[static_cast<std::size_t>(u - i)] * ct[static_cast<std::size_t>(u)];

  std::vector<Matrix> c(static_cast<std::size_t>(kappa + 1), Matrix::Zero(q, q));
  std::vector<Matrix> d(static_cast<std::size_t>(kappa + 1), Matrix::Zero(n, q));
  for (int j = 0; j < q; ++j) {
    const int gj = gamma[static_cast<std::size_t>(j)];
    for (int i = 0; i <= gj; ++i) {
      const int rev = gj - i;
      c[static_cast<std::size_t>(i)].col(j) = ct[static_cast<std::size_t>(rev)].col(j);
      Vector dcol = kn[0] * ct[static_cast<std::size_t>(rev)].col(j);
      if (rev < kappa) dcol += dt[static_cast<std::size_t>(rev)].col(j);
      d[static_cast<std::size_t>(i)].col(j) = dcol;
    }
  }

  RealizationResult out{RmfdModel{PolyMatrix(std::move(c)), PolyMatrix(std::move(d)), gi}, top, rank, gap};
  return out;
}

RmfdModel model_from_pattern_values(const EchelonPattern& pat, const std::vector<double>& values) {
  if (static_cast<int>(values.size()) != pat.free_count())
    throw DimensionError("model_from_pattern_values: wrong number of values");
  std::size_t next = 0;
  std::vector<Matrix> c;
  for (int i = 0; i <= pat.p; ++i) {
    Matrix ci = pat.c_fixed[static_cast<std::size_t>(i)];
    for (int l = 0; l < pat.q; ++l)
      for (int k = 0; k < pat.q; ++k)
        if (pat.c_free[static_cast<std::size_t>(i)](k, l)) ci(k, l) = values[next++];
    c.push_back(ci);
  }
  std::vector<Matrix> d;
  for (int j = 0; j <= pat.s; ++j) {
    Matrix dj = pat.d_fixed[static_cast<std::size_t>(j)];
    for (int l = 0; l < pat.q; ++l)
      for (int k = 0; k < pat.n; ++k) {
        if (!pat.d_free[static_cast<std::size_t>(j)](k, l)) continue;
        if (j == 0 && k < pat.q) dj(k, l) = c[0](k, l);  // cross-linked
        else dj(k, l) = values[next++];
      }
    d.push_back(dj);
  }
  return RmfdModel{PolyMatrix(std::move(c)), PolyMatrix(std::move(d)), pat.gamma};
}

double var_spectral_radius(const RmfdModel& model) {
  const int q = model.q();
  const int p = model.p();
  if (p == 0) return 0.0;
  const Matrix c0_inv = model.c[0].inverse();
  Matrix comp = Matrix::Zero(p * q, p * q);
  for (int i = 1; i <= p; ++i) comp.block(0, (i - 1) * q, q, q) = -model.c[i] * c0_inv;
  for (int b = 1; b < p; ++b) comp.block(b * q, (b - 1) * q, q, q).setIdentity();
  return linalg::spectral_radius(comp);
}

double stabilize(RmfdModel& model, double max_radius) {
  const double rho = var_spectral_radius(model);
  if (rho <= max_radius) return 1.0;
  const double factor = max_radius / rho;
  double scale = 1.0;
  for (int i = 1; i <= model.p(); ++i) {
    scale *= factor;
    model.c.coeff(i) *= scale;
  }
  return factor;
}

}  // namespace rmfd
