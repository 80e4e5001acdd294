#include "rmfd/modelsel.hpp"

#include "rmfd/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace rmfd {

std::string CandidateSpec::to_string() const {
  std::ostringstream os;
  os << gamma.to_string() << " p=" << p << " s=" << s;
  return os.str();
}

int kappa_hat(int r, int q, bool s_ge_p) {
  if (q < 1 || r < q) throw ValidationError("kappa_hat requires r >= q >= 1");
  const int k = r / q - (s_ge_p ? 1 : 0);
  if (k < 1) throw ValidationError("kappa_hat is below 1 for r=" + std::to_string(r) + ", q=" + std::to_string(q));
  return k;
}

std::pair<int, int> default_orders(int kappa) {
  if (kappa < 1) throw ValidationError("kappa must be >= 1");
  return kappa == 1 ? std::pair{1, 1} : std::pair{kappa, 1};
}

namespace {

void weakly_increasing(int q, int kappa, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == q) {
    if (cur.back() == kappa) out.push_back(cur);
    return;
  }
  const int lo = cur.empty() ? 1 : cur.back();
  for (int v = lo; v <= kappa; ++v) {
    cur.push_back(v);
    weakly_increasing(q, kappa, cur, out);
    cur.pop_back();
  }
}

bool generically_minimal(const CandidateSpec& spec, int n, std::uint64_t seed) {
  const EchelonPattern pat = echelon_pattern(spec.gamma, n, spec.s, spec.p);
  std::uint64_t key = static_cast<std::uint64_t>(spec.p) * 31 + static_cast<std::uint64_t>(spec.s);
  for (int v : spec.gamma.values()) key = key * 131 + static_cast<std::uint64_t>(v);
  auto rng = stream_rng(seed, key);
  const RmfdModel m = random_canonical_model(pat, rng, 0.5, 0.9);
  int sum = 0;
  for (int v : spec.gamma.values()) sum += v;
  try {
    const RealizationResult rr = echelon_realize(irf_rmfd(m, 2 * (spec.gamma.kappa() + 1) * spec.gamma.q() + 2), 1e-9);
    return rr.mcmillan_degree == sum && rr.model.gamma == spec.gamma;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

std::vector<CandidateSpec> enumerate_admissible(int q, int r, std::uint64_t seed) {
  if (q < 1 || r < q) throw ValidationError("enumerate_admissible requires r >= q >= 1");
  std::vector<int> kappas;
  for (bool s_ge_p : {false, true}) {
    const int k = r / q - (s_ge_p ? 1 : 0);
    if (k >= 1 && std::find(kappas.begin(), kappas.end(), k) == kappas.end()) kappas.push_back(k);
  }
  std::sort(kappas.begin(), kappas.end());
  std::vector<CandidateSpec> out;
  // Minimality is checked in a tall panel with one extra row per column.
  const int n_check = q + 1;
  for (int kappa : kappas) {
    const auto [p, s] = default_orders(kappa);
    std::vector<std::vector<int>> gammas;
    std::vector<int> cur;
    weakly_increasing(q, kappa, cur, gammas);
    for (auto& g : gammas) {
      CandidateSpec spec{KroneckerIndices(g), p, s};
      if (generically_minimal(spec, n_check, seed)) out.push_back(spec);
    }
  }
  if (out.empty()) throw ValidationError("no admissible model structure for q=" + std::to_string(q) +
                                         ", r=" + std::to_string(r));
  return out;
}

InfoCriteria info_criteria(double loglik_scaled, int k, int T) {
  if (T <= 1) throw ValidationError("info_criteria requires T > 1");
  if (k < 0) throw ValidationError("info_criteria requires k >= 0");
  const double lt = std::log(static_cast<double>(T));
  return {-2.0 * loglik_scaled + 2.0 * k / T, -2.0 * loglik_scaled + k * lt / T,
          -2.0 * loglik_scaled + 2.0 * k * std::log(lt) / T};
}

double criterion_value(const SelectionRow& row, Criterion c) {
  switch (c) {
    case Criterion::aic: return row.ic.aic;
    case Criterion::bic: return row.ic.bic;
    case Criterion::hqic: return row.ic.hqic;
  }
  return row.ic.bic;
}

void rank_rows(std::vector<SelectionRow>& rows, Criterion c) {
  std::stable_sort(rows.begin(), rows.end(), [c](const SelectionRow& a, const SelectionRow& b) {
    if (a.failed != b.failed) return !a.failed;
    if (a.failed) return a.spec.gamma < b.spec.gamma;
    const double va = criterion_value(a, c);
    const double vb = criterion_value(b, c);
    if (va != vb) return va < vb;
    if (a.n_params != b.n_params) return a.n_params < b.n_params;
    return a.spec.gamma < b.spec.gamma;
  });
}

std::vector<SelectionRow> select_model(const Matrix& X, const std::vector<CandidateSpec>& candidates,
                                       const SelectOptions& opts) {
  std::vector<SelectionRow> rows(candidates.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      SelectionRow& row = rows[i];
      row.spec = candidates[i];
      row.n_params = count_free_params(row.spec.gamma, static_cast<int>(X.cols()), row.spec.gamma.q(), row.spec.s,
                                       row.spec.p);
      try {
        const EchelonInitResult init = echelon_init(X, row.spec.gamma, row.spec.s, row.spec.p, opts.init);
        EmResult fit = em_estimate(X, row.spec.gamma, row.spec.s, row.spec.p, init.init.ss, opts.em);
        row.loglik_scaled = fit.loglik_scaled();
        row.ic = info_criteria(row.loglik_scaled, row.n_params, fit.T);
        row.converged = fit.converged;
        row.iterations = fit.iterations;
        if (opts.keep_fits) row.fit = std::move(fit);
      } catch (const Error& e) {
        row.failed = true;
        row.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(candidates.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  rank_rows(rows, opts.criterion);
  return rows;
}

std::vector<SelectionRow> select_model(const Matrix& X, int q, int r, const SelectOptions& opts) {
  return select_model(X, enumerate_admissible(q, r), opts);
}

std::string selection_csv(const std::vector<SelectionRow>& rows) {
  std::ostringstream os;
  os << "gamma,loglik,AIC,BIC,HQIC,n_params,p,s,converged\n";
  os << std::setprecision(10);
  for (const auto& row : rows) {
    os << '"' << row.spec.gamma.to_string() << "\",";
    if (row.failed) os << "NA,NA,NA,NA,";
    else os << row.loglik_scaled << ',' << row.ic.aic << ',' << row.ic.bic << ',' << row.ic.hqic << ',';
    os << row.n_params << ',' << row.spec.p << ',' << row.spec.s << ',' << (row.converged ? "true" : "false") << '\n';
  }
  return os.str();
}

}  // namespace rmfd
