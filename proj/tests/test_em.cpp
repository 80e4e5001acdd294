#include "oracles.hpp"

#include "rmfd/em.hpp"
#include "rmfd/sim.hpp"

#include <doctest.h>

using namespace rmfd;

namespace {

Matrix solve_with(const RestrictionTemplate& t, const Matrix& M, const Matrix& P, const Matrix& W) {
  return t.reconstruct(constrained_gls(t, M, P, W));
}

struct SmallDgp {
  KroneckerIndices gamma{std::vector<int>{1, 1}};
  RmfdModel truth;
  Matrix X;
  StateSpaceModel init;
};

SmallDgp small_dgp(std::uint64_t seed, int n = 8, int T = 300) {
  SmallDgp d;
  auto rng = stream_rng(seed, 3);
  const auto pat = echelon_pattern(d.gamma, n, 0, 1);
  d.truth = random_canonical_model(pat, rng, 0.6, 0.8);
  DgpSpec spec{d.truth, Matrix::Identity(2, 2), 0.3, T, 200, seed};
  d.X = simulate(spec).panel.values;
  const RmfdModel start = random_canonical_model(pat, rng, 0.3, 0.5);
  d.init = assemble_statespace(start, Matrix::Identity(2, 2), 1.0);
  return d;
}

}  // namespace

TEST_CASE("constrained GLS equals the KKT solution") {
  auto rng = stream_rng(31, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const KroneckerIndices g(rep % 2 ? std::vector<int>{1, 2} : std::vector<int>{1, 1, 2});
    const auto t = build_templates(g, 6, g.q());
    const int dim = t.state_dim();
    {
      const Matrix M = oracle::random_spd(dim, rng);
      const Matrix P = oracle::random_matrix(dim, 6, rng);
      const Matrix W = Matrix::Identity(6, 6) / 0.7;
      const Matrix got = solve_with(t.template_C, M, P, W);
      const Matrix ref = oracle::constrained_ls_kkt(t.template_C, M, P, W);
      CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-8);
      const Matrix Wd = oracle::random_spd(6, rng);
      CHECK((solve_with(t.template_C, M, P, Wd) - oracle::constrained_ls_kkt(t.template_C, M, P, Wd))
                .cwiseAbs()
                .maxCoeff() < 1e-8);
    }
    {
      const Matrix M = oracle::random_spd(dim, rng);
      const Matrix P = oracle::random_matrix(dim, dim, rng);
      Matrix W = Matrix::Zero(dim, dim);
      W.topLeftCorner(g.q(), g.q()) = oracle::random_spd(g.q(), rng).inverse();
      const Matrix got = solve_with(t.template_A, M, P, W);
      const Matrix ref = oracle::constrained_ls_kkt(t.template_A, M, P, W);
      CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("singular GLS names the unidentified parameters") {
  const auto t = build_templates(KroneckerIndices({1, 1}), 4, 2);
  Matrix M = Matrix::Identity(t.state_dim(), t.state_dim());
  M(2, 2) = 0.0;
  const Matrix P = Matrix::Ones(t.state_dim(), 4);
  try {
    constrained_gls(t.template_C, M, P, Matrix::Identity(4, 4));
    FAIL("expected a NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("unidentified parameters") != std::string::npos);
  }
}

TEST_CASE("EM likelihood path does not decrease") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto d = small_dgp(seed);
    EmOptions o;
    o.max_iter = 60;
    o.tol = 1e-9;
    const EmResult r = em_estimate(d.X, d.gamma, 0, 1, d.init, o);
    for (std::size_t j = 1; j < r.trace.loglik.size(); ++j)
      CHECK(r.trace.loglik[j] >= r.trace.loglik[j - 1] - 1e-8 * std::abs(r.trace.loglik[j - 1]));
    CHECK(r.trace.loglik.front() < r.trace.loglik.back());
    const auto t = build_templates(d.gamma, 8, 2, 0, 1);
    CHECK(t.template_C.fixed_violation(r.ss.C) < 1e-12);
    CHECK(t.template_A.fixed_violation(r.ss.A) < 1e-12);
    CHECK(r.ss.sigma_xi > 0.0);
  }
}

TEST_CASE("one iteration is a single E and M pass") {
  auto d = small_dgp(4);
  EmOptions o;
  o.max_iter = 1;
  const EmResult r = em_estimate(d.X, d.gamma, 0, 1, d.init, o);
  CHECK(r.iterations == 1);
  CHECK(r.trace.loglik.size() == 2);
  CHECK_FALSE(r.converged);
  CHECK(r.loglik == doctest::Approx(r.trace.loglik.back()));
}

TEST_CASE("EM converges near the truth in a benign case") {
  auto d = small_dgp(5, 10, 1500);
  EmOptions o;
  o.max_iter = 500;
  o.tol = 1e-7;
  const EmResult r = em_estimate(d.X, d.gamma, 0, 1, d.init, o);
  CHECK(r.converged);
  const PolyMatrix est = irf_rmfd(r.model, 8) * linalg::cholesky_lower(r.ss.sigma_eps);
  const PolyMatrix tru = irf_rmfd(d.truth, 8);
  CHECK(est.max_abs_diff(tru) < 0.25);
  CHECK(r.ss.sigma_xi == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("EM input validation") {
  auto d = small_dgp(6);
  Matrix bad = d.X;
  bad(3, 3) = std::nan("");
  CHECK_THROWS_AS(em_estimate(bad, d.gamma, 0, 1, d.init), ValidationError);
  CHECK_THROWS_AS(em_estimate(d.X, KroneckerIndices({2, 1}), std::nullopt, std::nullopt, d.init), ValidationError);
  StateSpaceModel wrong = d.init;
  wrong.C(0, 1) = 0.5;  // fixed top block of d_0
  CHECK_THROWS_AS(em_estimate(d.X, d.gamma, 0, 1, wrong), ValidationError);
  CHECK_THROWS_AS(em_estimate(d.X, d.gamma, 1, 1, d.init), DimensionError);
  EmOptions o;
  o.max_iter = 0;
  CHECK_THROWS_AS(em_estimate(d.X, d.gamma, 0, 1, d.init, o), ValidationError);
}
