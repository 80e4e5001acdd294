#include "oracles.hpp"

#include "rmfd/sim.hpp"
#include "rmfd/structural.hpp"

#include <doctest.h>

#include <set>

using namespace rmfd;

TEST_CASE("Cholesky identification") {
  auto rng = stream_rng(61, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix S = oracle::random_spd(4, rng, 0.1);
    const Matrix H = cholesky_identify(S);
    CHECK((H * H.transpose() - S).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 4; ++i) {
      CHECK(H(i, i) > 0.0);
      for (int j = i + 1; j < 4; ++j) CHECK(H(i, j) == 0.0);
    }
  }
}

TEST_CASE("impact responses are recursive in the top block") {
  auto rng = stream_rng(62, 0);
  const RmfdModel m = random_canonical_model(echelon_pattern(KroneckerIndices({1, 1, 2}), 6), rng);
  const Matrix H = cholesky_identify(oracle::random_spd(3, rng));
  const Matrix k0H = irf_rmfd(m, 0)[0] * H;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) CHECK(k0H(i, j) == 0.0);
  for (int shock = 0; shock < 3; ++shock) {
    const auto irf = structural_irf(m, H, shock, 10);
    for (int i = 0; i < shock; ++i) CHECK(irf.responses(i, 0) == 0.0);
    CHECK(irf.responses.cols() == 11);
  }
}

TEST_CASE("normalization") {
  auto rng = stream_rng(63, 0);
  const RmfdModel m = random_canonical_model(echelon_pattern(KroneckerIndices({1, 1}), 4), rng);
  const Matrix H = cholesky_identify(oracle::random_spd(2, rng));
  const IrfNormalization norm{1, 0.5};
  const auto once = structural_irf(m, H, 1, 12, norm);
  CHECK(once.responses(1, 0) == doctest::Approx(0.5));
  const auto twice = normalize_irf(once, norm);
  CHECK((twice.responses - once.responses).cwiseAbs().maxCoeff() < 1e-14);
  StructuralIrf zero = once;
  zero.responses.setZero();
  CHECK_THROWS_AS(normalize_irf(zero, norm), NumericalError);
}

TEST_CASE("finalize_irf scales and cumulates by transform code") {
  StructuralIrf irf;
  irf.responses = Matrix::Ones(4, 4);
  Vector sds(4);
  sds << 2, 1, 1, 3;
  const auto out = finalize_irf(irf, sds, {1, 2, 6, 5});
  CHECK(out.responses.row(0).isApprox(Matrix::Constant(1, 4, 2.0)));
  Matrix once(1, 4), twice(1, 4);
  once << 1, 2, 3, 4;
  twice << 1, 3, 6, 10;
  CHECK(out.responses.row(1).isApprox(once));
  CHECK(out.responses.row(2).isApprox(twice));
  CHECK(out.responses.row(3).isApprox(3.0 * once));
  CHECK_THROWS_AS(finalize_irf(irf, sds, {1, 2, 8, 1}), ValidationError);
  CHECK_THROWS_AS(finalize_irf(irf, sds, {1, 2}), DimensionError);
}

TEST_CASE("finalize_irf commutes with scaling") {
  auto rng = stream_rng(64, 0);
  StructuralIrf irf;
  irf.responses = oracle::random_matrix(5, 9, rng);
  const Vector sds = oracle::random_matrix(5, 1, rng).cwiseAbs();
  const std::vector<int> tc{1, 2, 3, 5, 7};
  StructuralIrf scaled = irf;
  scaled.responses *= -2.5;
  CHECK((finalize_irf(scaled, sds, tc).responses + 2.5 * finalize_irf(irf, sds, tc).responses).cwiseAbs().maxCoeff() <
        1e-12);
  irf.normalization = IrfNormalization{2, 1.0};
  const auto f = finalize_irf(irf, sds, tc);
  CHECK(f.responses(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("bootstrap indices are whole blocks trimmed to T") {
  auto rng = stream_rng(65, 0);
  const int T = 107, L = 10;
  const auto idx = bootstrap_indices(T, L, rng);
  REQUIRE(idx.size() == static_cast<std::size_t>(T));
  for (std::size_t t = 0; t < idx.size(); ++t) {
    CHECK(idx[t] < (T / L) * L);
    if (t % L) CHECK(idx[t] == idx[t - 1] + 1);
    else CHECK(idx[t] % L == 0);
  }
  CHECK_THROWS_AS(bootstrap_indices(15, 10, rng), ValidationError);
}

TEST_CASE("bootstrap bands are reproducible and thread-count independent") {
  const KroneckerIndices g({1, 1});
  auto rng = stream_rng(66, 0);
  const int n = 6;
  const RmfdModel truth = random_canonical_model(echelon_pattern(g, n, 0, 1), rng, 0.6, 0.8);
  DgpSpec spec{truth, Matrix::Identity(2, 2), 0.3, 200, 200, 66};
  Panel panel = simulate(spec).panel;
  panel.tcodes = {1, 2, 5, 1, 1, 4};
  const CandidateSpec cs{g, 1, 0};
  StructuralOptions so;
  so.shock = 1;
  so.normalize = IrfNormalization{1, 0.5};
  so.horizon = 12;
  so.em.max_iter = 30;
  so.init.S = 2;
  const StructuralFit point = estimate_structural(panel, cs, so);
  CHECK(point.irf.responses(1, 0) == doctest::Approx(0.5));
  CHECK(point.irf.responses(0, 0) == 0.0);
  BootstrapOptions bo;
  bo.draws = 6;
  bo.block_len = 40;
  bo.seed = 9;
  bo.jobs = 1;
  const auto a = block_bootstrap(panel, cs, so, bo, point);
  bo.jobs = 3;
  const auto b = block_bootstrap(panel, cs, so, bo, point);
  CHECK(a.draws + a.failures == 6);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK((a.lower.array() <= a.upper.array()).all());
  bo.level = 1.5;
  CHECK_THROWS_AS(block_bootstrap(panel, cs, so, bo, point), ValidationError);
}
