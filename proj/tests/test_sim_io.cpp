#include "oracles.hpp"

#include "rmfd/io.hpp"
#include "rmfd/sim.hpp"

#include <doctest.h>

using namespace rmfd;

namespace {

DgpSpec spec_for(std::uint64_t seed, int T = 300) {
  auto rng = stream_rng(seed, 1);
  DgpSpec s;
  s.model = random_canonical_model(echelon_pattern(KroneckerIndices({1, 2}), 5), rng, 0.5, 0.8);
  s.sigma_eps = oracle::random_spd(2, rng);
  s.sigma_xi = 0.4;
  s.T = T;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("simulation is reproducible and seed dependent") {
  const auto a = simulate(spec_for(1));
  const auto b = simulate(spec_for(1));
  DgpSpec other = spec_for(1);
  other.seed = 2;
  const auto c = simulate(other);
  CHECK(a.panel.values == b.panel.values);
  CHECK(a.panel.values != c.panel.values);
  CHECK(a.panel.T() == 300);
  CHECK(a.panel.n() == 5);
  CHECK(a.factors.cols() == 2);
  for (int code : a.panel.tcodes) CHECK(code == 1);
}

TEST_CASE("simulated paths satisfy the model equations") {
  const DgpSpec s = spec_for(3, 50);
  const auto r = simulate(s);
  for (int t = 3; t < 50; ++t) {
    Vector lhs = Vector::Zero(2);
    for (int i = 0; i <= s.model.p(); ++i) lhs += s.model.c[i] * r.factors.row(t - i).transpose();
    CHECK((lhs - r.shocks.row(t).transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Vector y = Vector::Zero(5);
    for (int j = 0; j <= s.model.s(); ++j) y += s.model.d[j] * r.factors.row(t - j).transpose();
    CHECK((y - r.common.row(t).transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("sample covariance approaches the population value") {
  DgpSpec s = spec_for(4, 60000);
  const auto r = simulate(s);
  const Matrix X = r.panel.values;
  const Matrix cov = X.transpose() * X / X.rows();
  const Matrix pop = common_covariance(s.model, s.sigma_eps) + s.sigma_xi * Matrix::Identity(5, 5);
  CHECK(((cov - pop).cwiseAbs().maxCoeff() / pop.cwiseAbs().maxCoeff()) < 0.05);
  const double sx = sigma_xi_for_snr(s.model, s.sigma_eps, 4.0);
  CHECK(common_covariance(s.model, s.sigma_eps).diagonal().mean() / sx == doctest::Approx(4.0));
}

TEST_CASE("equalized common variances keep the structure and the scaled IRF") {
  DgpSpec s = spec_for(8);
  RmfdModel m = s.model;
  Matrix sig = s.sigma_eps;
  equalize_common_variance(m, sig);
  const auto pat = echelon_pattern(KroneckerIndices({1, 2}), 5);
  CHECK(m.pattern_violation(pat) < 1e-12);
  CHECK((common_covariance(m, sig).diagonal() - Vector::Ones(5)).cwiseAbs().maxCoeff() < 1e-10);
  const Vector sd = common_covariance(s.model, s.sigma_eps).diagonal().cwiseSqrt();
  const PolyMatrix a = irf_rmfd(m, 10) * linalg::cholesky_lower(sig);
  const PolyMatrix b = irf_rmfd(s.model, 10) * linalg::cholesky_lower(s.sigma_eps);
  for (int h = 0; h <= 10; ++h) CHECK((a[h] - sd.cwiseInverse().asDiagonal() * b[h]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("unstable or malformed specs are rejected") {
  DgpSpec s = spec_for(5);
  s.model.c.coeff(1) *= 50.0;
  CHECK_THROWS_AS(simulate(s), ValidationError);
  DgpSpec t = spec_for(5);
  t.sigma_eps = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(simulate(t), DimensionError);
}

TEST_CASE("simulated panels round-trip through the CSV format") {
  const auto r = simulate(spec_for(6, 40));
  const Panel back = parse_fredmd(format_fredmd(r.panel));
  CHECK(back.dates == r.panel.dates);
  CHECK((back.values - r.panel.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("model JSON round trip") {
  const DgpSpec s = spec_for(7);
  const Json j = model_to_json(s.model);
  CHECK(j["gamma"] == Json::array({1, 2}));
  CHECK(j["c_coeffs"].size() == 3);
  CHECK(j["d_coeffs"][0].size() == 10);
  // row-major flattening
  CHECK(j["d_coeffs"][1][1].get<double>() == s.model.d[1](0, 1));
  const RmfdModel back = model_from_json(j);
  CHECK(back.c.max_abs_diff(s.model.c) == 0.0);
  CHECK(back.d.max_abs_diff(s.model.d) == 0.0);
  Json broken = j;
  broken["c_coeffs"][0][1] = 0.3;  // fixed zero in c_0
  CHECK_THROWS_AS(model_from_json(broken), ValidationError);
  broken = j;
  broken.erase("gamma");
  CHECK_THROWS_AS(model_from_json(broken), ValidationError);
}

TEST_CASE("IRF tables and manifests") {
  IrfTable t;
  t.label = "rmfd";
  t.variables = {"A", "B"};
  t.units = {"level", "log level"};
  t.point = Matrix::Ones(2, 3);
  const std::string csv = irf_csv({t});
  CHECK(csv.rfind("model,variable,horizon,point,lower,upper,units\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(csv.find("rmfd,B,2,1,,,log level") != std::string::npos);
  t.lower = Matrix::Zero(2, 3);
  t.upper = 2 * Matrix::Ones(2, 3);
  const Json js = irf_json({t});
  CHECK(js.size() == 6);
  CHECK(js[5]["upper"] == 2.0);
  Json cfg{{"a", 1}, {"b", "x"}};
  CHECK(config_hash(cfg) == config_hash(Json{{"a", 1}, {"b", "x"}}));
  CHECK(config_hash(cfg) != config_hash(Json{{"a", 2}, {"b", "x"}}));
  const Json man = manifest_json({"irf", cfg, {{"init", 3}}, {"irf.csv"}});
  CHECK(man["config_hash"] == config_hash(cfg));
  CHECK(man["seeds"]["init"] == 3);
  CHECK(units_for_tcode(5) == "log level");
}
