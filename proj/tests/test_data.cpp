#include "oracles.hpp"

#include "rmfd/data.hpp"

#include <doctest.h>

#include <cmath>

using namespace rmfd;

namespace {

const char* kCsv =
    "sasdate,INDPRO,CPIAUCSL,FEDFUNDS,S&P 500\n"
    "Transform:,5,6,2,5\n"
    "1/1/1960,10,20,3.0,50\n"
    "2/1/1960,11,21,3.5,51\n"
    "3/1/1960,,22,3.2,53\n"
    "4/1/1960,12,23.5,NA,52\n"
    "5/1/1960,13,24,3.1,55\n"
    ",,,,\n";

}  // namespace

TEST_CASE("FRED-MD parsing") {
  const Panel p = parse_fredmd(kCsv);
  CHECK(p.n() == 4);
  CHECK(p.T() == 5);
  CHECK(p.mnemonics[3] == "S&P 500");
  CHECK(p.tcodes == std::vector<int>{5, 6, 2, 5});
  CHECK(p.dates[0] == YearMonth{1960, 1});
  CHECK(std::isnan(p.values(2, 0)));
  CHECK(std::isnan(p.values(3, 2)));
  CHECK(p.values(3, 1) == 23.5);
  const Panel q = parse_fredmd(format_fredmd(p));
  CHECK(q.mnemonics == p.mnemonics);
  CHECK(q.dates == p.dates);
  CHECK((q.missing() == p.missing()).all());
  CHECK_THROWS_AS(parse_fredmd("sasdate,A\n1/1/1960,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_fredmd("sasdate,A\nTransform:,9\n1/1/1960,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_fredmd("sasdate,A\nTransform:,1\n2/1/1960,1\n1/1/1960,1\n"), ValidationError);
}

TEST_CASE("dates") {
  CHECK(YearMonth::parse("12/1/2021") == YearMonth{2021, 12});
  CHECK(YearMonth::parse("1973-03-01") == YearMonth{1973, 3});
  CHECK(YearMonth::parse("2007-11") == YearMonth{2007, 11});
  CHECK(YearMonth{1973, 3}.to_string() == "1973-03");
  CHECK(YearMonth::from_ordinal(YearMonth{1999, 12}.ordinal() + 1) == YearMonth{2000, 1});
  CHECK(YearMonth{2007, 11}.ordinal() - YearMonth{1973, 3}.ordinal() + 1 == 417);
  CHECK_THROWS_AS(YearMonth::parse("13/1/2000"), ValidationError);
}

TEST_CASE("transform codes") {
  Vector x(5);
  x << 1.0, 2.0, 4.0, 7.0, 11.0;
  const Vector lx = x.array().log();
  auto at = [](const Vector& v, int t) { return v(t); };
  CHECK(transform_series(x, 1) == x);
  CHECK(at(transform_series(x, 2), 2) == doctest::Approx(2.0));
  CHECK(at(transform_series(x, 3), 4) == doctest::Approx(1.0));
  CHECK(at(transform_series(x, 4), 3) == doctest::Approx(std::log(7.0)));
  CHECK(at(transform_series(x, 5), 1) == doctest::Approx(lx(1) - lx(0)));
  CHECK(at(transform_series(x, 6), 2) == doctest::Approx(lx(2) - 2 * lx(1) + lx(0)));
  CHECK(at(transform_series(x, 7), 2) == doctest::Approx((4.0 / 2.0 - 1.0) - (2.0 / 1.0 - 1.0)));
  CHECK(std::isnan(transform_series(x, 3)(1)));
  Vector neg = x;
  neg(2) = -1.0;
  CHECK_THROWS_AS(transform_series(neg, 5), ValidationError);
  CHECK_NOTHROW(transform_series(neg, 7));
  CHECK(transform_order(1) == 0);
  CHECK(transform_order(5) == 1);
  CHECK(transform_order(7) == 2);
}

TEST_CASE("light scheme remapping") {
  CHECK(light_code(5, VariableClass::real) == 4);
  CHECK(light_code(2, VariableClass::real) == 1);
  CHECK(light_code(6, VariableClass::price) == 5);
  CHECK(light_code(2, VariableClass::nominal) == 2);
  const ClassMap cm = parse_class_map(R"({"_note": "x", "INDPRO": "real", "CPIAUCSL": "price"})");
  CHECK(cm.size() == 2);
  CHECK_THROWS_AS(parse_class_map(R"({"A": "imaginary"})"), ValidationError);
  const Panel p = parse_fredmd(kCsv);
  const Panel l = apply_transforms(p, TransformScheme::light, cm);
  CHECK(l.tcodes == std::vector<int>{4, 5, 2, 5});
  CHECK(l.T() == 4);
  const Panel h = apply_transforms(p, TransformScheme::heavy);
  CHECK(h.T() == 3);  // second differences drop two rows everywhere
  CHECK(h.dates.front() == YearMonth{1960, 3});
}

TEST_CASE("shipped class map parses") {
  const ClassMap cm = load_class_map(std::string(RMFD_SOURCE_DIR) + "/data/fredmd_classes.json");
  CHECK(cm.at("INDPRO") == VariableClass::real);
  CHECK(cm.at("CPIAUCSL") == VariableClass::price);
  CHECK(cm.at("FEDFUNDS") == VariableClass::nominal);
}

TEST_CASE("trimming, dropping and standardizing") {
  const Panel p = parse_fredmd(kCsv);
  const Panel t = trim_dates(p, {1960, 2}, {1960, 4});
  CHECK(t.T() == 3);
  CHECK(t.dates.back() == YearMonth{1960, 4});
  const Panel d = drop_columns(p, {"FEDFUNDS"});
  CHECK(d.n() == 3);
  CHECK_THROWS_AS(trim_dates(p, {1970, 1}, {1971, 1}), ValidationError);
  auto rng = stream_rng(81, 0);
  Panel s;
  s.values = oracle::random_matrix(50, 3, rng) * 4.0;
  s.values.array() += 2.0;
  s.mnemonics = {"a", "b", "c"};
  s.tcodes = {1, 1, 1};
  for (int i = 0; i < 50; ++i) s.dates.push_back(YearMonth::from_ordinal(24000 + i));
  const Panel z = standardize(s);
  CHECK(z.values.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  for (int j = 0; j < 3; ++j) CHECK(z.values.col(j).squaredNorm() / 49.0 == doctest::Approx(1.0));
  CHECK((destandardize(z) - s.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cleaning removes outliers and imputes from factors") {
  auto rng = stream_rng(82, 0);
  const Matrix F = oracle::random_matrix(200, 2, rng);
  const Matrix L = oracle::random_matrix(12, 2, rng);
  Panel p;
  p.values = F * L.transpose() + 0.01 * oracle::random_matrix(200, 12, rng);
  const Matrix truth = p.values;
  for (int j = 0; j < 12; ++j) p.mnemonics.push_back("v" + std::to_string(j));
  p.tcodes.assign(12, 1);
  for (int i = 0; i < 200; ++i) p.dates.push_back(YearMonth::from_ordinal(24000 + i));
  p.values(10, 3) = 1e3;  // outlier
  p.values(20, 4) = std::nan("");
  p.values(21, 5) = std::nan("");
  CleanOptions o;
  o.n_factors = 2;
  CleanReport rep;
  const Panel c = clean(p, o, &rep);
  CHECK(rep.outliers == 1);
  CHECK(rep.missing_before == 2);
  CHECK(rep.imputed == 3);
  CHECK_FALSE(c.missing().any());
  CHECK(std::abs(c.values(10, 3) - truth(10, 3)) < 0.1);
  CHECK(std::abs(c.values(20, 4) - truth(20, 4)) < 0.1);
  Panel sparse = p;
  for (int t = 0; t < 120; ++t) sparse.values(t, 7) = std::nan("");
  CHECK_THROWS_AS(clean(sparse, o), ValidationError);
}

TEST_CASE("autocorrelation summary") {
  auto rng = stream_rng(83, 0);
  const int T = 4000;
  Vector ar(T);
  std::normal_distribution<double> nd(0, 1);
  ar(0) = 0;
  for (int t = 1; t < T; ++t) ar(t) = 0.7 * ar(t - 1) + nd(rng);
  CHECK(autocorrelation(ar, 1) == doctest::Approx(0.7).epsilon(0.05));
  CHECK(autocorrelation(ar, 2) == doctest::Approx(0.49).epsilon(0.08));
  // lag-k oracle: sample autocovariance ratio with full-sample means
  const double m = ar.mean();
  double num = 0.0;
  for (int t = 3; t < T; ++t) num += (ar(t) - m) * (ar(t - 3) - m);
  CHECK(autocorrelation(ar, 3) == doctest::Approx(num / (ar.array() - m).square().sum()));

  Panel p;
  p.values.resize(T, 2);
  p.values.col(0) = ar;
  p.values.col(1) = -ar;
  for (int t = 1; t < T; t += 2) p.values(t, 1) *= -1.0;  // alternating sign
  p.mnemonics = {"a", "b"};
  p.tcodes = {1, 1};
  for (int i = 0; i < T; ++i) p.dates.push_back(YearMonth::from_ordinal(20000 + i));
  const Matrix tab = autocorr_table(p, 3, {0, 100});
  CHECK(tab.rows() == 3);
  CHECK(tab.cols() == 2);
  CHECK((tab.array() >= 0.0).all());
  CHECK(tab(0, 1) == doctest::Approx(std::abs(autocorrelation(ar, 1))).epsilon(0.05));
}

TEST_CASE("pipeline window") {
  Panel raw;
  const int T = 600;
  auto rng = stream_rng(84, 0);
  raw.values = oracle::random_matrix(T, 4, rng).cwiseAbs();
  raw.values.array() += 1.0;
  raw.mnemonics = {"A", "B", "ACOGNO", "UMCSENTx"};
  raw.tcodes = {5, 6, 1, 2};
  for (int i = 0; i < T; ++i) raw.dates.push_back(YearMonth::from_ordinal(YearMonth{1959, 1}.ordinal() + i));
  const Panel p = process_panel(raw, PanelPipeline{});
  CHECK(p.n() == 2);
  CHECK(p.dates.front() == YearMonth{1973, 3});
  CHECK(p.dates.back() == YearMonth{2007, 11});
  CHECK(p.T() == 417);
  CHECK_FALSE(p.missing().any());
}
