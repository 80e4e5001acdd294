#include "rmfd/data.hpp"

#include "rmfd/linalg.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rmfd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    else if (ch == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else cur.push_back(ch);
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") return false;
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError("malformed numeric cell '" + s + "'");
  }
  if (used != s.size()) throw ValidationError("malformed numeric cell '" + s + "'");
  return true;
}

void check_tcode(int c) {
  if (c < 1 || c > 7) throw ValidationError("unknown transform code " + std::to_string(c));
}

double median_of(std::vector<double> v) { return linalg::percentile(std::move(v), 50.0); }

}  // namespace

std::string YearMonth::to_string() const {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << year << '-' << std::setw(2) << month;
  return os.str();
}

YearMonth YearMonth::parse(const std::string& raw) {
  const std::string s = trim(raw);
  int y = 0, m = 0, d = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (s.find('/') != std::string::npos) {
    if (!(is >> m >> c1 >> d >> c2 >> y) || c1 != '/' || c2 != '/') throw ValidationError("malformed date '" + s + "'");
  } else {
    if (!(is >> y >> c1 >> m) || c1 != '-') throw ValidationError("malformed date '" + s + "'");
  }
  if (m < 1 || m > 12) throw ValidationError("malformed date '" + s + "'");
  return {y, m};
}

int Panel::column(const std::string& mnemonic) const {
  const auto it = std::find(mnemonics.begin(), mnemonics.end(), mnemonic);
  if (it == mnemonics.end()) throw ValidationError("variable '" + mnemonic + "' not in panel");
  return static_cast<int>(it - mnemonics.begin());
}

void Panel::validate() const {
  if (static_cast<int>(mnemonics.size()) != n() || static_cast<int>(tcodes.size()) != n())
    throw DimensionError("panel metadata length differs from the column count");
  if (static_cast<int>(dates.size()) != T()) throw DimensionError("panel date count differs from the row count");
  for (int c : tcodes) check_tcode(c);
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (dates[i].ordinal() != dates[i - 1].ordinal() + 1)
      throw ValidationError("dates are not consecutive months at " + dates[i].to_string());
}

Panel parse_fredmd(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_csv(line));
  }
  if (rows.size() < 2) throw ValidationError("FRED-MD file needs a header and a transform row");
  const auto& header = rows[0];
  if (header.size() < 2) throw ValidationError("malformed header: no variables");
  const std::size_t n = header.size() - 1;
  Panel p;
  p.mnemonics.assign(header.begin() + 1, header.end());
  const auto& codes = rows[1];
  std::string tag = codes.empty() ? "" : codes[0];
  std::transform(tag.begin(), tag.end(), tag.begin(), ::tolower);
  if (tag.rfind("transform", 0) != 0) throw ValidationError("second row must hold transform codes");
  if (codes.size() < n + 1) throw ValidationError("transform row is shorter than the header");
  for (std::size_t j = 0; j < n; ++j) {
    double v = 0.0;
    if (!parse_number(codes[j + 1], v) || v != std::floor(v)) throw ValidationError("malformed transform code");
    check_tcode(static_cast<int>(v));
    p.tcodes.push_back(static_cast<int>(v));
  }
  std::vector<std::vector<double>> vals;
  for (std::size_t r = 2; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.empty() || row[0].empty()) continue;
    p.dates.push_back(YearMonth::parse(row[0]));
    std::vector<double> v(n, kNaN);
    for (std::size_t j = 0; j < n && j + 1 < row.size(); ++j) {
      double x = 0.0;
      if (parse_number(row[j + 1], x)) v[j] = x;
    }
    vals.push_back(std::move(v));
  }
  p.values = Matrix::Constant(static_cast<Eigen::Index>(vals.size()), static_cast<Eigen::Index>(n), kNaN);
  for (std::size_t t = 0; t < vals.size(); ++t)
    for (std::size_t j = 0; j < n; ++j) p.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = vals[t][j];
  for (std::size_t i = 1; i < p.dates.size(); ++i)
    if (p.dates[i].ordinal() <= p.dates[i - 1].ordinal()) throw ValidationError("dates are not increasing");
  p.validate();
  return p;
}

Panel load_fredmd(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open data file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_fredmd(ss.str());
}

std::string format_fredmd(const Panel& panel) {
  panel.validate();
  std::ostringstream os;
  os << "sasdate";
  for (const auto& m : panel.mnemonics) os << ',' << m;
  os << "\nTransform:";
  for (int c : panel.tcodes) os << ',' << c;
  os << '\n' << std::setprecision(17);
  for (int t = 0; t < panel.T(); ++t) {
    const auto& d = panel.dates[static_cast<std::size_t>(t)];
    os << d.month << "/1/" << d.year;
    for (int j = 0; j < panel.n(); ++j) {
      os << ',';
      if (!std::isnan(panel.values(t, j))) os << panel.values(t, j);
    }
    os << '\n';
  }
  return os.str();
}

void save_fredmd(const Panel& panel, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << format_fredmd(panel);
}

ClassMap parse_class_map(const std::string& json_text) {
  ClassMap out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed class map: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("class map must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key().rfind("_", 0) == 0) continue;  // metadata keys
    const std::string v = it.value().get<std::string>();
    if (v == "real") out[it.key()] = VariableClass::real;
    else if (v == "nominal") out[it.key()] = VariableClass::nominal;
    else if (v == "price") out[it.key()] = VariableClass::price;
    else throw ValidationError("unknown variable class '" + v + "' for " + it.key());
  }
  return out;
}

ClassMap load_class_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open class map '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_class_map(ss.str());
}

int transform_order(int tcode) {
  check_tcode(tcode);
  switch (tcode) {
    case 1: case 4: return 0;
    case 2: case 5: return 1;
    default: return 2;
  }
}

Vector transform_series(const Vector& x, int tcode) {
  check_tcode(tcode);
  const Eigen::Index T = x.size();
  Vector y = x;
  if (tcode >= 4 && tcode <= 6) {
    for (Eigen::Index t = 0; t < T; ++t) {
      if (std::isnan(x(t))) continue;
      if (!(x(t) > 0.0)) throw ValidationError("non-positive value under a log transform code");
      y(t) = std::log(x(t));
    }
  }
  auto diff = [](const Vector& v) {
    Vector d = Vector::Constant(v.size(), kNaN);
    for (Eigen::Index t = 1; t < v.size(); ++t) d(t) = v(t) - v(t - 1);
    return d;
  };
  switch (tcode) {
    case 1: case 4: return y;
    case 2: case 5: return diff(y);
    case 3: case 6: return diff(diff(y));
    case 7: {
      Vector g = Vector::Constant(T, kNaN);
      for (Eigen::Index t = 1; t < T; ++t) g(t) = x(t) / x(t - 1) - 1.0;
      return diff(g);
    }
  }
  return y;
}

int light_code(int tcode, VariableClass cls) {
  check_tcode(tcode);
  switch (cls) {
    case VariableClass::real: return tcode >= 4 ? 4 : 1;
    case VariableClass::price: return 5;
    case VariableClass::nominal: return tcode;
  }
  return tcode;
}

Panel apply_transforms(const Panel& panel, TransformScheme scheme, const ClassMap& classes) {
  panel.validate();
  Panel out = panel;
  int lost = 0;
  for (int j = 0; j < panel.n(); ++j) {
    int code = panel.tcodes[static_cast<std::size_t>(j)];
    if (scheme == TransformScheme::light) {
      const auto it = classes.find(panel.mnemonics[static_cast<std::size_t>(j)]);
      if (it != classes.end()) code = light_code(code, it->second);
    }
    out.tcodes[static_cast<std::size_t>(j)] = code;
    lost = std::max(lost, transform_order(code));
  }
  for (int j = 0; j < panel.n(); ++j) out.values.col(j) = transform_series(panel.values.col(j), out.tcodes[static_cast<std::size_t>(j)]);
  if (lost >= panel.T()) throw ValidationError("panel too short for its transforms");
  out.values = Matrix(out.values.bottomRows(panel.T() - lost));
  out.dates.erase(out.dates.begin(), out.dates.begin() + lost);
  out.means.resize(0);
  out.sds.resize(0);
  return out;
}

Panel trim_dates(const Panel& panel, YearMonth from, YearMonth to) {
  int first = -1, last = -1;
  for (int t = 0; t < panel.T(); ++t) {
    const auto& d = panel.dates[static_cast<std::size_t>(t)];
    if (d >= from && first < 0) first = t;
    if (d <= to) last = t;
  }
  if (first < 0 || last < first) throw ValidationError("date window " + from.to_string() + " to " + to.to_string() +
                                                       " is outside the panel");
  Panel out = panel;
  out.values = Matrix(panel.values.middleRows(first, last - first + 1));
  out.dates.assign(panel.dates.begin() + first, panel.dates.begin() + last + 1);
  return out;
}

Panel select_columns(const Panel& panel, const std::vector<std::string>& mnemonics) {
  Panel out;
  out.dates = panel.dates;
  out.values.resize(panel.T(), static_cast<Eigen::Index>(mnemonics.size()));
  for (std::size_t k = 0; k < mnemonics.size(); ++k) {
    const int j = panel.column(mnemonics[k]);
    out.values.col(static_cast<Eigen::Index>(k)) = panel.values.col(j);
    out.mnemonics.push_back(mnemonics[k]);
    out.tcodes.push_back(panel.tcodes[static_cast<std::size_t>(j)]);
  }
  if (panel.means.size() == panel.n() && panel.sds.size() == panel.n()) {
    out.means.resize(static_cast<Eigen::Index>(mnemonics.size()));
    out.sds.resize(static_cast<Eigen::Index>(mnemonics.size()));
    for (std::size_t k = 0; k < mnemonics.size(); ++k) {
      out.means(static_cast<Eigen::Index>(k)) = panel.means(panel.column(mnemonics[k]));
      out.sds(static_cast<Eigen::Index>(k)) = panel.sds(panel.column(mnemonics[k]));
    }
  }
  return out;
}

Panel drop_columns(const Panel& panel, const std::vector<std::string>& mnemonics) {
  std::vector<std::string> keep;
  for (const auto& m : panel.mnemonics)
    if (std::find(mnemonics.begin(), mnemonics.end(), m) == mnemonics.end()) keep.push_back(m);
  return select_columns(panel, keep);
}

Panel standardize(const Panel& panel) {
  if (panel.values.hasNaN()) throw ValidationError("standardize needs complete data");
  if (panel.T() < 2) throw ValidationError("standardize needs at least two rows");
  Panel out = panel;
  out.means = panel.values.colwise().mean().transpose();
  const Matrix centered = panel.values.rowwise() - out.means.transpose();
  out.sds = (centered.colwise().squaredNorm() / (panel.T() - 1)).cwiseSqrt().transpose();
  for (int j = 0; j < panel.n(); ++j)
    if (!(out.sds(j) > 0.0)) throw ValidationError("zero-variance column '" + panel.mnemonics[static_cast<std::size_t>(j)] + "'");
  out.values = centered * out.sds.cwiseInverse().asDiagonal();
  return out;
}

Matrix destandardize(const Panel& standardized) {
  if (standardized.sds.size() != standardized.n()) throw ValidationError("panel carries no standardization");
  Matrix out = standardized.values * standardized.sds.asDiagonal();
  out.rowwise() += standardized.means.transpose();
  return out;
}

Matrix impute_pca(const Matrix& X, int n_factors, double tol, int max_iter, int* iterations) {
  const Eigen::Index T = X.rows();
  const Eigen::Index n = X.cols();
  const auto miss = X.array().isNaN();
  Matrix Y = X;
  if (!miss.any()) {
    if (iterations) *iterations = 0;
    return Y;
  }
  Vector mu(n), sd(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = 0.0, s2 = 0.0;
    int cnt = 0;
    for (Eigen::Index t = 0; t < T; ++t)
      if (!miss(t, j)) {
        s += X(t, j);
        s2 += X(t, j) * X(t, j);
        ++cnt;
      }
    if (cnt < 2) throw ValidationError("column with fewer than two observations cannot be imputed");
    mu(j) = s / cnt;
    sd(j) = std::sqrt(std::max(s2 / cnt - mu(j) * mu(j), 1e-300));
    for (Eigen::Index t = 0; t < T; ++t)
      if (miss(t, j)) Y(t, j) = mu(j);
  }
  const int k = std::max(1, std::min<int>(n_factors, static_cast<int>(std::min(T, n))));
  int it = 0;
  for (; it < max_iter; ++it) {
    const Vector m = Y.colwise().mean().transpose();
    Vector s = ((Y.rowwise() - m.transpose()).colwise().squaredNorm() / static_cast<double>(T)).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < n; ++j) s(j) = s(j) > 0.0 ? s(j) : 1.0;
    const Matrix Z = (Y.rowwise() - m.transpose()) * s.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(Z.transpose() * Z);
    const Matrix V = es.eigenvectors().rightCols(k);
    const Matrix fit = (Z * V * V.transpose()) * s.asDiagonal();
    double change = 0.0, norm = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index t = 0; t < T; ++t)
        if (miss(t, j)) {
          const double v = fit(t, j) + m(j);
          change += (v - Y(t, j)) * (v - Y(t, j));
          norm += Y(t, j) * Y(t, j);
          Y(t, j) = v;
        }
    if (change <= tol * tol * std::max(norm, 1e-300)) {
      ++it;
      break;
    }
  }
  if (iterations) *iterations = it;
  return Y;
}

Panel clean(const Panel& panel, const CleanOptions& opts, CleanReport* report) {
  CleanReport rep;
  Panel out = panel;
  Matrix& X = out.values;
  const int T = panel.T();
  rep.missing_before = static_cast<int>(X.array().isNaN().count());
  for (int j = 0; j < panel.n(); ++j) {
    std::vector<double> obs;
    for (int t = 0; t < T; ++t)
      if (!std::isnan(X(t, j))) obs.push_back(X(t, j));
    if (obs.size() < static_cast<std::size_t>(std::ceil((1.0 - opts.max_missing_share) * T)))
      throw ValidationError("column '" + panel.mnemonics[static_cast<std::size_t>(j)] + "' has more than " +
                            std::to_string(static_cast<int>(opts.max_missing_share * 100)) + "% missing values");
    const double med = median_of(obs);
    const double iqr = linalg::percentile(obs, 75.0) - linalg::percentile(obs, 25.0);
    for (int t = 0; t < T; ++t)
      if (!std::isnan(X(t, j)) && std::abs(X(t, j) - med) > opts.iqr_mult * iqr) {
        X(t, j) = kNaN;
        ++rep.outliers;
      }
  }
  rep.imputed = static_cast<int>(X.array().isNaN().count());
  X = impute_pca(X, opts.n_factors, opts.tol, opts.max_iter, &rep.iterations);
  if (report) *report = rep;
  return out;
}

double autocorrelation(const Vector& x, int lag) {
  const Eigen::Index T = x.size();
  if (lag < 0 || lag >= T) throw ValidationError("autocorrelation lag out of range");
  const double m = x.mean();
  const Vector c = x.array() - m;
  const double denom = c.squaredNorm();
  if (!(denom > 0.0)) return 0.0;
  return c.tail(T - lag).dot(c.head(T - lag)) / denom;
}

Matrix autocorr_table(const Panel& panel, int lags, const std::vector<double>& percentiles) {
  if (panel.values.hasNaN()) throw ValidationError("autocorrelation table needs complete data");
  Matrix out(lags, static_cast<Eigen::Index>(percentiles.size()));
  for (int k = 1; k <= lags; ++k) {
    std::vector<double> ac;
    for (int j = 0; j < panel.n(); ++j) ac.push_back(std::abs(autocorrelation(panel.values.col(j), k)));
    for (std::size_t p = 0; p < percentiles.size(); ++p)
      out(k - 1, static_cast<Eigen::Index>(p)) = linalg::percentile(ac, percentiles[p]);
  }
  return out;
}

Panel process_panel(const Panel& raw, const PanelPipeline& pipeline, const ClassMap& classes, CleanReport* report) {
  Panel p = apply_transforms(raw, pipeline.scheme, classes);
  p = trim_dates(p, pipeline.from, pipeline.to);
  std::vector<std::string> drop;
  for (const auto& m : pipeline.drop)
    if (std::find(p.mnemonics.begin(), p.mnemonics.end(), m) != p.mnemonics.end()) drop.push_back(m);
  p = drop_columns(p, drop);
  return clean(p, pipeline.clean, report);
}

}  // namespace rmfd
