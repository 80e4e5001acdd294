#include "rmfd/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rmfd {

const char* const kVersion = "0.1.0";

namespace {

Json poly_to_json(const PolyMatrix& p) {
  Json out = Json::array();
  for (int j = 0; j <= p.degree(); ++j) {
    Json flat = Json::array();
    for (int r = 0; r < p.rows(); ++r)
      for (int c = 0; c < p.cols(); ++c) flat.push_back(p[j](r, c));
    out.push_back(flat);
  }
  return out;
}

PolyMatrix poly_from_json(const Json& j, int rows, int cols, int degree, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != degree + 1)
    throw ValidationError(std::string(name) + ": expected " + std::to_string(degree + 1) + " lag arrays");
  std::vector<Matrix> coeffs;
  for (const auto& flat : j) {
    if (!flat.is_array() || static_cast<int>(flat.size()) != rows * cols)
      throw DimensionError(std::string(name) + ": lag array has the wrong length");
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)].get<double>();
    coeffs.push_back(m);
  }
  return PolyMatrix(std::move(coeffs));
}

template <class T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ValidationError("matrix must be a nested array");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw DimensionError("ragged matrix rows");
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

Json model_to_json(const RmfdModel& model) {
  Json j;
  j["gamma"] = model.gamma.values();
  j["n"] = model.n();
  j["q"] = model.q();
  j["s"] = model.s();
  j["p"] = model.p();
  j["c_coeffs"] = poly_to_json(model.c);
  j["d_coeffs"] = poly_to_json(model.d);
  return j;
}

RmfdModel model_from_json(const Json& j) {
  const auto gamma = required<std::vector<int>>(j, "gamma");
  const int n = required<int>(j, "n");
  const int q = required<int>(j, "q");
  const int s = required<int>(j, "s");
  const int p = required<int>(j, "p");
  if (static_cast<int>(gamma.size()) != q) throw DimensionError("gamma length differs from q");
  if (n < q || q < 1 || s < 0 || p < 1) throw ValidationError("invalid model dimensions");
  RmfdModel m;
  m.gamma = KroneckerIndices(gamma);
  m.c = poly_from_json(j.at("c_coeffs"), q, q, p, "c_coeffs");
  m.d = poly_from_json(j.at("d_coeffs"), n, q, s, "d_coeffs");
  m.validate();
  const EchelonPattern pat = echelon_pattern(m.gamma, n, s, p);
  if (m.pattern_violation(pat) > 1e-8) throw ValidationError("coefficients violate the echelon pattern");
  return m;
}

Json fit_to_json(const EmResult& fit) {
  Json j = model_to_json(fit.model);
  j["sigma_eps"] = matrix_to_json(fit.ss.sigma_eps);
  j["sigma_xi"] = fit.ss.sigma_xi;
  j["loglik"] = fit.loglik;
  j["loglik_scaled"] = fit.loglik_scaled();
  j["T"] = fit.T;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["n_params"] = fit.n_params;
  j["trace"] = fit.trace.loglik;
  return j;
}

LoadedFit fit_from_json(const Json& j) {
  LoadedFit out;
  out.model = model_from_json(j);
  if (!j.contains("sigma_eps")) throw ValidationError("missing field 'sigma_eps'");
  const Matrix se = matrix_from_json(j.at("sigma_eps"));
  const double sx = required<double>(j, "sigma_xi");
  out.ss = assemble_statespace(out.model, se, sx);
  out.loglik = j.value("loglik", 0.0);
  out.iterations = j.value("iterations", 0);
  out.converged = j.value("converged", false);
  return out;
}

std::string units_for_tcode(int tcode) {
  switch (tcode) {
    case 1: return "level";
    case 2: return "level";
    case 3: return "level";
    case 4: return "log level";
    case 5: return "log level";
    case 6: return "log level";
    case 7: return "cumulative growth";
  }
  return "unknown";
}

std::string irf_csv(const std::vector<IrfTable>& tables) {
  std::ostringstream os;
  os << "model,variable,horizon,point,lower,upper,units\n";
  for (const auto& t : tables) {
    const bool bands = t.lower.size() > 0;
    for (Eigen::Index i = 0; i < t.point.rows(); ++i)
      for (Eigen::Index h = 0; h < t.point.cols(); ++h) {
        os << t.label << ',' << t.variables[static_cast<std::size_t>(i)] << ',' << h << ',' << fmt(t.point(i, h)) << ','
           << (bands ? fmt(t.lower(i, h)) : "") << ',' << (bands ? fmt(t.upper(i, h)) : "") << ','
           << t.units[static_cast<std::size_t>(i)] << '\n';
      }
  }
  return os.str();
}

Json irf_json(const std::vector<IrfTable>& tables) {
  Json rows = Json::array();
  for (const auto& t : tables) {
    const bool bands = t.lower.size() > 0;
    for (Eigen::Index i = 0; i < t.point.rows(); ++i)
      for (Eigen::Index h = 0; h < t.point.cols(); ++h) {
        Json r;
        r["model"] = t.label;
        r["variable"] = t.variables[static_cast<std::size_t>(i)];
        r["horizon"] = h;
        r["point"] = t.point(i, h);
        r["lower"] = bands ? Json(t.lower(i, h)) : Json(nullptr);
        r["upper"] = bands ? Json(t.upper(i, h)) : Json(nullptr);
        r["units"] = t.units[static_cast<std::size_t>(i)];
        rows.push_back(r);
      }
  }
  return rows;
}

std::string config_hash(const Json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Json manifest_json(const Manifest& m) {
  Json j;
  j["command"] = m.command;
  j["version"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["config_hash"] = config_hash(m.config);
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["artifacts"] = m.artifacts;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace rmfd
