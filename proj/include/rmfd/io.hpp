#pragma once

// JSON/CSV serialization of models, fits and IRFs, plus run manifests.

#include "rmfd/benchmark.hpp"
#include "rmfd/em.hpp"
#include "rmfd/structural.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rmfd {

using Json = nlohmann::ordered_json;

Json model_to_json(const RmfdModel& model);
RmfdModel model_from_json(const Json& j);

Json fit_to_json(const EmResult& fit);

struct LoadedFit {
  RmfdModel model;
  StateSpaceModel ss;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};
LoadedFit fit_from_json(const Json& j);

/// Row-major nested arrays.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

struct IrfTable {
  std::string label;  // rmfd, sdfm, svar
  std::vector<std::string> variables;
  std::vector<std::string> units;
  Matrix point;  // n x (H + 1)
  Matrix lower;  // empty when no bands
  Matrix upper;
};

/// Header: model,variable,horizon,point,lower,upper,units
std::string irf_csv(const std::vector<IrfTable>& tables);
Json irf_json(const std::vector<IrfTable>& tables);

/// Units implied by the transform code after finalize_irf.
std::string units_for_tcode(int tcode);

struct Manifest {
  std::string command;
  Json config;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> artifacts;
};

/// FNV-1a (64 bit) of the compact config dump, as hex.
std::string config_hash(const Json& config);
Json manifest_json(const Manifest& m);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

extern const char* const kVersion;

}  // namespace rmfd
