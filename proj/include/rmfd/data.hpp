#pragma once

// Monthly macro panels in the FRED-MD layout: transforms, standardization,
// outlier cleaning with factor-based imputation, persistence summaries.

#include "rmfd/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace rmfd {

struct YearMonth {
  int year = 1970;
  int month = 1;

  int ordinal() const { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int o) { return {o / 12, o % 12 + 1}; }
  std::string to_string() const;  // YYYY-MM
  static YearMonth parse(const std::string& s);  // M/D/YYYY, YYYY-MM-DD or YYYY-MM
  friend bool operator==(const YearMonth&, const YearMonth&) = default;
  friend auto operator<=>(const YearMonth& a, const YearMonth& b) { return a.ordinal() <=> b.ordinal(); }
};

struct Panel {
  Matrix values;  // T x n, NaN marks a missing cell
  std::vector<std::string> mnemonics;
  std::vector<int> tcodes;
  std::vector<YearMonth> dates;
  Vector means;  // filled by standardize
  Vector sds;

  int T() const { return static_cast<int>(values.rows()); }
  int n() const { return static_cast<int>(values.cols()); }
  Mask missing() const { return values.array().isNaN(); }
  int column(const std::string& mnemonic) const;  // throws if absent
  void validate() const;
};

Panel load_fredmd(const std::string& path);
Panel parse_fredmd(const std::string& text);
std::string format_fredmd(const Panel& panel);
void save_fredmd(const Panel& panel, const std::string& path);

enum class VariableClass { real, nominal, price };
using ClassMap = std::map<std::string, VariableClass>;

/// JSON object {mnemonic: "real" | "nominal" | "price"}.
ClassMap load_class_map(const std::string& path);
ClassMap parse_class_map(const std::string& json_text);

enum class TransformScheme { heavy, light };

/// Applies tcode t to a single series; the first `transform_order(t)` entries
/// of the result are NaN.
Vector transform_series(const Vector& x, int tcode);
int transform_order(int tcode);

/// Light-scheme code for a variable: real -> level (1) or log level (4),
/// price -> 5, nominal keeps its code.
int light_code(int tcode, VariableClass cls);

/// Heavy uses each variable's tcode; light remaps through the class map
/// (variables missing from the map keep their code). The rows lost to the
/// largest differencing order are dropped from every column; tcodes are
/// replaced by the codes actually applied.
Panel apply_transforms(const Panel& panel, TransformScheme scheme, const ClassMap& classes = {});

Panel trim_dates(const Panel& panel, YearMonth from, YearMonth to);
Panel drop_columns(const Panel& panel, const std::vector<std::string>& mnemonics);
Panel select_columns(const Panel& panel, const std::vector<std::string>& mnemonics);

/// Zero mean, unit variance per column (divisor T - 1). Throws on a
/// zero-variance column or missing values.
Panel standardize(const Panel& panel);
Matrix destandardize(const Panel& standardized);

struct CleanOptions {
  double iqr_mult = 10.0;
  int n_factors = 8;
  double tol = 1e-6;
  int max_iter = 500;
  double max_missing_share = 0.5;
};

struct CleanReport {
  int outliers = 0;
  int missing_before = 0;
  int imputed = 0;
  int iterations = 0;
};

/// Outliers (|x - median| > iqr_mult * IQR) are set missing, then missing cells
/// are filled by iterated principal components.
Panel clean(const Panel& panel, const CleanOptions& opts = {}, CleanReport* report = nullptr);
Matrix impute_pca(const Matrix& X, int n_factors, double tol, int max_iter, int* iterations = nullptr);

/// Row k-1 holds percentiles of |autocorrelation at lag k| across variables.
Matrix autocorr_table(const Panel& panel, int lags = 8, const std::vector<double>& percentiles = {5, 25, 50, 75, 95});
double autocorrelation(const Vector& x, int lag);

struct PanelPipeline {
  TransformScheme scheme = TransformScheme::heavy;
  YearMonth from{1973, 3};
  YearMonth to{2007, 11};
  std::vector<std::string> drop{"ACOGNO", "UMCSENTx"};
  CleanOptions clean;
};

/// transform -> trim -> drop -> clean.
Panel process_panel(const Panel& raw, const PanelPipeline& pipeline, const ClassMap& classes = {},
                    CleanReport* report = nullptr);

}  // namespace rmfd
