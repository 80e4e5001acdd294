#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace rmfd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Error hierarchy. CLI maps ValidationError -> exit 1, NumericalError -> exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Right Kronecker indices (gamma_1, ..., gamma_q): the column degrees of the
/// stacked pair [c(z); d(z)].
class KroneckerIndices {
 public:
  explicit KroneckerIndices(std::vector<int> gamma);

  int q() const { return static_cast<int>(gamma_.size()); }
  int kappa() const;
  int operator[](int l) const { return gamma_[static_cast<std::size_t>(l)]; }
  const std::vector<int>& values() const { return gamma_; }
  bool is_weakly_increasing() const;
  std::string to_string() const;

  friend bool operator==(const KroneckerIndices&, const KroneckerIndices&) = default;
  friend auto operator<=>(const KroneckerIndices&, const KroneckerIndices&) = default;

 private:
  std::vector<int> gamma_;
};

/// Matrix polynomial sum_j coeffs[j] z^j. All coefficients share one shape.
class PolyMatrix {
 public:
  explicit PolyMatrix(std::vector<Matrix> coeffs);

  static PolyMatrix zero(int rows, int cols, int degree);
  static PolyMatrix identity(int q);

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  int rows() const { return static_cast<int>(coeffs_.front().rows()); }
  int cols() const { return static_cast<int>(coeffs_.front().cols()); }

  const Matrix& operator[](int j) const { return coeffs_[static_cast<std::size_t>(j)]; }
  Matrix& coeff(int j) { return coeffs_[static_cast<std::size_t>(j)]; }
  // Zero matrix for lags beyond the degree.
  Matrix at(int j) const;
  const std::vector<Matrix>& coeffs() const { return coeffs_; }

  PolyMatrix operator*(const PolyMatrix& rhs) const;
  // Right-multiplies each coefficient by a constant matrix.
  PolyMatrix operator*(const Matrix& rhs) const;
  PolyMatrix padded(int degree) const;
  // Max-abs distance over all lags, padding the shorter one with zeros.
  double max_abs_diff(const PolyMatrix& other) const;

 private:
  std::vector<Matrix> coeffs_;
};

}  // namespace rmfd
