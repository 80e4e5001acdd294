#include "rmfd/types.hpp"

#include <algorithm>
#include <sstream>

namespace rmfd {

KroneckerIndices::KroneckerIndices(std::vector<int> gamma) : gamma_(std::move(gamma)) {
  if (gamma_.empty()) throw ValidationError("Kronecker index vector must be non-empty");
  for (int g : gamma_) {
    if (g < 0) throw ValidationError("Kronecker indices must be non-negative");
  }
}

int KroneckerIndices::kappa() const { return *std::max_element(gamma_.begin(), gamma_.end()); }

bool KroneckerIndices::is_weakly_increasing() const {
  return std::is_sorted(gamma_.begin(), gamma_.end());
}

std::string KroneckerIndices::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < gamma_.size(); ++i) os << (i ? "," : "") << gamma_[i];
  os << ')';
  return os.str();
}

PolyMatrix::PolyMatrix(std::vector<Matrix> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw DimensionError("PolyMatrix needs at least one coefficient");
  for (const auto& m : coeffs_) {
    if (m.rows() != coeffs_.front().rows() || m.cols() != coeffs_.front().cols())
      throw DimensionError("PolyMatrix coefficients must share dimensions");
  }
}

PolyMatrix PolyMatrix::zero(int rows, int cols, int degree) {
  if (degree < 0) throw DimensionError("PolyMatrix degree must be >= 0");
  return PolyMatrix(std::vector<Matrix>(static_cast<std::size_t>(degree + 1), Matrix::Zero(rows, cols)));
}

PolyMatrix PolyMatrix::identity(int q) { return PolyMatrix({Matrix::Identity(q, q)}); }

Matrix PolyMatrix::at(int j) const {
  if (j < 0 || j > degree()) return Matrix::Zero(rows(), cols());
  return coeffs_[static_cast<std::size_t>(j)];
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& rhs) const {
  if (cols() != rhs.rows()) throw DimensionError("PolyMatrix product: inner dimensions differ");
  PolyMatrix out = zero(rows(), rhs.cols(), degree() + rhs.degree());
  for (int i = 0; i <= degree(); ++i)
    for (int j = 0; j <= rhs.degree(); ++j) out.coeff(i + j).noalias() += (*this)[i] * rhs[j];
  return out;
}

PolyMatrix PolyMatrix::operator*(const Matrix& rhs) const {
  if (cols() != rhs.rows()) throw DimensionError("PolyMatrix product: inner dimensions differ");
  std::vector<Matrix> out;
  out.reserve(coeffs_.size());
  for (const auto& m : coeffs_) out.push_back(m * rhs);
  return PolyMatrix(std::move(out));
}

PolyMatrix PolyMatrix::padded(int degree) const {
  std::vector<Matrix> out;
  for (int j = 0; j <= degree; ++j) out.push_back(at(j));
  return PolyMatrix(std::move(out));
}

double PolyMatrix::max_abs_diff(const PolyMatrix& other) const {
  if (rows() != other.rows() || cols() != other.cols())
    throw DimensionError("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (int j = 0; j <= std::max(degree(), other.degree()); ++j)
    worst = std::max(worst, (at(j) - other.at(j)).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace rmfd
