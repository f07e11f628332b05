#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace sarqc::linalg {

// Dense row-major double matrix. Entries are finite on construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transpose() const;
  // Rows [r0, r0+nr) and columns [c0, c0+nc).
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix matmul(const Matrix& a, const Matrix& b);

// A·v for a column vector v.
std::vector<double> matvec(const Matrix& a, std::span<const double> v);

// X·Xᵀ for X of shape (d × n); symmetrized on output.
Matrix gram(const Matrix& x);

double frobenius_sq(const Matrix& a);
double mean_diagonal(const Matrix& a);

enum class FactorOrigin { CholOfInverse };

// Upper-triangular M with MᵀM = G⁻¹, i.e. M = chol(G⁻¹)ᵀ.
struct TriangularFactor {
  std::size_t dim = 0;
  std::vector<double> data;  // row-major dim × dim, lower triangle zero
  FactorOrigin origin = FactorOrigin::CholOfInverse;
  double jitter_used = 0.0;

  double operator()(std::size_t r, std::size_t c) const { return data[r * dim + c]; }
  Matrix to_matrix() const;
};

inline constexpr int kMaxJitterRetries = 10;

// 1e-6 · mean(diag(G)), or 1e-6 when the diagonal mean is not positive.
double default_jitter(const Matrix& g);

// Lower Cholesky factor L with L·Lᵀ = A. Returns false if A is not
// numerically positive definite.
bool cholesky_lower(const Matrix& a, Matrix& l);

// Inverse of a symmetric positive definite matrix with the jitter policy
// (ε = jitter_base, doubled per retry, at most kMaxJitterRetries retries).
// `jitter_used` receives the diagonal shift that was finally applied.
Matrix inverse_spd(const Matrix& g, double jitter_base, double* jitter_used = nullptr,
                   std::string_view label = "matrix");

// Upper factor of G⁻¹ under the same jitter policy; `label` names the
// matrix in the failure message.
TriangularFactor chol_upper_of_inverse(const Matrix& g, double jitter_base,
                                       std::string_view label = "matrix");

// Solves G·y = b for SPD G (jitter policy applied when needed).
std::vector<double> solve_spd(const Matrix& g, std::span<const double> b,
                              std::string_view label = "matrix");

}  // namespace sarqc::linalg
