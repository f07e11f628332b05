#include "sarqc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sarqc/error.hpp"

namespace sarqc::linalg {

namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("matrix entries must be finite");
  }
}

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw InvalidArgument(std::string(what) + ": expected a square matrix, got " +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

Matrix shifted(const Matrix& g, double eps) {
  Matrix out = g;
  for (std::size_t i = 0; i < g.rows(); ++i) out(i, i) += eps;
  return out;
}

// Inverse of a lower-triangular matrix with positive diagonal.
Matrix invert_lower(const Matrix& l) {
  const std::size_t n = l.rows();
  Matrix inv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    inv(c, c) = 1.0 / l(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t k = c; k < r; ++k) acc += l(r, k) * inv(k, c);
      inv(r, c) = -acc / l(r, r);
    }
  }
  return inv;
}

// Linv is lower triangular; returns Linvᵀ·Linv.
Matrix inverse_from_lower_inverse(const Matrix& linv) {
  const std::size_t n = linv.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = j; k < n; ++k) acc += linv(k, i) * linv(k, j);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

double jitter_at(double base, int attempt) {
  return attempt == 0 ? 0.0 : std::ldexp(base, attempt - 1);
}

std::string failure_message(std::string_view op, std::string_view label, double last_eps) {
  return std::string(op) + " failed for " + std::string(label) + " after " +
         std::to_string(kMaxJitterRetries) + " jitter retries (last eps " +
         std::to_string(last_eps) + ")";
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw InvalidArgument("matrix fill value must be finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument("matrix data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
  require_finite(data_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  require_finite(diag);
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw InvalidArgument("block out of range");
  Matrix b(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
  }
  return b;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("matrix subtraction: shape mismatch");
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("matrix addition: shape mismatch");
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(r, k);
      if (s == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t c = 0; c < b.cols(); ++c) dst[c] += s * src[c];
    }
  }
  return out;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> v) {
  if (a.cols() != v.size()) throw InvalidArgument("matvec: dimension mismatch");
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double acc = 0.0;
    auto row = a.row(r);
    for (std::size_t c = 0; c < v.size(); ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Matrix gram(const Matrix& x) {
  const std::size_t d = x.rows();
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    auto xi = x.row(i);
    for (std::size_t j = i; j < d; ++j) {
      auto xj = x.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += xi[k] * xj[k];
      g(i, j) = acc;
      g(j, i) = acc;
    }
  }
  return g;
}

double frobenius_sq(const Matrix& a) {
  // Summed in ascending order of the squares so the result does not depend
  // on the storage layout (A and Aᵀ agree bit for bit).
  std::vector<double> sq(a.data().size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = a.data()[i] * a.data()[i];
  std::sort(sq.begin(), sq.end());
  double acc = 0.0;
  for (double v : sq) acc += v;
  return acc;
}

double mean_diagonal(const Matrix& a) {
  require_square(a, "mean_diagonal");
  if (a.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) acc += a(i, i);
  return acc / static_cast<double>(a.rows());
}

Matrix TriangularFactor::to_matrix() const { return Matrix(dim, dim, data); }

double default_jitter(const Matrix& g) {
  const double m = mean_diagonal(g);
  return m > 0.0 ? 1e-6 * m : 1e-6;
}

bool cholesky_lower(const Matrix& a, Matrix& l) {
  const std::size_t n = a.rows();
  l = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

Matrix inverse_spd(const Matrix& g, double jitter_base, double* jitter_used,
                   std::string_view label) {
  require_square(g, "inverse_spd");
  double eps = 0.0;
  for (int attempt = 0; attempt <= kMaxJitterRetries; ++attempt) {
    eps = jitter_at(jitter_base, attempt);
    Matrix l;
    if (!cholesky_lower(shifted(g, eps), l)) continue;
    if (jitter_used != nullptr) *jitter_used = eps;
    return inverse_from_lower_inverse(invert_lower(l));
  }
  throw NumericalFailure(failure_message("inverse", label, eps));
}

TriangularFactor chol_upper_of_inverse(const Matrix& g, double jitter_base,
                                       std::string_view label) {
  require_square(g, "chol_upper_of_inverse");
  if (g.rows() == 0) throw InvalidArgument("chol_upper_of_inverse: empty matrix");
  const std::size_t n = g.rows();
  double eps = 0.0;
  for (int attempt = 0; attempt <= kMaxJitterRetries; ++attempt) {
    eps = jitter_at(jitter_base, attempt);
    Matrix l;
    if (!cholesky_lower(shifted(g, eps), l)) continue;
    const Matrix ginv = inverse_from_lower_inverse(invert_lower(l));
    Matrix l2;
    if (!cholesky_lower(ginv, l2)) continue;
    TriangularFactor f;
    f.dim = n;
    f.data.assign(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = r; c < n; ++c) f.data[r * n + c] = l2(c, r);
    }
    f.jitter_used = eps;
    return f;
  }
  throw NumericalFailure(failure_message("chol(G^-1)", label, eps));
}

std::vector<double> solve_spd(const Matrix& g, std::span<const double> b,
                              std::string_view label) {
  require_square(g, "solve_spd");
  if (g.rows() != b.size()) throw InvalidArgument("solve_spd: dimension mismatch");
  const std::size_t n = g.rows();
  const double base = default_jitter(g);
  double eps = 0.0;
  for (int attempt = 0; attempt <= kMaxJitterRetries; ++attempt) {
    eps = jitter_at(base, attempt);
    Matrix l;
    if (!cholesky_lower(shifted(g, eps), l)) continue;
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      double s = y[i];
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * y[k];
      y[ii] = s / l(ii, ii);
    }
    return y;
  }
  throw NumericalFailure(failure_message("solve", label, eps));
}

}  // namespace sarqc::linalg
