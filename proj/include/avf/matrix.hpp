#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "avf/errors.hpp"

namespace avf {

/// Dense row-major matrix. A column vector is n x 1, a row vector 1 x n.
template <typename T>
class Matrix {
public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(rows, cols));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer list");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }
  static Matrix ones(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, T(1)); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape() const { return shape_string(rows_, cols_); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
std::ostream& operator<<(std::ostream& os, const Matrix<T>& m) {
  os << "[";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << (r ? "; " : "");
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
  }
  return os << "]";
}

namespace detail {

inline void require_same_shape(const char* op, std::size_t ar, std::size_t ac, std::size_t br,
                               std::size_t bc) {
  if (ar != br || ac != bc) {
    throw DimensionError(std::string(op) + ": shape mismatch " + Matrix<double>::shape_string(ar, ac) +
                         " vs " + Matrix<double>::shape_string(br, bc));
  }
}

} // namespace detail

// Value-level kernels. Reductions run left to right over the inner index so the
// result matches a naive triple loop bit for bit.

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape() + " x " + b.shape());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix<T> c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T* ci = &c(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a(i, p);
      const T* bp = &b(p, 0);
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

/// aᵀ·b without materializing the transpose.
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: inner dimensions differ, " + a.shape() + "^T x " + b.shape());
  }
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Matrix<T> c(n, m);
  for (std::size_t p = 0; p < k; ++p) {
    const T* ap = &a(p, 0);
    const T* bp = &b(p, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const T api = ap[i];
      T* ci = &c(i, 0);
      for (std::size_t j = 0; j < m; ++j) ci[j] += api * bp[j];
    }
  }
  return c;
}

/// a·bᵀ without materializing the transpose.
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + a.shape() + " x " + b.shape() + "^T");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  // A row-wise dot product cannot vectorize without reassociating the sum, so
  // transpose b into a k x m buffer and run the same i-p-j loop as matmul.
  std::vector<T> bt(k * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * m + j] = b(j, p);
  Matrix<T> c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T* ci = &c(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a(i, p);
      const T* bp = &bt[p * m];
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

template <typename T, typename F>
Matrix<T> map(const Matrix<T>& a, F&& f) {
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename T, typename F>
Matrix<T> zip(const char* op, const Matrix<T>& a, const Matrix<T>& b, F&& f) {
  detail::require_same_shape(op, a.rows(), a.cols(), b.rows(), b.cols());
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
  return zip("add", a, b, [](T x, T y) { return x + y; });
}
template <typename T>
Matrix<T> sub(const Matrix<T>& a, const Matrix<T>& b) {
  return zip("sub", a, b, [](T x, T y) { return x - y; });
}
template <typename T>
Matrix<T> mul(const Matrix<T>& a, const Matrix<T>& b) {
  return zip("mul", a, b, [](T x, T y) { return x * y; });
}
template <typename T>
Matrix<T> scale(const Matrix<T>& a, T s) {
  return map(a, [s](T x) { return x * s; });
}
template <typename T>
Matrix<T> tanh(const Matrix<T>& a) {
  return map(a, [](T x) { return std::tanh(x); });
}
template <typename T>
Matrix<T> relu(const Matrix<T>& a) {
  return map(a, [](T x) { return x > T(0) ? x : T(0); });
}

/// a += b, in place.
template <typename T>
void accumulate(Matrix<T>& a, const Matrix<T>& b) {
  detail::require_same_shape("accumulate", a.rows(), a.cols(), b.rows(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

enum class Axis { Rows, Cols };

/// Softmax of logits / temperature. Axis::Rows normalizes each row, Axis::Cols
/// each column. The per-slice maximum is subtracted before exponentiation.
template <typename T>
Matrix<T> softmax_temp(const Matrix<T>& logits, T temperature, Axis axis = Axis::Rows) {
  if (!(temperature > T(0))) {
    throw ParameterError("softmax_temp: temperature must be > 0, got " + std::to_string(temperature));
  }
  const bool by_row = axis == Axis::Rows;
  const std::size_t slices = by_row ? logits.rows() : logits.cols();
  const std::size_t len = by_row ? logits.cols() : logits.rows();
  auto at = [&](auto& m, std::size_t s, std::size_t k) -> decltype(auto) {
    return by_row ? m(s, k) : m(k, s);
  };
  Matrix<T> out(logits.rows(), logits.cols());
  for (std::size_t s = 0; s < slices; ++s) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, at(logits, s, k));
    T sum = T(0);
    for (std::size_t k = 0; k < len; ++k) {
      const T e = std::exp((at(logits, s, k) - mx) / temperature);
      at(out, s, k) = e;
      sum += e;
    }
    for (std::size_t k = 0; k < len; ++k) at(out, s, k) /= sum;
  }
  return out;
}

/// Stack a on top of b.
template <typename T>
Matrix<T> concat_rows(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() == 0) {
    if (b.rows() == 0 && a.cols() != b.cols()) {
      throw DimensionError("concat_rows: column mismatch " + a.shape() + " vs " + b.shape());
    }
    return b;
  }
  if (b.rows() == 0 && (b.cols() == a.cols() || b.cols() == 0)) return a;
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column mismatch " + a.shape() + " vs " + b.shape());
  }
  Matrix<T> out(a.rows() + b.rows(), a.cols());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

template <typename T>
T max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require_same_shape("max_abs_diff", a.rows(), a.cols(), b.rows(), b.cols());
  T m = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
T sum(const Matrix<T>& a) {
  T s = T(0);
  for (T v : a.values()) s += v;
  return s;
}

} // namespace avf
