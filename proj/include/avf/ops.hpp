#pragma once

#include <cmath>
#include <vector>

#include "avf/tape.hpp"

// Differentiable counterparts of the matrix kernels. Each op records its value
// and a closure that maps the upstream gradient onto its operands.

namespace avf {

namespace detail {
template <typename T>
void same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape != b.tape) throw ConfigError(std::string(op) + ": operands live on different tapes");
}
} // namespace detail

/// C = A·B; dA = dC·Bᵀ, dB = Aᵀ·dC.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "matmul");
  Tape<T>& tape = *a.tape;
  return tape.make(matmul(a.value(), b.value()), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.requires_grad(a.id)) t.add_grad(a, matmul_nt(g, t.value(b.id)));
    if (t.requires_grad(b.id)) t.add_grad(b, matmul_tn(t.value(a.id), g));
  });
}

/// C = Aᵀ·B; dA = B·dCᵀ, dB = A·dC.
template <typename T>
Var<T> matmul_tn(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "matmul_tn");
  Tape<T>& tape = *a.tape;
  return tape.make(matmul_tn(a.value(), b.value()), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.requires_grad(a.id)) t.add_grad(a, matmul_nt(t.value(b.id), g));
    if (t.requires_grad(b.id)) t.add_grad(b, matmul(t.value(a.id), g));
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  return a.tape->make(transpose(a.value()), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    t.add_grad(a, transpose(g));
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "add");
  return a.tape->make(add(a.value(), b.value()), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    t.add_grad(a, g);
    t.add_grad(b, g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "sub");
  return a.tape->make(sub(a.value(), b.value()), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    t.add_grad(a, g);
    if (t.requires_grad(b.id)) t.add_grad(b, scale(g, T(-1)));
  });
}

/// Elementwise (Hadamard) product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "mul");
  return a.tape->make(mul(a.value(), b.value()), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.requires_grad(a.id)) t.add_grad(a, mul(g, t.value(b.id)));
    if (t.requires_grad(b.id)) t.add_grad(b, mul(g, t.value(a.id)));
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  return a.tape->make(scale(a.value(), s), {a}, [a, s](Tape<T>& t, const Matrix<T>& g) {
    t.add_grad(a, scale(g, s));
  });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  Tape<T>& tape = *a.tape;
  const std::size_t self = tape.next_id();
  // tanh' = 1 - tanh², read back from the node's own value.
  return tape.make(tanh(a.value()), {a}, [a, self](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T>& y = t.value(self);
    Matrix<T> d(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (T(1) - y[i] * y[i]);
    t.add_grad(a, d);
  });
}

/// max(x, 0). The derivative at exactly 0 is taken as 0.
template <typename T>
Var<T> relu(Var<T> a) {
  Tape<T>& tape = *a.tape;
  tape.note_relu(a.value());
  return tape.make(relu(a.value()), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T>& x = t.value(a.id);
    Matrix<T> d(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = x[i] > T(0) ? g[i] : T(0);
    t.add_grad(a, d);
  });
}

/// Softmax of logits / temperature over each row (Axis::Rows) or column.
template <typename T>
Var<T> softmax_temp(Var<T> logits, T temperature, Axis axis = Axis::Rows) {
  Tape<T>& tape = *logits.tape;
  Matrix<T> y = softmax_temp(logits.value(), temperature, axis);
  const std::size_t self = tape.next_id();
  return tape.make(std::move(y), {logits}, [logits, temperature, axis, self](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T>& s = t.value(self);
    Matrix<T> d(g.rows(), g.cols());
    const bool by_row = axis == Axis::Rows;
    const std::size_t slices = by_row ? g.rows() : g.cols();
    const std::size_t len = by_row ? g.cols() : g.rows();
    auto idx = [&](std::size_t sl, std::size_t k) { return by_row ? sl * g.cols() + k : k * g.cols() + sl; };
    for (std::size_t sl = 0; sl < slices; ++sl) {
      T dot = T(0);
      for (std::size_t k = 0; k < len; ++k) dot += g[idx(sl, k)] * s[idx(sl, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = idx(sl, k);
        d[i] = s[i] * (g[i] - dot) / temperature;
      }
    }
    t.add_grad(logits, d);
  });
}

template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "concat_rows");
  const std::size_t ra = a.rows();
  return a.tape->make(concat_rows(a.value(), b.value()), {a, b}, [a, b, ra](Tape<T>& t, const Matrix<T>& g) {
    const std::size_t cols = g.cols();
    if (t.requires_grad(a.id) && ra > 0) {
      Matrix<T> ga(ra, cols);
      std::copy(g.values().begin(), g.values().begin() + static_cast<std::ptrdiff_t>(ra * cols), ga.values().begin());
      t.add_grad(a, ga);
    }
    const std::size_t rb = g.rows() - ra;
    if (t.requires_grad(b.id) && rb > 0) {
      Matrix<T> gb(rb, cols);
      std::copy(g.values().begin() + static_cast<std::ptrdiff_t>(ra * cols), g.values().end(), gb.values().begin());
      t.add_grad(b, gb);
    }
  });
}

/// Rows [begin, begin + count) of a.
template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count) {
  const Matrix<T>& v = a.value();
  if (begin + count > v.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") exceeds " + v.shape());
  }
  Matrix<T> out(count, v.cols());
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) = v(begin + r, c);
  const std::size_t rows = v.rows();
  return a.tape->make(std::move(out), {a}, [a, begin, rows](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T> d(rows, g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) d(begin + r, c) = g(r, c);
    t.add_grad(a, d);
  });
}

/// Side-by-side concatenation of row-compatible matrices.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Tape<T>& tape = *parts.front().tape;
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().value().shape() + " vs " + p.value().shape());
    }
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    off += p.cols();
  }
  return tape.make(std::move(out), parts, [parts](Tape<T>& t, const Matrix<T>& g) {
    std::size_t o = 0;
    for (const auto& p : parts) {
      const std::size_t pc = t.value(p.id).cols();
      if (t.requires_grad(p.id)) {
        Matrix<T> d(g.rows(), pc);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < pc; ++c) d(r, c) = g(r, o + c);
        t.add_grad(p, d);
      }
      o += pc;
    }
  });
}

/// Broadcast column k of an L x K score matrix across `rows` feature rows,
/// giving rows x L with out(r, l) = scores(l, k).
template <typename T>
Var<T> replicate_column(Var<T> scores, std::size_t k, std::size_t rows) {
  const Matrix<T>& s = scores.value();
  if (k >= s.cols()) {
    throw DimensionError("replicate_column: column " + std::to_string(k) + " out of range for " + s.shape());
  }
  const std::size_t len = s.rows();
  Matrix<T> out(rows, len);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t l = 0; l < len; ++l) out(r, l) = s(l, k);
  const std::size_t kk = s.cols();
  return scores.tape->make(std::move(out), {scores}, [scores, k, kk](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T> d(g.cols(), kk);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t l = 0; l < g.cols(); ++l) d(l, k) += g(r, l);
    t.add_grad(scores, d);
  });
}

/// x + b·1ᵀ for a column bias b (rows x 1).
template <typename T>
Var<T> add_col_bias(Var<T> x, Var<T> b) {
  detail::same_tape(x, b, "add_col_bias");
  const Matrix<T>& xv = x.value();
  const Matrix<T>& bv = b.value();
  if (bv.rows() != xv.rows() || bv.cols() != 1) {
    throw DimensionError("add_col_bias: bias " + bv.shape() + " does not fit " + xv.shape());
  }
  Matrix<T> out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(r, 0);
  return x.tape->make(std::move(out), {x, b}, [x, b](Tape<T>& t, const Matrix<T>& g) {
    t.add_grad(x, g);
    if (t.requires_grad(b.id)) {
      Matrix<T> d(g.rows(), 1);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d(r, 0) += g(r, c);
      t.add_grad(b, d);
    }
  });
}

/// Delay every row by `shift` columns, filling the first `shift` columns with
/// zeros (causal padding).
template <typename T>
Var<T> shift_right(Var<T> x, std::size_t shift) {
  const Matrix<T>& v = x.value();
  Matrix<T> out(v.rows(), v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = shift; c < v.cols(); ++c) out(r, c) = v(r, c - shift);
  return x.tape->make(std::move(out), {x}, [x, shift](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T> d(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = shift; c < g.cols(); ++c) d(r, c - shift) = g(r, c);
    t.add_grad(x, d);
  });
}

/// Sum of all entries as a 1x1 node.
template <typename T>
Var<T> sum(Var<T> a) {
  return a.tape->make(Matrix<T>(1, 1, sum(a.value())), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T>& v = t.value(a.id);
    t.add_grad(a, Matrix<T>(v.rows(), v.cols(), g[0]));
  });
}

} // namespace avf
