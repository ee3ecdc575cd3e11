#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "avf/ops.hpp"

namespace avf {

struct CccResult {
  double value = 0.0;
  /// Both inputs constant over the weighted frames; value is reported as 0.
  bool degenerate = false;
};

namespace detail {

template <typename T>
struct CccMoments {
  T n = 0, mean_p = 0, mean_t = 0, var_p = 0, var_t = 0, cov = 0;

  T numerator() const { return T(2) * cov; }
  T denominator() const { return var_p + var_t + (mean_p - mean_t) * (mean_p - mean_t); }
};

// Population (1/N) moments over frames with nonzero weight.
template <typename T>
CccMoments<T> ccc_moments(std::span<const T> pred, std::span<const T> truth, std::span<const T> weight) {
  if (pred.size() != truth.size()) {
    throw DimensionError("ccc: length mismatch " + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()));
  }
  if (!weight.empty() && weight.size() != pred.size()) {
    throw DimensionError("ccc: mask length " + std::to_string(weight.size()) + " does not match " +
                         std::to_string(pred.size()));
  }
  auto w = [&](std::size_t i) { return weight.empty() ? T(1) : weight[i]; };
  CccMoments<T> m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    m.n += w(i);
    m.mean_p += w(i) * pred[i];
    m.mean_t += w(i) * truth[i];
  }
  if (m.n < T(2)) throw DimensionError("ccc: need at least 2 frames, got " + std::to_string(static_cast<double>(m.n)));
  m.mean_p /= m.n;
  m.mean_t /= m.n;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T dp = pred[i] - m.mean_p;
    const T dt = truth[i] - m.mean_t;
    m.var_p += w(i) * dp * dp;
    m.var_t += w(i) * dt * dt;
    m.cov += w(i) * dp * dt;
  }
  m.var_p /= m.n;
  m.var_t /= m.n;
  m.cov /= m.n;
  return m;
}

} // namespace detail

/// Concordance correlation coefficient 2·cov / (σp² + σt² + (μp − μt)²) with
/// population moments. An optional 0/1 mask selects the frames that count.
template <typename T>
CccResult ccc(std::span<const T> pred, std::span<const T> truth, std::span<const T> mask = {}) {
  const auto m = detail::ccc_moments(pred, truth, mask);
  const T den = m.denominator();
  if (den == T(0)) return {0.0, true};
  return {static_cast<double>(m.numerator() / den), false};
}

template <typename T>
CccResult ccc(const std::vector<T>& pred, const std::vector<T>& truth) {
  return ccc<T>(std::span<const T>(pred), std::span<const T>(truth));
}

/// 1 − CCC(pred, truth) as a differentiable 1x1 node. `pred` is 1 x N; truth
/// and mask are constant 1 x N rows. Masked frames (weight 0) receive exactly
/// zero gradient. Degenerate inputs yield loss 1 and zero gradient.
template <typename T>
Var<T> ccc_loss(Var<T> pred, const Matrix<T>& truth, const Matrix<T>& mask) {
  const Matrix<T>& p = pred.value();
  if (p.rows() != 1 || !p.same_shape(truth) || (!mask.empty() && !mask.same_shape(truth))) {
    throw DimensionError("ccc_loss: expected 1xN prediction, truth and mask, got " + p.shape() + ", " +
                         truth.shape() + ", " + mask.shape());
  }
  const auto m = detail::ccc_moments<T>(p.values(), truth.values(), mask.values());
  const T den = m.denominator();
  const T value = den == T(0) ? T(1) : T(1) - m.numerator() / den;
  return pred.tape->make(Matrix<T>(1, 1, value), {pred}, [pred, truth, mask, m](Tape<T>& t, const Matrix<T>& g) {
    const T den = m.denominator();
    Matrix<T> d(1, truth.cols());
    if (den != T(0)) {
      const T num = m.numerator();
      const Matrix<T>& pv = t.value(pred.id);
      for (std::size_t i = 0; i < d.cols(); ++i) {
        const T w = mask.empty() ? T(1) : mask[i];
        if (w == T(0)) continue;
        const T dnum = T(2) * w * (truth[i] - m.mean_t) / m.n;
        const T dden = T(2) * w * ((pv[i] - m.mean_p) + (m.mean_p - m.mean_t)) / m.n;
        d[i] = -g[0] * (dnum * den - num * dden) / (den * den);
      }
    }
    t.add_grad(pred, d);
  });
}

template <typename T>
Var<T> ccc_loss(Var<T> pred, const Matrix<T>& truth) {
  return ccc_loss(pred, truth, Matrix<T>{});
}

/// Σ over {valence, arousal} of (1 − CCC), for a model predicting both targets.
template <typename T>
Var<T> ccc_loss(Var<T> pred_v, const Matrix<T>& truth_v, Var<T> pred_a, const Matrix<T>& truth_a,
                const Matrix<T>& mask = {}) {
  return add(ccc_loss(pred_v, truth_v, mask), ccc_loss(pred_a, truth_a, mask));
}

/// Per-fold evaluation summary.
struct EvalReport {
  int fold = 0;
  std::string mode;
  int iterations = 1;
  double temperature = 0.1;
  double ccc_valence = 0.0;
  double ccc_arousal = 0.0;
  std::size_t frames = 0;
  bool has_valence = true;
  bool has_arousal = true;

  static std::string csv_header() { return "fold,mode,M,T,ccc_v,ccc_a"; }
};

} // namespace avf
