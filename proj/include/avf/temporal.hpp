#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "avf/fusion.hpp"
#include "avf/ops.hpp"

namespace avf {

/// Dilated causal convolution stack. Level i uses dilation base^i.
struct TcnConfig {
  int levels = 2;
  int kernel_size = 3;
  /// 0 means "same as the input dimension" (no input projection).
  std::size_t channels = 0;
  int dilation_base = 2;
  bool bias = true;

  friend bool operator==(const TcnConfig&, const TcnConfig&) = default;

  std::size_t receptive_field() const {
    std::size_t span = 0, dil = 1;
    for (int i = 0; i < levels; ++i, dil *= static_cast<std::size_t>(dilation_base)) {
      span += dil;
    }
    return 1 + static_cast<std::size_t>(kernel_size - 1) * span;
  }

  void validate() const {
    if (levels < 1) throw ConfigError("tcn: levels must be >= 1, got " + std::to_string(levels));
    if (kernel_size < 2) throw ConfigError("tcn: kernel_size must be >= 2, got " + std::to_string(kernel_size));
    if (dilation_base < 1) throw ConfigError("tcn: dilation_base must be >= 1");
  }
};

struct HeadConfig {
  std::vector<std::size_t> hidden{32};
};

template <typename T, typename Rng>
void init_tcn_params(const std::string& prefix, std::size_t input_dim, const TcnConfig& cfg, ModelParams<T>& params,
                     Rng& rng) {
  cfg.validate();
  const std::size_t c = cfg.channels ? cfg.channels : input_dim;
  if (c != input_dim) params.add(prefix + ".in_proj", xavier_uniform<T>(c, input_dim, rng));
  const double limit = std::sqrt(6.0 / static_cast<double>(c * static_cast<std::size_t>(cfg.kernel_size) + c));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (int l = 0; l < cfg.levels; ++l) {
    for (int k = 0; k < cfg.kernel_size; ++k) {
      Matrix<T> w(c, c);
      for (auto& v : w.values()) v = static_cast<T>(u(rng));
      params.add(prefix + ".l" + std::to_string(l) + ".k" + std::to_string(k), std::move(w));
    }
    if (cfg.bias) params.add(prefix + ".l" + std::to_string(l) + ".b", Matrix<T>(c, 1));
  }
}

/// x_{l+1} = x_l + ReLU(Σ_k W_k · delay(x_l, k·dilation) + b). Output frame i
/// depends only on input frames <= i; length is preserved by zero left-padding.
template <typename T>
Var<T> tcn_forward(Var<T> x, const std::string& prefix, const TcnConfig& cfg, ModelParams<T>& params) {
  cfg.validate();
  if (x.cols() < 1) throw DimensionError("tcn: sequence length must be >= 1");
  Tape<T>& tape = *x.tape;
  if (params.contains(prefix + ".in_proj")) x = matmul(tape.param(params.at(prefix + ".in_proj")), x);
  std::size_t dil = 1;
  for (int l = 0; l < cfg.levels; ++l, dil *= static_cast<std::size_t>(cfg.dilation_base)) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    Var<T> y = matmul(tape.param(params.at(lp + ".k0")), x);
    for (int k = 1; k < cfg.kernel_size; ++k) {
      const std::size_t delay = static_cast<std::size_t>(k) * dil;
      y = add(y, matmul(tape.param(params.at(lp + ".k" + std::to_string(k))), shift_right(x, delay)));
    }
    if (cfg.bias) y = add_col_bias(y, tape.param(params.at(lp + ".b")));
    x = add(x, relu(y));
  }
  return x;
}

template <typename T, typename Rng>
void init_head_params(std::size_t input_dim, const HeadConfig& cfg, ModelParams<T>& params, Rng& rng) {
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    params.add("head.W" + std::to_string(i), xavier_uniform<T>(cfg.hidden[i], in, rng));
    params.add("head.b" + std::to_string(i), Matrix<T>(cfg.hidden[i], 1));
    in = cfg.hidden[i];
  }
  params.add("head.W_out", xavier_uniform<T>(1, in, rng));
  params.add("head.b_out", Matrix<T>(1, 1));
}

/// Per-frame MLP: ReLU hidden layers, then tanh to a 1 x L prediction in [−1, 1].
template <typename T>
Var<T> head_forward(Var<T> fused, const HeadConfig& cfg, ModelParams<T>& params) {
  Tape<T>& tape = *fused.tape;
  Var<T> h = fused;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    const std::string n = std::to_string(i);
    h = relu(add_col_bias(matmul(tape.param(params.at("head.W" + n)), h), tape.param(params.at("head.b" + n))));
  }
  return tanh(add_col_bias(matmul(tape.param(params.at("head.W_out")), h), tape.param(params.at("head.b_out"))));
}

/// Inverted-dropout keep mask: entries are 0 or 1 / (1 − rate).
template <typename T, typename Rng>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1)");
  Matrix<T> m(rows, cols, T(1));
  if (rate == 0.0) return m;
  std::bernoulli_distribution keep(1.0 - rate);
  const T s = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& v : m.values()) v = keep(rng) ? s : T(0);
  return m;
}

template <typename T>
Var<T> apply_mask(Var<T> x, const Matrix<T>& mask) {
  return mul(x, x.tape->constant(mask));
}

} // namespace avf
