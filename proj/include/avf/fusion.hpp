#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avf/ops.hpp"

namespace avf {

enum class FusionMode { JCA, RJCA, GRJCA, HGRJCA };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::JCA: return "JCA";
    case FusionMode::RJCA: return "RJCA";
    case FusionMode::GRJCA: return "GRJCA";
    case FusionMode::HGRJCA: return "HGRJCA";
  }
  return "?";
}

inline FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "JCA" || s == "jca") return FusionMode::JCA;
  if (s == "RJCA" || s == "rjca") return FusionMode::RJCA;
  if (s == "GRJCA" || s == "grjca") return FusionMode::GRJCA;
  if (s == "HGRJCA" || s == "hgrjca") return FusionMode::HGRJCA;
  throw ConfigError("unknown fusion mode '" + std::string(s) + "' (expected JCA, RJCA, GRJCA or HGRJCA)");
}

struct FusionConfig {
  FusionMode mode = FusionMode::RJCA;
  std::size_t audio_dim = 16;
  std::size_t visual_dim = 16;
  /// Frames per window; the L x L attention weights are tied to it.
  std::size_t length = 64;
  /// Recursion depth M.
  int iterations = 3;
  /// Gate softmax temperature T.
  double temperature = 0.1;
  /// Learnable d x d map after concatenating the modalities.
  bool joint_projection = true;

  std::size_t joint_dim() const noexcept { return audio_dim + visual_dim; }

  void validate() const {
    if (iterations < 1) throw ConfigError("fusion: iterations (M) must be >= 1, got " + std::to_string(iterations));
    if (!(temperature > 0.0)) throw ConfigError("fusion: temperature must be > 0");
    if (audio_dim == 0 || visual_dim == 0 || length == 0) throw ConfigError("fusion: dimensions must be >= 1");
    if (mode == FusionMode::JCA && iterations != 1) {
      throw ConfigError("fusion: JCA is the single-pass model and requires M = 1, got M = " +
                        std::to_string(iterations));
    }
  }
};

namespace fusion_names {
inline std::string iter(int t, std::string_view w) { return "fusion.t" + std::to_string(t) + "." + std::string(w); }
inline std::string grjca_gate(char modality) { return std::string("fusion.gate.W_gl_") + modality; }
inline std::string hgrjca_gate(int t, char modality) { return iter(t, std::string("W_gl_") + modality); }
inline std::string hgrjca_final(char modality) { return std::string("fusion.final_gate.W_") + modality; }
inline std::string grjca_gate_bias(char modality) { return std::string("fusion.gate.b_gl_") + modality; }
inline std::string hgrjca_gate_bias(int t, char modality) { return iter(t, std::string("b_gl_") + modality); }
inline std::string hgrjca_final_bias(char modality) { return std::string("fusion.final_gate.b_") + modality; }
} // namespace fusion_names

template <typename T, typename Rng>
Matrix<T> xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix<T> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<T>(u(rng));
  return m;
}

/// Register every fusion weight for `cfg` in `params`. Attention and joint
/// weights are Xavier-uniform; gate weights and biases start at zero so every
/// gate begins uniform.
template <typename T, typename Rng>
void init_fusion_params(const FusionConfig& cfg, ModelParams<T>& params, Rng& rng) {
  cfg.validate();
  const std::size_t da = cfg.audio_dim, dv = cfg.visual_dim, d = cfg.joint_dim(), L = cfg.length;
  const int M = cfg.iterations;
  for (int t = 1; t <= M; ++t) {
    using fusion_names::iter;
    if (cfg.joint_projection) params.add(iter(t, "W_joint"), xavier_uniform<T>(d, d, rng));
    params.add(iter(t, "W_ja"), xavier_uniform<T>(da, d, rng));
    params.add(iter(t, "W_jv"), xavier_uniform<T>(dv, d, rng));
    params.add(iter(t, "W_ca"), xavier_uniform<T>(L, L, rng));
    params.add(iter(t, "W_cv"), xavier_uniform<T>(L, L, rng));
    // H sums L attention-weighted frames, so the residual maps start 1/sqrt(L)
    // below Xavier scale; otherwise the attended features begin as noise
    // several times larger than the input they are added to.
    const T shrink = T(1) / std::sqrt(static_cast<T>(L));
    params.add(iter(t, "W_ha"), scale(xavier_uniform<T>(L, L, rng), shrink));
    params.add(iter(t, "W_hv"), scale(xavier_uniform<T>(L, L, rng), shrink));
  }
  const auto m = static_cast<std::size_t>(M);
  if (cfg.mode == FusionMode::GRJCA) {
    params.add(fusion_names::grjca_gate('a'), Matrix<T>(da, m + 1));
    params.add(fusion_names::grjca_gate_bias('a'), Matrix<T>(m + 1, 1));
    params.add(fusion_names::grjca_gate('v'), Matrix<T>(dv, m + 1));
    params.add(fusion_names::grjca_gate_bias('v'), Matrix<T>(m + 1, 1));
  } else if (cfg.mode == FusionMode::HGRJCA) {
    for (int t = 1; t <= M; ++t) {
      params.add(fusion_names::hgrjca_gate(t, 'a'), Matrix<T>(da, 2));
      params.add(fusion_names::hgrjca_gate_bias(t, 'a'), Matrix<T>(2, 1));
      params.add(fusion_names::hgrjca_gate(t, 'v'), Matrix<T>(dv, 2));
      params.add(fusion_names::hgrjca_gate_bias(t, 'v'), Matrix<T>(2, 1));
    }
    params.add(fusion_names::hgrjca_final('a'), Matrix<T>(da, m));
    params.add(fusion_names::hgrjca_final_bias('a'), Matrix<T>(m, 1));
    params.add(fusion_names::hgrjca_final('v'), Matrix<T>(dv, m));
    params.add(fusion_names::hgrjca_final_bias('v'), Matrix<T>(m, 1));
  }
}

/// Intermediates of one recursion step.
template <typename T>
struct IterationState {
  Var<T> joint;          // J, d x L
  Var<T> corr_audio;     // C_a, L x L
  Var<T> corr_visual;    // C_v, L x L
  Var<T> map_audio;      // H_a, d_a x L
  Var<T> map_visual;     // H_v, d_v x L
  Var<T> att_audio;      // X_att,a, d_a x L
  Var<T> att_visual;     // X_att,v, d_v x L
  // HGRJCA only: two-way gate scores (L x 2) and gated features.
  std::optional<Var<T>> gate_audio, gate_visual;
  std::optional<Var<T>> gated_audio, gated_visual;
};

template <typename T>
struct FusionState {
  Var<T> input_audio;  // X_a at t = 0
  Var<T> input_visual;
  std::vector<IterationState<T>> iterations;
  // GRJCA: L x (M+1) scores. HGRJCA: final-gate L x M scores.
  std::optional<Var<T>> gate_audio, gate_visual;
  Var<T> out_audio;  // final per-modality features fed to the head
  Var<T> out_visual;
  Var<T> fused;      // [out_audio; out_visual], d x L
};

namespace detail {

template <typename T>
void require_finite(Var<T> v, const char* what, int t) {
  if (!v.value().all_finite()) {
    throw NumericError(std::string("fusion: non-finite ") + what + " at iteration " + std::to_string(t));
  }
}

template <typename T>
void check_inputs(Var<T> xa, Var<T> xv, const FusionConfig& cfg) {
  if (xa.rows() != cfg.audio_dim || xv.rows() != cfg.visual_dim || xa.cols() != cfg.length ||
      xv.cols() != cfg.length) {
    throw DimensionError("fusion: expected audio " + Matrix<T>::shape_string(cfg.audio_dim, cfg.length) +
                         " and visual " + Matrix<T>::shape_string(cfg.visual_dim, cfg.length) + ", got " +
                         xa.value().shape() + " and " + xv.value().shape());
  }
}

} // namespace detail

/// J = W_joint·[X_a; X_v] (or the bare concatenation when the projection is off).
template <typename T>
Var<T> joint_representation(Var<T> xa, Var<T> xv, ModelParams<T>& params, const FusionConfig& cfg, int t) {
  Var<T> j = concat_rows(xa, xv);
  if (!cfg.joint_projection) return j;
  return matmul(xa.tape->param(params.at(fusion_names::iter(t, "W_joint"))), j);
}

/// C_a = tanh(X_aᵀ W_ja J / √d), C_v likewise; both L x L.
template <typename T>
std::pair<Var<T>, Var<T>> joint_correlation(Var<T> xa, Var<T> xv, Var<T> joint, ModelParams<T>& params,
                                            const FusionConfig& cfg, int t) {
  Tape<T>& tape = *xa.tape;
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(cfg.joint_dim()));
  auto corr = [&](Var<T> x, const char* w) {
    Var<T> xw = matmul_tn(x, tape.param(params.at(fusion_names::iter(t, w))));  // L x d
    return tanh(scale(matmul(xw, joint), inv_sqrt_d));
  };
  return {corr(xa, "W_ja"), corr(xv, "W_jv")};
}

/// H_a = ReLU(X_a W_ca C_a), H_v likewise.
template <typename T>
std::pair<Var<T>, Var<T>> attention_maps(Var<T> xa, Var<T> xv, Var<T> ca, Var<T> cv, ModelParams<T>& params,
                                         int t) {
  Tape<T>& tape = *xa.tape;
  auto map = [&](Var<T> x, Var<T> c, const char* w) {
    return relu(matmul(matmul(x, tape.param(params.at(fusion_names::iter(t, w)))), c));
  };
  return {map(xa, ca, "W_ca"), map(xv, cv, "W_cv")};
}

/// X_att^(t) = H^(t) W_h^(t) + X^(t−1).
template <typename T>
std::pair<Var<T>, Var<T>> attended_features(Var<T> xa_prev, Var<T> xv_prev, Var<T> ha, Var<T> hv,
                                            ModelParams<T>& params, int t) {
  Tape<T>& tape = *xa_prev.tape;
  auto att = [&](Var<T> h, Var<T> prev, const char* w) {
    return add(matmul(h, tape.param(params.at(fusion_names::iter(t, w)))), prev);
  };
  return {att(ha, xa_prev, "W_ha"), att(hv, xv_prev, "W_hv")};
}

/// One joint cross-attention pass (iteration t) on the current features.
template <typename T>
IterationState<T> jca_step(Var<T> xa, Var<T> xv, ModelParams<T>& params, const FusionConfig& cfg, int t) {
  IterationState<T> s;
  s.joint = joint_representation(xa, xv, params, cfg, t);
  std::tie(s.corr_audio, s.corr_visual) = joint_correlation(xa, xv, s.joint, params, cfg, t);
  std::tie(s.map_audio, s.map_visual) = attention_maps(xa, xv, s.corr_audio, s.corr_visual, params, t);
  std::tie(s.att_audio, s.att_visual) = attended_features(xa, xv, s.map_audio, s.map_visual, params, t);
  detail::require_finite(s.att_audio, "audio attended features", t);
  detail::require_finite(s.att_visual, "visual attended features", t);
  return s;
}

/// Run M recursions, rebuilding J from the previous step's attended features.
/// The returned state's outputs are the last attended features.
template <typename T>
FusionState<T> rjca_forward(Var<T> xa, Var<T> xv, ModelParams<T>& params, const FusionConfig& cfg) {
  cfg.validate();
  detail::check_inputs(xa, xv, cfg);
  FusionState<T> st;
  st.input_audio = xa;
  st.input_visual = xv;
  Var<T> a = xa, v = xv;
  for (int t = 1; t <= cfg.iterations; ++t) {
    st.iterations.push_back(jca_step(a, v, params, cfg, t));
    a = st.iterations.back().att_audio;
    v = st.iterations.back().att_visual;
  }
  st.out_audio = a;
  st.out_visual = v;
  return st;
}

/// ReLU(Σ_k candidate_k ⊗ replicate(scores[:, k])) where scores is L x K.
template <typename T>
Var<T> gated_sum(const std::vector<Var<T>>& candidates, Var<T> scores) {
  if (candidates.size() != scores.cols()) {
    throw DimensionError("gate: " + std::to_string(candidates.size()) + " candidates but score matrix is " +
                         scores.value().shape());
  }
  const std::size_t rows = candidates.front().rows();
  Var<T> acc = mul(candidates[0], replicate_column(scores, 0, rows));
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    acc = add(acc, mul(candidates[k], replicate_column(scores, k, rows)));
  }
  return relu(acc);
}

/// softmax_T((X)ᵀ W) per frame: L x K gate scores.
template <typename T>
Var<T> gate_scores(Var<T> features, Var<T> weights, T temperature) {
  if (features.rows() != weights.rows()) {
    throw DimensionError("gate: feature rows " + std::to_string(features.rows()) + " do not match gate weights " +
                         weights.value().shape());
  }
  return softmax_temp(matmul_tn(features, weights), temperature, Axis::Rows);
}

/// softmax_T((X)ᵀ W + 1·bᵀ) per frame, with one bias per candidate (K x 1).
template <typename T>
Var<T> gate_scores(Var<T> features, Var<T> weights, Var<T> bias, T temperature) {
  if (features.rows() != weights.rows()) {
    throw DimensionError("gate: feature rows " + std::to_string(features.rows()) + " do not match gate weights " +
                         weights.value().shape());
  }
  Var<T> logits = transpose(add_col_bias(matmul_tn(weights, features), bias));
  return softmax_temp(logits, temperature, Axis::Rows);
}

/// GRJCA: gate the unattended input (t = 0) and every iteration's attended
/// features with scores computed from the last iteration's features.
template <typename T>
std::pair<Var<T>, Var<T>> grjca_gate(FusionState<T>& st, ModelParams<T>& params, const FusionConfig& cfg) {
  Tape<T>& tape = *st.input_audio.tape;
  const T temp = static_cast<T>(cfg.temperature);
  auto side = [&](char m, Var<T> input, auto member) {
    Param<T>& w = params.at(fusion_names::grjca_gate(m));
    if (w.value.cols() != st.iterations.size() + 1) {
      throw DimensionError("grjca_gate: gate weights " + w.value.shape() + " need " +
                           std::to_string(st.iterations.size() + 1) + " columns (M+1)");
    }
    std::vector<Var<T>> cand{input};
    for (auto& it : st.iterations) cand.push_back(it.*member);
    Var<T> scores = gate_scores(cand.back(), tape.param(w), tape.param(params.at(fusion_names::grjca_gate_bias(m))), temp);
    return std::make_pair(scores, gated_sum(cand, scores));
  };
  auto [ga, xa] = side('a', st.input_audio, &IterationState<T>::att_audio);
  auto [gv, xv] = side('v', st.input_visual, &IterationState<T>::att_visual);
  st.gate_audio = ga;
  st.gate_visual = gv;
  return {xa, xv};
}

/// HGRJCA per-iteration gate: ReLU(X^(t−1) ⊗ G0 + X^(t) ⊗ G1), scores from X^(t).
/// Returns (scores L x 2, gated features).
template <typename T>
std::pair<Var<T>, Var<T>> hgrjca_iteration_gate(Var<T> prev, Var<T> cur, Var<T> gate_weights, Var<T> gate_bias,
                                                T temperature) {
  if (gate_weights.cols() != 2) {
    throw DimensionError("hgrjca_iteration_gate: gate weights must have 2 columns, got " +
                         gate_weights.value().shape());
  }
  Var<T> scores = gate_scores(cur, gate_weights, gate_bias, temperature);
  return {scores, gated_sum<T>({prev, cur}, scores)};
}

/// HGRJCA high-level gate over the M per-iteration gated features. Scores come
/// from the elementwise sum of the gated features through a d x M layer.
template <typename T>
std::pair<Var<T>, Var<T>> hgrjca_final_gate(const std::vector<Var<T>>& gated, Var<T> final_weights, Var<T> final_bias,
                                            T temperature) {
  if (gated.empty()) throw DimensionError("hgrjca_final_gate: no gated features");
  if (final_weights.cols() != gated.size()) {
    throw DimensionError("hgrjca_final_gate: final gate weights " + final_weights.value().shape() + " need " +
                         std::to_string(gated.size()) + " columns (M)");
  }
  Var<T> total = gated.front();
  for (std::size_t k = 1; k < gated.size(); ++k) total = add(total, gated[k]);
  Var<T> scores = gate_scores(total, final_weights, final_bias, temperature);
  return {scores, gated_sum(gated, scores)};
}

/// Full fusion for the configured mode. Returns every intermediate; `fused` is
/// the (d_a + d_v) x L input of the prediction head.
template <typename T>
FusionState<T> fusion_forward(Var<T> xa, Var<T> xv, ModelParams<T>& params, const FusionConfig& cfg) {
  FusionState<T> st = rjca_forward(xa, xv, params, cfg);
  Tape<T>& tape = *xa.tape;
  const T temp = static_cast<T>(cfg.temperature);
  switch (cfg.mode) {
    case FusionMode::JCA:
    case FusionMode::RJCA:
      break;
    case FusionMode::GRJCA:
      std::tie(st.out_audio, st.out_visual) = grjca_gate(st, params, cfg);
      break;
    case FusionMode::HGRJCA: {
      std::vector<Var<T>> ga, gv;
      Var<T> prev_a = st.input_audio, prev_v = st.input_visual;
      for (int t = 1; t <= cfg.iterations; ++t) {
        auto& it = st.iterations[static_cast<std::size_t>(t - 1)];
        auto [sa, xa_g] = hgrjca_iteration_gate(prev_a, it.att_audio,
                                                tape.param(params.at(fusion_names::hgrjca_gate(t, 'a'))),
                                                tape.param(params.at(fusion_names::hgrjca_gate_bias(t, 'a'))), temp);
        auto [sv, xv_g] = hgrjca_iteration_gate(prev_v, it.att_visual,
                                                tape.param(params.at(fusion_names::hgrjca_gate(t, 'v'))),
                                                tape.param(params.at(fusion_names::hgrjca_gate_bias(t, 'v'))), temp);
        it.gate_audio = sa;
        it.gate_visual = sv;
        it.gated_audio = xa_g;
        it.gated_visual = xv_g;
        ga.push_back(xa_g);
        gv.push_back(xv_g);
        prev_a = it.att_audio;
        prev_v = it.att_visual;
      }
      auto [fa, out_a] = hgrjca_final_gate(ga, tape.param(params.at(fusion_names::hgrjca_final('a'))),
                                           tape.param(params.at(fusion_names::hgrjca_final_bias('a'))), temp);
      auto [fv, out_v] = hgrjca_final_gate(gv, tape.param(params.at(fusion_names::hgrjca_final('v'))),
                                           tape.param(params.at(fusion_names::hgrjca_final_bias('v'))), temp);
      st.gate_audio = fa;
      st.gate_visual = fv;
      st.out_audio = out_a;
      st.out_visual = out_v;
      break;
    }
  }
  st.fused = concat_rows(st.out_audio, st.out_visual);
  return st;
}

} // namespace avf
