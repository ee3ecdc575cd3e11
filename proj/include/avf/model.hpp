#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <type_traits>

#include "avf/fusion.hpp"
#include "avf/temporal.hpp"

namespace avf {

/// Per-modality TCN encoders, fusion, dropout on the fused features, MLP head.
struct ModelConfig {
  FusionConfig fusion;
  TcnConfig tcn;
  HeadConfig head;
  /// Inverted dropout on the attended features during training.
  double dropout = 0.5;

  /// Fusion geometry after the encoders (TCN channels override input dims).
  FusionConfig encoded_fusion() const {
    FusionConfig fc = fusion;
    if (tcn.channels) {
      fc.audio_dim = tcn.channels;
      fc.visual_dim = tcn.channels;
    }
    return fc;
  }
};

template <typename T>
ModelParams<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.fusion.validate();
  std::mt19937_64 rng(seed);
  ModelParams<T> params;
  init_tcn_params<T>("tcn_a", cfg.fusion.audio_dim, cfg.tcn, params, rng);
  init_tcn_params<T>("tcn_v", cfg.fusion.visual_dim, cfg.tcn, params, rng);
  const FusionConfig fc = cfg.encoded_fusion();
  init_fusion_params<T>(fc, params, rng);
  init_head_params<T>(fc.joint_dim(), cfg.head, params, rng);
  return params;
}

template <typename T>
struct ModelOutput {
  FusionState<T> fusion;
  Var<T> prediction;  // 1 x L
};

namespace detail {

template <typename T>
Var<T> zero_invalid_frames(Var<T> x, std::span<const std::uint8_t> valid) {
  Matrix<T> keep(x.rows(), x.cols(), T(1));
  for (std::size_t f = 0; f < valid.size(); ++f)
    if (!valid[f])
      for (std::size_t i = 0; i < keep.rows(); ++i) keep(i, f) = T(0);
  return apply_mask(x, keep);
}

} // namespace detail

/// Forward one clip. `dropout` is the keep mask for the fused features, or
/// nullopt at evaluation time. Frames flagged invalid (padding) are zeroed
/// before and after the encoders so they cannot reach valid frames through
/// attention.
template <typename T>
ModelOutput<T> model_forward(Var<T> audio, Var<T> visual, const ModelConfig& cfg, ModelParams<T>& params,
                             const std::optional<std::type_identity_t<Matrix<T>>>& dropout = std::nullopt,
                             std::span<const std::uint8_t> valid = {}) {
  const FusionConfig fc = cfg.encoded_fusion();
  if (!valid.empty() && valid.size() != audio.cols()) {
    throw DimensionError("model: validity mask has " + std::to_string(valid.size()) + " frames, features have " +
                         std::to_string(audio.cols()));
  }
  const bool padded = std::find(valid.begin(), valid.end(), std::uint8_t{0}) != valid.end();
  if (padded) {
    audio = detail::zero_invalid_frames(audio, valid);
    visual = detail::zero_invalid_frames(visual, valid);
  }
  Var<T> ea = tcn_forward(audio, "tcn_a", cfg.tcn, params);
  Var<T> ev = tcn_forward(visual, "tcn_v", cfg.tcn, params);
  if (padded) {
    ea = detail::zero_invalid_frames(ea, valid);
    ev = detail::zero_invalid_frames(ev, valid);
  }
  ModelOutput<T> out{fusion_forward(ea, ev, params, fc), {}};
  Var<T> fused = out.fusion.fused;
  if (dropout) fused = apply_mask(fused, *dropout);
  out.prediction = head_forward(fused, cfg.head, params);
  return out;
}

} // namespace avf
