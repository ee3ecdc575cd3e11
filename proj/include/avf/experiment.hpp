#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "avf/synthdata.hpp"
#include "avf/training.hpp"

namespace avf {

/// Model options that are not implied by the data: dimensions come from the
/// generator and the window length from training.
struct ModelOptions {
  FusionMode mode = FusionMode::HGRJCA;
  int iterations = 3;
  double temperature = 0.1;
  bool joint_projection = true;
  TcnConfig tcn;
  std::vector<std::size_t> head_hidden{32};
  double dropout = 0.5;

  friend bool operator==(const ModelOptions&, const ModelOptions&) = default;
};

struct ExperimentConfig {
  std::string out = "runs/default";
  int threads = 1;
  GenConfig gen;
  ModelOptions model;
  TrainConfig train;

  ModelConfig model_config() const {
    ModelConfig m;
    m.fusion.mode = model.mode;
    m.fusion.iterations = model.iterations;
    m.fusion.temperature = model.temperature;
    m.fusion.joint_projection = model.joint_projection;
    m.fusion.audio_dim = gen.audio_dim;
    m.fusion.visual_dim = gen.visual_dim;
    m.fusion.length = train.window_length;
    m.tcn = model.tcn;
    m.head.hidden = model.head_hidden;
    m.dropout = model.dropout;
    return m;
  }

  void validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    gen.validate();
    train.validate();
    model.tcn.validate();
    if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
    for (auto h : model.head_hidden)
      if (h < 1) throw ConfigError("model.head_hidden widths must be >= 1");
    model_config().fusion.validate();
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

// Binds YAML keys of one mapping to fields; anything unbound is rejected.
class Section {
public:
  Section(const YAML::Node& node, std::string path, const std::string& source)
      : node_(node), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "expected a mapping");
  }

  template <typename V>
  Section& field(const std::string& key, V& out) {
    known_.insert(key);
    if (!node_ || node_.IsNull()) return *this;
    const YAML::Node v = node_[key];
    if (!v) return *this;
    try {
      out = v.as<V>();
    } catch (const YAML::Exception&) {
      fail(v, "invalid value for '" + name(key) + "'");
    }
    return *this;
  }

  template <typename V, typename Parse>
  Section& parsed(const std::string& key, V& out, Parse&& parse) {
    std::string text;
    const bool present = node_ && !node_.IsNull() && node_[key];
    field(key, text);
    if (!present) return *this;
    try {
      out = parse(text);
    } catch (const ConfigError& e) {
      fail(node_[key], e.what());
    }
    return *this;
  }

  Section sub(const std::string& key) {
    known_.insert(key);
    YAML::Node child;
    if (node_ && node_.IsMap() && node_[key]) child = node_[key];
    return Section(child, name(key), source_);
  }

  /// Reject keys that no field() / sub() call claimed.
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known_.count(key)) fail(kv.first, "unknown key '" + name(key) + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
    const auto mark = at.Mark();
    throw ConfigError(source_ + ":" + std::to_string(mark.line + 1) + ": " + what);
  }

private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> known_;
};

inline std::string yaml_real(double v) { return format_real(v); }

inline std::string yaml_string(const std::string& v) {
  YAML::Emitter e;
  e << YAML::DoubleQuoted << v;
  return e.c_str();
}

} // namespace detail

/// Parse YAML text. Every field is optional; unknown keys and ill-typed values
/// raise ConfigError naming the key and line ("<source>:<line>: ...").
inline ExperimentConfig parse_experiment(const std::string& text, const std::string& source = "<config>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ExperimentConfig c;
  detail::Section top(root, "", source);
  top.field("out", c.out).field("threads", c.threads);

  auto gen = top.sub("gen");
  gen.field("num_videos", c.gen.num_videos)
      .field("frames", c.gen.frames)
      .field("audio_dim", c.gen.audio_dim)
      .field("visual_dim", c.gen.visual_dim)
      .field("latent_dim", c.gen.latent_dim)
      .field("smoothness", c.gen.smoothness)
      .field("noise_std", c.gen.noise_std)
      .field("complementarity", c.gen.complementarity)
      .field("corruption_prob", c.gen.corruption_prob)
      .field("burst_length", c.gen.burst_length)
      .parsed("corrupt", c.gen.corrupt, parse_modality)
      .field("seed", c.gen.seed)
      .finish();

  auto model = top.sub("model");
  model.parsed("mode", c.model.mode, parse_fusion_mode)
      .field("iterations", c.model.iterations)
      .field("temperature", c.model.temperature)
      .field("joint_projection", c.model.joint_projection)
      .field("head_hidden", c.model.head_hidden)
      .field("dropout", c.model.dropout);
  auto tcn = model.sub("tcn");
  tcn.field("levels", c.model.tcn.levels)
      .field("kernel_size", c.model.tcn.kernel_size)
      .field("channels", c.model.tcn.channels)
      .field("dilation_base", c.model.tcn.dilation_base)
      .field("bias", c.model.tcn.bias)
      .finish();
  model.finish();

  auto train = top.sub("train");
  train.field("batch_size", c.train.batch_size)
      .field("init_lr", c.train.init_lr)
      .field("min_lr", c.train.min_lr)
      .field("warmup_epochs", c.train.warmup_epochs)
      .field("plateau_patience", c.train.plateau_patience)
      .field("plateau_factor", c.train.plateau_factor)
      .field("weight_decay", c.train.weight_decay)
      .field("max_epochs", c.train.max_epochs)
      .field("early_stop_patience", c.train.early_stop_patience)
      .field("folds", c.train.folds)
      .field("fold", c.train.fold)
      .field("window_length", c.train.window_length)
      .field("window_stride", c.train.window_stride)
      .field("seed", c.train.seed)
      .parsed("target", c.train.target, parse_target)
      .field("adam_beta1", c.train.adam_beta1)
      .field("adam_beta2", c.train.adam_beta2)
      .field("adam_epsilon", c.train.adam_epsilon)
      .finish();
  top.finish();
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment(text, path.string());
}

/// Emit every field. Reals use the shortest round-trip form, so parsing the
/// output reproduces the config exactly.
inline std::string serialize_experiment(const ExperimentConfig& c) {
  using detail::yaml_real;
  std::ostringstream o;
  o << "out: " << detail::yaml_string(c.out) << "\n";
  o << "threads: " << c.threads << "\n";
  o << "gen:\n"
    << "  num_videos: " << c.gen.num_videos << "\n"
    << "  frames: " << c.gen.frames << "\n"
    << "  audio_dim: " << c.gen.audio_dim << "\n"
    << "  visual_dim: " << c.gen.visual_dim << "\n"
    << "  latent_dim: " << c.gen.latent_dim << "\n"
    << "  smoothness: " << yaml_real(c.gen.smoothness) << "\n"
    << "  noise_std: " << yaml_real(c.gen.noise_std) << "\n"
    << "  complementarity: " << yaml_real(c.gen.complementarity) << "\n"
    << "  corruption_prob: " << yaml_real(c.gen.corruption_prob) << "\n"
    << "  burst_length: " << yaml_real(c.gen.burst_length) << "\n"
    << "  corrupt: " << to_string(c.gen.corrupt) << "\n"
    << "  seed: " << c.gen.seed << "\n";
  o << "model:\n"
    << "  mode: " << to_string(c.model.mode) << "\n"
    << "  iterations: " << c.model.iterations << "\n"
    << "  temperature: " << yaml_real(c.model.temperature) << "\n"
    << "  joint_projection: " << (c.model.joint_projection ? "true" : "false") << "\n"
    << "  head_hidden: [";
  for (std::size_t i = 0; i < c.model.head_hidden.size(); ++i) o << (i ? ", " : "") << c.model.head_hidden[i];
  o << "]\n"
    << "  dropout: " << yaml_real(c.model.dropout) << "\n"
    << "  tcn:\n"
    << "    levels: " << c.model.tcn.levels << "\n"
    << "    kernel_size: " << c.model.tcn.kernel_size << "\n"
    << "    channels: " << c.model.tcn.channels << "\n"
    << "    dilation_base: " << c.model.tcn.dilation_base << "\n"
    << "    bias: " << (c.model.tcn.bias ? "true" : "false") << "\n";
  o << "train:\n"
    << "  batch_size: " << c.train.batch_size << "\n"
    << "  init_lr: " << yaml_real(c.train.init_lr) << "\n"
    << "  min_lr: " << yaml_real(c.train.min_lr) << "\n"
    << "  warmup_epochs: " << c.train.warmup_epochs << "\n"
    << "  plateau_patience: " << c.train.plateau_patience << "\n"
    << "  plateau_factor: " << yaml_real(c.train.plateau_factor) << "\n"
    << "  weight_decay: " << yaml_real(c.train.weight_decay) << "\n"
    << "  max_epochs: " << c.train.max_epochs << "\n"
    << "  early_stop_patience: " << c.train.early_stop_patience << "\n"
    << "  folds: " << c.train.folds << "\n"
    << "  fold: " << c.train.fold << "\n"
    << "  window_length: " << c.train.window_length << "\n"
    << "  window_stride: " << c.train.window_stride << "\n"
    << "  seed: " << c.train.seed << "\n"
    << "  target: " << to_string(c.train.target) << "\n"
    << "  adam_beta1: " << yaml_real(c.train.adam_beta1) << "\n"
    << "  adam_beta2: " << yaml_real(c.train.adam_beta2) << "\n"
    << "  adam_epsilon: " << yaml_real(c.train.adam_epsilon) << "\n";
  return o.str();
}

} // namespace avf
