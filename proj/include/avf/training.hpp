#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "avf/csv.hpp"
#include "avf/metrics.hpp"
#include "avf/model.hpp"
#include "avf/parallel.hpp"
#include "avf/synthdata.hpp"

namespace avf {

enum class Target { Valence, Arousal };

inline std::string to_string(Target t) { return t == Target::Valence ? "valence" : "arousal"; }

inline Target parse_target(std::string_view s) {
  if (s == "valence") return Target::Valence;
  if (s == "arousal") return Target::Arousal;
  throw ConfigError("unknown target '" + std::string(s) + "' (expected valence or arousal)");
}

struct TrainConfig {
  std::size_t batch_size = 12;
  double init_lr = 1e-4;
  double min_lr = 1e-8;
  /// Epochs 0..warmup_epochs-1 each ramp the lr linearly from init_lr/B to init_lr over their B batches.
  int warmup_epochs = 5;
  int plateau_patience = 5;
  double plateau_factor = 0.1;
  double weight_decay = 5e-4;
  int max_epochs = 100;
  int early_stop_patience = 10;
  int folds = 6;
  /// Validation fold for a single train run.
  int fold = 0;
  std::size_t window_length = 64;
  std::size_t window_stride = 43;
  std::uint64_t seed = 1;
  Target target = Target::Valence;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(init_lr > 0.0)) throw ConfigError("train: init_lr must be > 0");
    if (!(min_lr >= 0.0 && min_lr <= init_lr)) throw ConfigError("train: min_lr must lie in [0, init_lr]");
    if (warmup_epochs < 0) throw ConfigError("train: warmup_epochs must be >= 0");
    if (plateau_patience < 1) throw ConfigError("train: plateau_patience must be >= 1");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("train: plateau_factor must lie in (0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("train: early_stop_patience must be >= 1");
    if (folds < 2) throw ConfigError("train: folds must be >= 2");
    if (fold < 0 || fold >= folds) throw ConfigError("train: fold must lie in [0, folds)");
    if (window_length < 1 || window_stride < 1) throw ConfigError("train: window length/stride must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      throw ConfigError("train: adam betas must lie in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("train: adam_epsilon must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Optimizer

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> first;
  std::vector<Matrix<T>> second;
  std::int64_t steps = 0;
};

/// One Adam step with bias correction. Weight decay is the classic L2 form:
/// decay·θ is added to the gradient before the moment updates.
template <typename T>
void adam_step(ModelParams<T>& params, AdamState<T>& state, double lr, double weight_decay, double beta1 = 0.9,
               double beta2 = 0.999, double epsilon = 1e-8) {
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.value.rows(), p.value.cols());
      state.second.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  if (state.first.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match params");
  for (const auto& p : params) {
    if (!p.grad.all_finite()) throw NumericError("adam_step: non-finite gradient in '" + p.name + "'");
  }
  ++state.steps;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.steps));
  std::size_t i = 0;
  for (auto& p : params) {
    Matrix<T>& m = state.first[i];
    Matrix<T>& v = state.second[i];
    ++i;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = static_cast<double>(p.grad[k]) + weight_decay * static_cast<double>(p.value[k]);
      const double mk = beta1 * static_cast<double>(m[k]) + (1.0 - beta1) * g;
      const double vk = beta2 * static_cast<double>(v[k]) + (1.0 - beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p.value[k] -= static_cast<T>(lr * (mk / c1) / (std::sqrt(vk / c2) + epsilon));
    }
  }
}

// ---------------------------------------------------------------------------
// Learning-rate schedule

/// Warmup, then reduce-on-plateau on validation CCC.
///
/// During the first `warmup_epochs` epochs the rate ramps linearly within each
/// epoch up to init_lr. Afterwards the rate starts at init_lr and is multiplied
/// by `factor` (clamped at min_lr) whenever `patience` consecutive epochs pass
/// without a strictly higher validation CCC. Plateau tracking starts with the
/// first post-warmup epoch.
class LrSchedule {
public:
  explicit LrSchedule(const TrainConfig& cfg) : cfg_(cfg), lr_(cfg.init_lr) {}

  bool in_warmup() const noexcept { return epoch_ < cfg_.warmup_epochs; }
  int epoch() const noexcept { return epoch_; }
  int drops() const noexcept { return drops_; }
  int bad_epochs() const noexcept { return bad_; }
  double best() const noexcept { return best_; }

  /// Rate for batch `batch` of `batches` in the current epoch.
  double lr(std::size_t batch, std::size_t batches) const {
    if (in_warmup() && batches > 0) {
      return cfg_.init_lr * static_cast<double>(batch + 1) / static_cast<double>(batches);
    }
    return lr_;
  }

  /// Peak rate of the current epoch.
  double epoch_lr() const noexcept { return in_warmup() ? cfg_.init_lr : lr_; }

  /// Close the current epoch; returns the rate for the next one.
  double end_epoch(double val_ccc) {
    if (!in_warmup()) {
      if (val_ccc > best_) {
        best_ = val_ccc;
        bad_ = 0;
      } else if (++bad_ >= cfg_.plateau_patience) {
        lr_ = std::max(lr_ * cfg_.plateau_factor, cfg_.min_lr);
        bad_ = 0;
        ++drops_;
      }
    }
    ++epoch_;
    return epoch_lr();
  }

private:
  TrainConfig cfg_;
  double lr_;
  double best_ = -std::numeric_limits<double>::infinity();
  int epoch_ = 0;
  int bad_ = 0;
  int drops_ = 0;
};

/// Functional form: advance `state` by one epoch with the observed validation CCC.
inline double scheduler_step(LrSchedule& state, double val_ccc) { return state.end_epoch(val_ccc); }

// ---------------------------------------------------------------------------
// Evaluation

struct PredictionRow {
  std::string clip;
  std::size_t frame = 0;
  double pred = 0.0;
  double truth = 0.0;
};

struct Evaluation {
  CccResult ccc;
  std::size_t frames = 0;
  std::vector<PredictionRow> predictions;
};

inline const std::vector<double>& target_labels(const LabeledClip& c, Target t) {
  return t == Target::Valence ? c.valence : c.arousal;
}

template <typename T>
Matrix<T> to_matrix(const Matrix<double>& m) {
  if constexpr (std::is_same_v<T, double>) {
    return m;
  } else {
    Matrix<T> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = static_cast<T>(m[i]);
    return out;
  }
}

/// Pooled CCC over the valid frames of every clip (no dropout). Clips are
/// scored on up to `threads` workers and pooled in input order, so the result
/// does not depend on the thread count.
template <typename T>
Evaluation evaluate(const std::vector<LabeledClip>& clips, const ModelConfig& model, ModelParams<T>& params,
                    Target target, int threads = 1) {
  std::vector<Matrix<T>> outputs(clips.size());
  parallel_for(clips.size(), threads, [&](std::size_t i) {
    const auto& c = clips[i];
    Tape<T> tape(false);
    outputs[i] = model_forward(tape.constant(to_matrix<T>(c.audio)), tape.constant(to_matrix<T>(c.visual)), model,
                               params, std::nullopt, c.valid)
                     .prediction.value();
  });
  Evaluation ev;
  std::vector<double> pred, truth;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& c = clips[i];
    const Matrix<T>& p = outputs[i];
    const auto& y = target_labels(c, target);
    for (std::size_t f = 0; f < c.length(); ++f) {
      if (!c.valid[f]) continue;
      pred.push_back(static_cast<double>(p[f]));
      truth.push_back(y[f]);
      ev.predictions.push_back({c.id, c.start + f, pred.back(), truth.back()});
    }
  }
  ev.frames = pred.size();
  if (ev.frames < 2) throw ConfigError("evaluate: need at least 2 valid frames");
  ev.ccc = ccc(pred, truth);
  return ev;
}

// ---------------------------------------------------------------------------
// Training loop

struct HistoryRow {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_ccc = 0.0;
};

inline std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string out = "epoch,lr,train_loss,val_ccc\n";
  for (const auto& r : rows) {
    out += csv_row({std::to_string(r.epoch), format_real(r.lr), format_real(r.train_loss), format_real(r.val_ccc)});
  }
  return out;
}

inline std::string predictions_csv(const std::vector<PredictionRow>& rows) {
  std::string out = "clip,frame,pred,truth\n";
  for (const auto& r : rows) {
    out += csv_row({r.clip, std::to_string(r.frame), format_real(r.pred), format_real(r.truth)});
  }
  return out;
}

template <typename T>
struct TrainResult {
  ModelParams<T> params;  // best-validation snapshot
  std::vector<HistoryRow> history;
  double best_val_ccc = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  Evaluation validation;  // of the restored snapshot
};

/// Loss and gradients of one mini-batch: 1 − CCC pooled over the valid frames
/// of all clips in the batch. Gradients are accumulated into params.
template <typename T, typename Rng>
double batch_gradients(const std::vector<const LabeledClip*>& batch, const ModelConfig& model, ModelParams<T>& params,
                       Target target, Rng& rng, bool use_dropout = true) {
  Tape<T> tape;
  std::vector<Var<T>> preds;
  std::size_t total = 0;
  for (const auto* c : batch) total += c->length();
  Matrix<T> truth(1, total), mask(1, total);
  std::size_t off = 0;
  const FusionConfig fc = model.encoded_fusion();
  for (const auto* c : batch) {
    std::optional<Matrix<T>> drop;
    if (use_dropout && model.dropout > 0.0) {
      drop = dropout_mask<T>(fc.joint_dim(), c->length(), model.dropout, rng);
    }
    auto out = model_forward(tape.constant(to_matrix<T>(c->audio)), tape.constant(to_matrix<T>(c->visual)), model,
                             params, drop, c->valid);
    preds.push_back(out.prediction);
    const auto& y = target_labels(*c, target);
    for (std::size_t f = 0; f < c->length(); ++f, ++off) {
      truth[off] = static_cast<T>(y[f]);
      mask[off] = c->valid[f] ? T(1) : T(0);
    }
  }
  Var<T> loss = ccc_loss(concat_cols(preds), truth, mask);
  tape.backward(loss);
  return static_cast<double>(loss.value()[0]);
}

/// Train on `train` and select the epoch with the best pooled validation CCC
/// on `val`. Deterministic given (data, configs); `threads` only spreads
/// validation scoring across workers.
template <typename T = double>
TrainResult<T> train(const std::vector<LabeledClip>& train_set, const std::vector<LabeledClip>& val_set,
                     const ModelConfig& model, const TrainConfig& cfg, int threads = 1) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training split");
  if (val_set.empty()) throw ConfigError("train: empty validation split");
  for (const auto* split : {&train_set, &val_set}) {
    for (const auto& c : *split) {
      if (c.length() != model.fusion.length) {
        throw ConfigError("train: clip '" + c.id + "' has " + std::to_string(c.length()) +
                          " frames but the model expects L = " + std::to_string(model.fusion.length));
      }
    }
  }

  TrainResult<T> result;
  result.params = init_model<T>(model, splitmix64(cfg.seed ^ 0x1a7e57ULL));
  ModelParams<T> params = result.params;
  AdamState<T> adam;
  LrSchedule schedule(cfg);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xba7c4ULL));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const LabeledClip*> batch;
      std::size_t valid = 0;
      for (std::size_t i = b * cfg.batch_size; i < std::min(order.size(), (b + 1) * cfg.batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
        valid += batch.back()->valid_frames();
      }
      if (valid < 2) continue;
      params.zero_grad();
      loss_sum += batch_gradients(batch, model, params, cfg.target, rng);
      ++counted;
      adam_step(params, adam, schedule.lr(b, batches), cfg.weight_decay, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_epsilon);
    }
    const double epoch_lr = schedule.epoch_lr();
    const double val = evaluate(val_set, model, params, cfg.target, threads).ccc.value;
    result.history.push_back({epoch, epoch_lr, counted ? loss_sum / static_cast<double>(counted) : 0.0, val});
    if (val > result.best_val_ccc) {
      result.best_val_ccc = val;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    schedule.end_epoch(val);
    if (since_best >= cfg.early_stop_patience) break;
  }
  result.validation = evaluate(val_set, model, result.params, cfg.target, threads);
  return result;
}

// ---------------------------------------------------------------------------
// Cross-validation

/// Fold index per video: a seeded permutation dealt round-robin, so fold sizes
/// differ by at most one and a video never spans two folds.
inline std::vector<int> assign_folds(std::size_t videos, int folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (static_cast<std::size_t>(folds) > videos) {
    throw ConfigError("cannot split " + std::to_string(videos) + " clips into " + std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> perm(videos);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(seed ^ 0xf01dULL));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(videos);
  for (std::size_t i = 0; i < videos; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  return fold;
}

struct FoldSplit {
  std::vector<LabeledClip> train;
  std::vector<LabeledClip> val;
};

/// Window the videos of every fold except `fold` into the training split and
/// those of `fold` into validation.
inline FoldSplit split_fold(const std::vector<LabeledClip>& videos, const TrainConfig& cfg, int fold) {
  const auto folds = assign_folds(videos.size(), cfg.folds, cfg.seed);
  FoldSplit s;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    auto w = window(videos[i], cfg.window_length, cfg.window_stride);
    auto& dst = folds[i] == fold ? s.val : s.train;
    dst.insert(dst.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  if (s.train.empty() || s.val.empty()) throw ConfigError("fold " + std::to_string(fold) + " leaves an empty split");
  return s;
}

template <typename T>
struct CrossValidation {
  std::vector<EvalReport> reports;
  std::vector<TrainResult<T>> runs;
  std::size_t best_fold = 0;
};

template <typename T = double>
CrossValidation<T> cross_validate(const std::vector<LabeledClip>& videos, const ModelConfig& model,
                                  const TrainConfig& cfg, int threads = 1) {
  cfg.validate();
  CrossValidation<T> cv;
  for (int f = 0; f < cfg.folds; ++f) {
    TrainConfig fc = cfg;
    fc.fold = f;
    const FoldSplit split = split_fold(videos, fc, f);
    cv.runs.push_back(train<T>(split.train, split.val, model, fc, threads));
    EvalReport r;
    r.fold = f;
    r.mode = to_string(model.fusion.mode);
    r.iterations = model.fusion.iterations;
    r.temperature = model.fusion.temperature;
    r.frames = cv.runs.back().validation.frames;
    r.has_valence = cfg.target == Target::Valence;
    r.has_arousal = cfg.target == Target::Arousal;
    (cfg.target == Target::Valence ? r.ccc_valence : r.ccc_arousal) = cv.runs.back().validation.ccc.value;
    cv.reports.push_back(r);
    if (cv.runs.back().best_val_ccc > cv.runs[cv.best_fold].best_val_ccc) cv.best_fold = cv.runs.size() - 1;
  }
  return cv;
}

inline std::string eval_report_csv(const std::vector<EvalReport>& reports) {
  std::string out = EvalReport::csv_header() + "\n";
  auto cell = [](bool has, double v) { return has ? format_real(v) : std::string(); };
  for (const auto& r : reports) {
    out += csv_row({std::to_string(r.fold), r.mode, std::to_string(r.iterations), format_real(r.temperature),
                    cell(r.has_valence, r.ccc_valence), cell(r.has_arousal, r.ccc_arousal)});
  }
  return out;
}

} // namespace avf
