#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "avf/csv.hpp"
#include "avf/experiment.hpp"
#include "avf/gradcheck.hpp"
#include "avf/params_io.hpp"
#include "avf/parallel.hpp"

// Subcommand bodies of the `avf` tool, kept in a header so tests can drive
// them in-process. Each takes explicit paths; nothing is cached between calls.

namespace avf {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// gen

/// Generate the dataset described by cfg.gen into `dir`; returns the clip count.
inline std::size_t cmd_gen(const ExperimentConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const auto clips = generate(cfg.gen, cfg.threads);
  write_dataset(dir, clips);
  return clips.size();
}

// ---------------------------------------------------------------------------
// train / eval

struct TrainSummary {
  double best_val_ccc = 0.0;
  int best_epoch = -1;
  int epochs = 0;
  std::size_t train_clips = 0;
  std::size_t val_clips = 0;
};

inline EvalReport make_report(const ExperimentConfig& cfg, const Evaluation& ev) {
  EvalReport r;
  r.fold = cfg.train.fold;
  r.mode = to_string(cfg.model.mode);
  r.iterations = cfg.model.iterations;
  r.temperature = cfg.model.temperature;
  r.frames = ev.frames;
  r.has_valence = cfg.train.target == Target::Valence;
  r.has_arousal = !r.has_valence;
  (r.has_valence ? r.ccc_valence : r.ccc_arousal) = ev.ccc.value;
  return r;
}

/// Train on every fold but cfg.train.fold and validate on it. Writes into
/// `out`: params.avpm (best snapshot), history.csv, predictions.csv (validation
/// predictions of the snapshot), report.csv and the effective config.yaml.
inline TrainSummary cmd_train(const ExperimentConfig& cfg, const fs::path& data, const fs::path& out) {
  cfg.validate();
  const auto videos = read_dataset(data);
  const auto split = split_fold(videos, cfg.train, cfg.train.fold);
  const auto result = train<double>(split.train, split.val, cfg.model_config(), cfg.train, cfg.threads);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  save_params(out / "params.avpm", result.params);
  detail::write_file(out / "history.csv", history_csv(result.history));
  detail::write_file(out / "predictions.csv", predictions_csv(result.validation.predictions));
  detail::write_file(out / "report.csv", eval_report_csv({make_report(cfg, result.validation)}));
  detail::write_file(out / "config.yaml", serialize_experiment(cfg));
  return {result.best_val_ccc, result.best_epoch, static_cast<int>(result.history.size()), split.train.size(),
          split.val.size()};
}

/// Load saved parameters and score the validation fold. Reads `data` and
/// `params_file` only; writes predictions.csv and report.csv into `out`.
inline Evaluation cmd_eval(const ExperimentConfig& cfg, const fs::path& data, const fs::path& params_file,
                           const fs::path& out) {
  cfg.validate();
  const auto videos = read_dataset(data);
  const auto split = split_fold(videos, cfg.train, cfg.train.fold);
  const ModelConfig model = cfg.model_config();
  auto params = init_model<double>(model, 0);
  load_params(params_file, params);
  const auto ev = evaluate(split.val, model, params, cfg.train.target, cfg.threads);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  detail::write_file(out / "predictions.csv", predictions_csv(ev.predictions));
  detail::write_file(out / "report.csv", eval_report_csv({make_report(cfg, ev)}));
  return ev;
}

// ---------------------------------------------------------------------------
// ablate

inline constexpr std::array<FusionMode, 3> kAblationModes{FusionMode::RJCA, FusionMode::GRJCA, FusionMode::HGRJCA};
inline constexpr int kAblationMaxIterations = 4;

/// Best validation CCC of one (mode, M, target) run on the configured fold.
inline double ablation_cell(const ExperimentConfig& cfg, const FoldSplit& split, FusionMode mode, int iterations,
                            Target target, int threads = 1) {
  ExperimentConfig c = cfg;
  c.model.mode = mode;
  c.model.iterations = iterations;
  c.train.target = target;
  c.validate();
  return train<double>(split.train, split.val, c.model_config(), c.train, threads).best_val_ccc;
}

struct AblationTable {
  // ccc[M-1][target * 3 + mode_index]
  std::vector<std::array<double, 6>> ccc;
  std::size_t best_row = 0;
};

/// Sweep M = 1..4 for each gated/ungated mode and both targets on one shared
/// dataset and fold. Runs are spread over cfg.threads workers; each run is
/// serial, so the table does not depend on the thread count.
inline AblationTable cmd_ablate(const ExperimentConfig& cfg, const std::vector<LabeledClip>& videos) {
  cfg.validate();
  const auto split = split_fold(videos, cfg.train, cfg.train.fold);
  AblationTable t;
  t.ccc.resize(kAblationMaxIterations);
  const std::size_t cells = kAblationMaxIterations * 6;
  parallel_for(cells, cfg.threads, [&](std::size_t k) {
    const std::size_t row = k / 6, col = k % 6;
    const Target target = col < 3 ? Target::Valence : Target::Arousal;
    t.ccc[row][col] = ablation_cell(cfg, split, kAblationModes[col % 3], static_cast<int>(row) + 1, target);
  });
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < t.ccc.size(); ++r) {
    double mean = 0.0;
    for (double v : t.ccc[r]) mean += v / 6.0;
    if (mean > best) {
      best = mean;
      t.best_row = r;
    }
  }
  return t;
}

/// Rows are M; columns are the three modes for valence then arousal. `best`
/// marks the row with the highest mean CCC over all six cells.
inline std::string ablation_csv(const AblationTable& t) {
  std::vector<std::string> header{"M"};
  for (const char* target : {"valence", "arousal"})
    for (auto mode : kAblationModes) header.push_back(to_string(mode) + "_" + target);
  header.push_back("best");
  std::string out = csv_row(header);
  for (std::size_t r = 0; r < t.ccc.size(); ++r) {
    std::vector<std::string> row{std::to_string(r + 1)};
    for (double v : t.ccc[r]) row.push_back(format_real(v));
    row.push_back(r == t.best_row ? "1" : "0");
    out += csv_row(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradSuiteCase {
  FusionMode mode;
  int iterations;
};

inline std::vector<GradSuiteCase> grad_suite_cases() {
  std::vector<GradSuiteCase> cases{{FusionMode::JCA, 1}};
  for (auto mode : kAblationModes)
    for (int m = 1; m <= 3; ++m) cases.push_back({mode, m});
  return cases;
}

struct GroupSummary {
  std::string name;
  double worst = 0.0;
  std::string worst_case;  // "<mode> M=<m>"
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

struct GradSuiteReport {
  std::vector<GroupSummary> groups;  // first-seen order, one entry per name
  double threshold = 1e-5;

  double worst() const {
    double w = 0.0;
    for (const auto& g : groups) w = std::max(w, g.worst);
    return w;
  }
  bool passed() const {
    for (const auto& g : groups)
      if (!(g.worst < threshold)) return false;
    return true;
  }
};

/// Model with da = dv = 8, L = 6 through TCN, fusion, dropout and head into a
/// CCC loss with one padded frame, for JCA and RJCA/GRJCA/HGRJCA at M = 1..3.
/// `corrupt_group` perturbs that group's analytic gradient in every case
/// where it exists (negative control).
inline GradSuiteReport run_grad_suite(const std::optional<std::string>& corrupt_group = std::nullopt,
                                      std::size_t samples_per_group = 8) {
  constexpr std::size_t kDim = 8, kLen = 6;
  GradSuiteReport report;
  std::map<std::string, std::size_t> index;
  bool corrupt_found = false;
  std::uint64_t seed = 101;
  for (const auto& gc : grad_suite_cases()) {
    ModelConfig cfg;
    cfg.fusion.mode = gc.mode;
    cfg.fusion.iterations = gc.iterations;
    cfg.fusion.audio_dim = cfg.fusion.visual_dim = kDim;
    cfg.fusion.length = kLen;
    cfg.tcn = {.levels = 2, .kernel_size = 2};
    cfg.head.hidden = {6};
    cfg.dropout = 0.5;
    auto params = init_model<double>(cfg, ++seed);
    std::mt19937_64 rng(splitmix64(seed));
    // Gate logits of order T keep the softmax away from saturation, where the
    // loss stops depending on most weights and finite differences see only noise.
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (auto& p : params)
      if (p.name.find("gate") != std::string::npos || p.name.find("W_gl") != std::string::npos) {
        const double s = cfg.fusion.temperature / std::sqrt(static_cast<double>(p.value.rows()));
        for (auto& v : p.value.values()) v = s * unit(rng);
      }
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix<double> xa(kDim, kLen), xv(kDim, kLen), truth(1, kLen), mask(1, kLen, 1.0);
    for (auto& v : xa.values()) v = g(rng);
    for (auto& v : xv.values()) v = g(rng);
    for (auto& v : truth.values()) v = 0.5 * g(rng);
    const std::vector<std::uint8_t> valid{1, 1, 1, 1, 1, 0};
    mask[kLen - 1] = 0.0;
    const auto drop = dropout_mask<double>(cfg.encoded_fusion().joint_dim(), kLen, cfg.dropout, rng);

    GradcheckOptions opts;
    opts.samples_per_group = samples_per_group;
    opts.seed = seed;
    if (corrupt_group && params.contains(*corrupt_group)) {
      opts.corrupt_group = corrupt_group;
      corrupt_found = true;
    }
    const auto r = gradcheck_extended<long double>(
        [&]<typename U>(Tape<U>& t, ModelParams<U>& ps) {
          auto out = model_forward(t.constant(to_matrix<U>(xa)), t.constant(to_matrix<U>(xv)), cfg, ps,
                                   std::optional<Matrix<U>>(to_matrix<U>(drop)), valid);
          return ccc_loss(out.prediction, to_matrix<U>(truth), to_matrix<U>(mask));
        },
        params, opts);
    const std::string label = to_string(gc.mode) + " M=" + std::to_string(gc.iterations);
    for (const auto& grp : r.groups) {
      auto [it, fresh] = index.emplace(grp.name, report.groups.size());
      if (fresh) {
        GroupSummary fresh_group;
        fresh_group.name = grp.name;
        report.groups.push_back(std::move(fresh_group));
      }
      auto& s = report.groups[it->second];
      if (s.worst_case.empty() || grp.worst_rel_error > s.worst) {
        s.worst = grp.worst_rel_error;
        s.worst_case = label;
      }
      s.checked += grp.checked;
      s.skipped_kinks += grp.skipped_kinks;
    }
  }
  if (corrupt_group && !corrupt_found) throw ConfigError("no parameter group named '" + *corrupt_group + "'");
  return report;
}

inline std::string grad_suite_text(const GradSuiteReport& r) {
  std::string out;
  char line[256];
  for (const auto& g : r.groups) {
    std::snprintf(line, sizeof line, "%-4s %-24s worst %.3e  (%s, %zu checked, %zu kinks skipped)\n",
                  g.worst < r.threshold ? "ok" : "FAIL", g.name.c_str(), g.worst, g.worst_case.c_str(), g.checked,
                  g.skipped_kinks);
    out += line;
  }
  std::snprintf(line, sizeof line, "%zu groups, worst %.3e, threshold %.0e: %s\n", r.groups.size(), r.worst(),
                r.threshold, r.passed() ? "PASS" : "FAIL");
  out += line;
  return out;
}

} // namespace avf
