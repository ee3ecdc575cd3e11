// Acceptance run: one PASS/FAIL line per criterion on stdout, details on
// stderr. Exit status 0 only when every criterion passes.
//
//   acceptance            run all eight
//   acceptance 3 4 8      run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "avf/commands.hpp"
#include "fusion_testkit.hpp"

namespace fs = std::filesystem;
using avf::FusionMode;
using avf::Matrix;
using namespace avf::testing;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. gradient suite

Verdict gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = avf::run_grad_suite();
  const double secs = seconds_since(t0);
  std::fputs(avf::grad_suite_text(report).c_str(), stderr);
  const auto worst = std::max_element(report.groups.begin(), report.groups.end(),
                                      [](const auto& a, const auto& b) { return a.worst < b.worst; });
  const bool ok = report.passed() && secs < 120.0;
  return {ok, std::to_string(report.groups.size()) + " groups, worst relative error " + fmt("%.2e", worst->worst) +
                  " (" + worst->name + "), " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 2. oracle equivalence

Verdict oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(515);
  std::uniform_int_distribution<std::size_t> dim(1, 8), len(1, 8);
  std::uniform_int_distribution<int> depth(1, 3), mode_pick(0, 3), coin(0, 1);
  std::uniform_real_distribution<double> temp(0.05, 2.0);
  const FusionMode modes[] = {FusionMode::JCA, FusionMode::RJCA, FusionMode::GRJCA, FusionMode::HGRJCA};
  int configs = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const FusionMode mode = modes[mode_pick(rng)];
    const int M = mode == FusionMode::JCA ? 1 : depth(rng);
    auto cfg = small_config(mode, M, dim(rng), dim(rng), len(rng));
    cfg.temperature = temp(rng);
    cfg.joint_projection = coin(rng) == 1;
    const auto params = random_params(cfg, rng, 0.8);
    const auto xa = random_matrix(cfg.audio_dim, cfg.length, rng);
    const auto xv = random_matrix(cfg.visual_dim, cfg.length, rng);

    auto p = params;
    avf::Tape<double> tape(false);
    const auto st = avf::fusion_forward(tape.constant(xa), tape.constant(xv), p, cfg);
    const oracle::Config oc{avf::to_string(mode), M, cfg.temperature, cfg.joint_projection};
    const auto ref = oracle::forward(to_oracle(xa), to_oracle(xv), to_oracle(params), oc);
    worst = std::max({worst, max_diff(st.out_audio.value(), ref.audio), max_diff(st.out_visual.value(), ref.visual)});
    ++configs;
  }
  const double secs = seconds_since(t0);
  return {configs >= 100 && worst < 1e-12 && secs < 30.0,
          std::to_string(configs) + " configs (d, L <= 8, M <= 3, all modes), worst |diff| " + fmt("%.2e", worst) +
              ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 3. equation identities

avf::FusionState<double> run_fusion(const avf::FusionConfig& cfg, avf::ModelParams<double>& params,
                                    const Matrix<double>& xa, const Matrix<double>& xv, avf::Tape<double>& tape) {
  return avf::fusion_forward(tape.constant(xa), tape.constant(xv), params, cfg);
}

// Gate logits (features)ᵀ W + b computed entry by entry.
Matrix<double> plain_logits(const Matrix<double>& x, const Matrix<double>& w, const Matrix<double>& b) {
  Matrix<double> z(x.cols(), w.cols());
  for (std::size_t l = 0; l < x.cols(); ++l)
    for (std::size_t k = 0; k < w.cols(); ++k) {
      double s = b(k, 0);
      for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, l) * w(i, k);
      z(l, k) = s;
    }
  return z;
}

double min_top_gap(const Matrix<double>& z) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < z.rows(); ++l) {
    std::vector<double> row(z.cols());
    for (std::size_t k = 0; k < z.cols(); ++k) row[k] = z(l, k);
    std::sort(row.begin(), row.end());
    gap = std::min(gap, row[row.size() - 1] - row[row.size() - 2]);
  }
  return gap;
}

Verdict identities() {
  std::mt19937_64 rng(77);
  std::vector<std::string> failures;

  // RJCA with one iteration is JCA, bit for bit.
  for (int trial = 0; trial < 20; ++trial) {
    auto jca = small_config(FusionMode::JCA, 1, 1 + trial % 8, 1 + (trial * 3) % 8, 1 + (trial * 5) % 8);
    jca.joint_projection = trial % 2 == 0;
    auto rjca = jca;
    rjca.mode = FusionMode::RJCA;
    auto params = random_params(jca, rng);
    const auto xa = random_matrix(jca.audio_dim, jca.length, rng), xv = random_matrix(jca.visual_dim, jca.length, rng);
    avf::Tape<double> tape(false);
    const auto a = run_fusion(jca, params, xa, xv, tape);
    const auto b = run_fusion(rjca, params, xa, xv, tape);
    if (!(a.fused.value() == b.fused.value())) {
      failures.push_back("RJCA(M=1) != JCA");
      break;
    }
  }

  // Zero attention and joint weights leave every iteration's features unchanged.
  for (auto mode : {FusionMode::RJCA, FusionMode::GRJCA, FusionMode::HGRJCA}) {
    for (int M = 1; M <= 3; ++M) {
      auto cfg = small_config(mode, M, 5, 3, 7);
      auto params = random_params(cfg, rng);
      for (auto& p : params)
        if (p.name.find("gate") == std::string::npos && p.name.find("_gl_") == std::string::npos) p.value.fill(0.0);
      const auto xa = random_matrix(5, 7, rng), xv = random_matrix(3, 7, rng);
      avf::Tape<double> tape(false);
      const auto st = run_fusion(cfg, params, xa, xv, tape);
      for (const auto& it : st.iterations)
        if (!(it.att_audio.value() == xa) || !(it.att_visual.value() == xv)) {
          failures.push_back("zero weights changed the features (" + avf::to_string(mode) + ")");
          break;
        }
    }
  }

  // Every gate row is a distribution.
  double worst_row = 0.0;
  for (auto mode : {FusionMode::GRJCA, FusionMode::HGRJCA}) {
    for (int M = 1; M <= 4; ++M) {
      for (double T : {1e-3, 0.1, 1.0, 10.0}) {
        auto cfg = small_config(mode, M, 6, 4, 8);
        cfg.temperature = T;
        auto params = random_params(cfg, rng);
        avf::Tape<double> tape(false);
        const auto st = run_fusion(cfg, params, random_matrix(6, 8, rng), random_matrix(4, 8, rng), tape);
        std::vector<Matrix<double>> gates{st.gate_audio->value(), st.gate_visual->value()};
        for (const auto& it : st.iterations) {
          if (it.gate_audio) gates.push_back(it.gate_audio->value());
          if (it.gate_visual) gates.push_back(it.gate_visual->value());
        }
        for (const auto& g : gates)
          for (std::size_t l = 0; l < g.rows(); ++l) {
            double s = 0.0;
            for (std::size_t k = 0; k < g.cols(); ++k) s += g(l, k);
            worst_row = std::max(worst_row, std::abs(s - 1.0));
          }
      }
    }
  }
  if (!(worst_row <= 1e-12)) failures.push_back("gate row sum off by " + fmt("%.2e", worst_row));

  // T = 1e-3: the gated GRJCA output is ReLU of the argmax candidate. Gate
  // weights are redrawn until every frame's top logit leads by at least 0.1.
  double worst_hard = 0.0;
  int hard_cases = 0;
  for (int M = 1; M <= 3; ++M) {
    auto cfg = small_config(FusionMode::GRJCA, M, 4, 3, 6);
    cfg.temperature = 1e-3;
    auto params = random_params(cfg, rng, 0.6);
    const auto xa = random_matrix(4, 6, rng), xv = random_matrix(3, 6, rng);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      for (char m : {'a', 'v'}) {
        auto& w = params.at(avf::fusion_names::grjca_gate(m)).value;
        auto& b = params.at(avf::fusion_names::grjca_gate_bias(m)).value;
        w = random_matrix(w.rows(), w.cols(), rng, -3.0, 3.0);
        b = random_matrix(b.rows(), b.cols(), rng, -1.0, 1.0);
      }
      avf::Tape<double> tape(false);
      const auto st = run_fusion(cfg, params, xa, xv, tape);
      bool separated = true;
      std::vector<std::pair<Matrix<double>, Matrix<double>>> per_modality;
      for (char m : {'a', 'v'}) {
        std::vector<Matrix<double>> cand{m == 'a' ? xa : xv};
        for (const auto& it : st.iterations) cand.push_back((m == 'a' ? it.att_audio : it.att_visual).value());
        const auto z = plain_logits(cand.back(), params.at(avf::fusion_names::grjca_gate(m)).value,
                                    params.at(avf::fusion_names::grjca_gate_bias(m)).value);
        if (min_top_gap(z) < 0.1) separated = false;
        Matrix<double> hard(cand[0].rows(), cand[0].cols());
        for (std::size_t l = 0; l < z.rows(); ++l) {
          std::size_t best = 0;
          for (std::size_t k = 1; k < z.cols(); ++k)
            if (z(l, k) > z(l, best)) best = k;
          for (std::size_t i = 0; i < hard.rows(); ++i) hard(i, l) = std::max(0.0, cand[best](i, l));
        }
        per_modality.emplace_back((m == 'a' ? st.out_audio : st.out_visual).value(), hard);
      }
      if (!separated) continue;
      for (const auto& [soft, hard] : per_modality) worst_hard = std::max(worst_hard, avf::max_abs_diff(soft, hard));
      ++hard_cases;
      break;
    }
  }
  if (hard_cases != 3) failures.push_back("could not draw separated gate logits");
  if (!(worst_hard < 1e-4)) failures.push_back("T=1e-3 gating deviates " + fmt("%.2e", worst_hard));

  std::string detail = "RJCA(M=1)==JCA bitwise, zero weights keep X exactly, gate rows within " +
                       fmt("%.1e", worst_row) + " of 1, T=1e-3 vs argmax " + fmt("%.1e", worst_hard);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 4. CCC algebra

Verdict ccc_algebra() {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<std::string> failures;
  double worst_self = 0.0, worst_neg = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y(10 + trial * 7);
    for (auto& v : y) v = 0.3 * trial + n01(rng) * (0.1 + trial * 0.05);
    worst_self = std::max(worst_self, std::abs(avf::ccc(y, y).value - 1.0));

    std::vector<double> centered = y;
    long double mean = 0.0L;
    for (double v : centered) mean += v;
    mean /= static_cast<long double>(centered.size());
    for (auto& v : centered) v = static_cast<double>(v - mean);
    std::vector<double> negated(centered.size());
    for (std::size_t i = 0; i < centered.size(); ++i) negated[i] = -centered[i];
    worst_neg = std::max(worst_neg, std::abs(avf::ccc(centered, negated).value + 1.0));

    // Population variance of y, accumulated in long double.
    long double mu = 0.0L, var = 0.0L;
    for (double v : y) mu += v;
    mu /= static_cast<long double>(y.size());
    for (double v : y) var += (v - mu) * (v - mu);
    var /= static_cast<long double>(y.size());
    for (double c : {0.1, 0.5, 1.0}) {
      std::vector<double> shifted(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) shifted[i] = y[i] + c;
      const double closed = static_cast<double>(2.0L * var / (2.0L * var + static_cast<long double>(c) * c));
      worst_shift = std::max(worst_shift, std::abs(avf::ccc(shifted, y).value - closed));
    }
  }
  const bool ok = worst_self <= 1e-12 && worst_neg <= 1e-12 && worst_shift <= 1e-10;
  return {ok, "50 random series: |ccc(y,y)-1| " + fmt("%.1e", worst_self) + ", |ccc(y,-y)+1| " + fmt("%.1e", worst_neg) +
                  ", shift closed form " + fmt("%.1e", worst_shift)};
}

// ---------------------------------------------------------------------------
// 5. weak-complementarity benchmark

struct BenchmarkSplit {
  std::vector<avf::LabeledClip> train, val;
};

// 62 videos of 150 frames: the first 50 give 200 training windows of 64
// frames, the remaining 12 are held out.
BenchmarkSplit benchmark_split(double corruption, std::uint64_t seed) {
  avf::GenConfig g;
  g.num_videos = 62;
  g.frames = 150;
  g.audio_dim = g.visual_dim = 16;
  g.corruption_prob = corruption;
  g.corrupt = avf::Modality::Audio;
  g.seed = 1000 + seed;
  const auto videos = avf::generate(g);
  BenchmarkSplit s;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    auto w = avf::window(videos[i], 64, 43);
    auto& dst = i < 50 ? s.train : s.val;
    dst.insert(dst.end(), w.begin(), w.end());
  }
  return s;
}

double benchmark_run(const BenchmarkSplit& s, FusionMode mode, std::uint64_t seed) {
  avf::ModelConfig m;
  m.fusion.mode = mode;
  m.fusion.iterations = 3;
  m.fusion.temperature = 0.1;
  m.fusion.audio_dim = m.fusion.visual_dim = 16;
  m.fusion.length = 64;
  avf::TrainConfig t;
  t.init_lr = 1e-3;
  t.max_epochs = 20;
  t.warmup_epochs = 2;
  t.early_stop_patience = 20;
  t.seed = seed;
  return avf::train<double>(s.train, s.val, m, t).best_val_ccc;
}

Verdict benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  int grjca_wins = 0, hgrjca_wins = 0;
  double worst_clean_gap = std::numeric_limits<double>::infinity();
  std::size_t train_clips = 0;
  std::fprintf(stderr, "seed  p    RJCA     GRJCA    HGRJCA\n");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto weak = benchmark_split(0.5, seed);
    train_clips = weak.train.size();
    const double r = benchmark_run(weak, FusionMode::RJCA, seed);
    const double g = benchmark_run(weak, FusionMode::GRJCA, seed);
    const double h = benchmark_run(weak, FusionMode::HGRJCA, seed);
    grjca_wins += g >= r;
    hgrjca_wins += h >= r;
    std::fprintf(stderr, "%-5d 0.5  %.4f   %.4f   %.4f\n", static_cast<int>(seed), r, g, h);

    const auto strong = benchmark_split(0.0, seed);
    const double r0 = benchmark_run(strong, FusionMode::RJCA, seed);
    const double g0 = benchmark_run(strong, FusionMode::GRJCA, seed);
    worst_clean_gap = std::min(worst_clean_gap, g0 - r0);
    std::fprintf(stderr, "%-5d 0.0  %.4f   %.4f\n", static_cast<int>(seed), r0, g0);
  }
  const double secs = seconds_since(t0);
  const bool ok = grjca_wins >= 4 && hgrjca_wins >= 3 && worst_clean_gap >= -0.05 && secs < 900.0;
  return {ok, std::to_string(train_clips) + " train clips; p=0.5: GRJCA>=RJCA on " + std::to_string(grjca_wins) +
                  "/5 (need 4), HGRJCA>=RJCA on " + std::to_string(hgrjca_wins) + "/5 (need 3); p=0: min GRJCA-RJCA " +
                  fmt("%+.4f", worst_clean_gap) + " (need >= -0.05); " + fmt("%.0f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 6. ablation shape

avf::ExperimentConfig small_experiment() {
  avf::ExperimentConfig c;
  c.gen.num_videos = 12;
  c.gen.frames = 60;
  c.gen.audio_dim = c.gen.visual_dim = 6;
  c.gen.latent_dim = 4;
  c.gen.corruption_prob = 0.5;
  c.model.head_hidden = {8};
  c.model.tcn.levels = 1;
  c.model.tcn.kernel_size = 2;
  c.train.window_length = 20;
  c.train.window_stride = 15;
  c.train.folds = 4;
  c.train.max_epochs = 3;
  c.train.warmup_epochs = 1;
  c.train.init_lr = 1e-3;
  return c;
}

Verdict ablation_shape() {
  const auto cfg = small_experiment();
  const auto videos = avf::generate(cfg.gen);
  const auto table = avf::cmd_ablate(cfg, videos);
  const std::string csv = avf::ablation_csv(table);
  std::vector<std::string> failures;

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "M,RJCA_valence,GRJCA_valence,HGRJCA_valence,RJCA_arousal,GRJCA_arousal,HGRJCA_arousal,best")
    failures.push_back("header '" + line + "'");
  int rows = 0, flagged = 0, flagged_row = -1;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() != 8 || cells[0] != std::to_string(rows)) {
      failures.push_back("row " + std::to_string(rows) + " malformed");
      continue;
    }
    for (int k = 1; k <= 6; ++k) {
      const double v = std::stod(cells[k]);
      if (!std::isfinite(v) || std::abs(v) > 1.0) failures.push_back("cell out of range: " + cells[k]);
    }
    if (cells[7] == "1") {
      ++flagged;
      flagged_row = rows - 1;
    }
  }
  if (rows != 4) failures.push_back(std::to_string(rows) + " rows");
  int argmax = 0;
  std::vector<double> means;
  for (const auto& r : table.ccc) {
    double s = 0.0;
    for (double v : r) s += v;
    means.push_back(s / 6.0);
  }
  argmax = static_cast<int>(std::max_element(means.begin(), means.end()) - means.begin());
  if (flagged != 1 || flagged_row != argmax) failures.push_back("best-M flag not on the best mean row");

  const auto split = avf::split_fold(videos, cfg.train, cfg.train.fold);
  auto jca = cfg;
  jca.model.mode = FusionMode::JCA;
  jca.model.iterations = 1;
  const double direct = avf::train<double>(split.train, split.val, jca.model_config(), jca.train).best_val_ccc;
  const double cell = table.ccc[0][0];
  if (!(std::abs(cell - direct) <= 1e-9)) failures.push_back("M=1 RJCA cell differs from JCA by " + fmt("%.2e", std::abs(cell - direct)));

  std::fputs(csv.c_str(), stderr);
  std::string detail = "4 x 6 table + best flag (M=" + std::to_string(argmax + 1) + "), all cells in [-1, 1], M=1 RJCA = JCA (" +
                       fmt("%.1e", std::abs(cell - direct)) + ")";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 7. determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "avf_acceptance_determinism";
  fs::remove_all(root);
  auto cfg = small_experiment();
  cfg.model.mode = FusionMode::HGRJCA;
  cfg.model.iterations = 2;
  for (int run = 0; run < 2; ++run) {
    cfg.threads = run + 1;  // the second run also varies the worker count
    const fs::path dir = root / ("run" + std::to_string(run));
    avf::cmd_gen(cfg, dir / "data");
    avf::cmd_train(cfg, dir / "data", dir / "train");
    avf::cmd_eval(cfg, dir / "data", dir / "train" / "params.avpm", dir / "eval");
  }
  std::vector<std::string> differing;
  const char* files[] = {"data/manifest.csv", "train/history.csv", "train/predictions.csv", "eval/predictions.csv",
                         "train/params.avpm"};
  for (const char* f : files) {
    const std::string a = slurp(root / "run0" / f), b = slurp(root / "run1" / f);
    if (a.empty() || a != b) differing.push_back(f);
  }
  fs::remove_all(root);
  std::string detail = "two gen+train+eval runs (threads 1 and 2): manifest, history, predictions, params ";
  detail += differing.empty() ? "byte-identical" : "differ:";
  for (const auto& f : differing) detail += " " + f;
  return {differing.empty(), detail};
}

// ---------------------------------------------------------------------------
// 8. scheduler

Verdict scheduler() {
  avf::TrainConfig cfg;  // warmup 5, patience 5, factor 0.1, init 1e-4, min 1e-8
  avf::LrSchedule s(cfg);
  std::vector<std::string> failures;
  for (int e = 0; e < cfg.warmup_epochs; ++e) {
    if (s.lr(9, 10) != cfg.init_lr || !(s.lr(0, 10) < cfg.init_lr)) failures.push_back("warmup ramp");
    s.end_epoch(0.5);
  }
  std::vector<double> rates;
  for (int e = 0; e < 12; ++e) {
    rates.push_back(s.lr(0, 10));
    s.end_epoch(0.5);
  }
  rates.push_back(s.lr(0, 10));
  int drops = 0;
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (rates[i] == rates[i - 1]) continue;
    ++drops;
    if (std::abs(rates[i] / rates[i - 1] - 0.1) > 1e-12) failures.push_back("drop ratio " + fmt("%.3g", rates[i] / rates[i - 1]));
  }
  if (drops != 2 || s.drops() != 2) failures.push_back(std::to_string(drops) + " drops");

  // A long flat run with a high floor: the rate clamps at min_lr and stays there.
  avf::TrainConfig floor = cfg;
  floor.min_lr = 3e-7;
  avf::LrSchedule f(floor);
  double lowest = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 60; ++e) {
    for (std::size_t b = 0; b < 10; ++b) lowest = std::min(lowest, f.lr(b, 10));
    f.end_epoch(0.25);
  }
  if (lowest < floor.min_lr || f.lr(0, 10) != floor.min_lr) failures.push_back("rate fell below min_lr");

  std::string detail = "12 flat post-warmup epochs: " + std::to_string(drops) + " drops (" + fmt("%.0e", rates.front());
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (rates[i] != rates[i - 1]) detail += " -> " + fmt("%.0e", rates[i]);
  detail += "), 60 flat epochs floor at " + fmt("%.0e", lowest);
  for (const auto& x : failures) detail += "; " + x;
  return {failures.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"gradient suite", gradient_suite},         {"oracle equivalence", oracle_equivalence},
      {"equation identities", identities},        {"CCC algebra", ccc_algebra},
      {"weak-complementarity benchmark", benchmark}, {"ablation shape", ablation_shape},
      {"determinism", determinism},               {"scheduler contract", scheduler},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    std::fprintf(stderr, "--- %d. %s\n", id, criteria[i].name);
    Verdict v;
    try {
      v = criteria[i].run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all = all && v.pass;
    std::printf("%s  %d. %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].name, v.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
