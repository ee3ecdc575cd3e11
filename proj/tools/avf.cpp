// avf: generate synthetic data, train, evaluate, ablate and gradient-check
// the audio-visual fusion models.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration or parse
// error, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "avf/commands.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kVerify = 1, kConfig = 2, kIo = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "YAML experiment config (defaults apply to missing fields)");
  if (with_out) cmd->add_option("--out", c.out, "Output directory (overrides the config's `out`)");
  cmd->add_option("--seed", c.seed, "Overrides both gen.seed and train.seed");
  cmd->add_option("--threads", c.threads, "Worker cap; 1 runs everything serially")->check(CLI::PositiveNumber);
}

avf::ExperimentConfig resolve(const Common& c) {
  avf::ExperimentConfig cfg = c.config.empty() ? avf::ExperimentConfig{} : avf::load_experiment(c.config);
  if (!c.out.empty()) cfg.out = c.out;
  if (c.seed) cfg.gen.seed = cfg.train.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const avf::ConfigError& e) {
    std::cerr << "avf: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const avf::ParameterError& e) {
    std::cerr << "avf: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const avf::IoError& e) {
    std::cerr << "avf: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const avf::FormatError& e) {
    std::cerr << "avf: malformed file: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "avf: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "avf: " << e.what() << "\n";
    return kVerify;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual fusion experiments on synthetic data"};
  app.require_subcommand(1);

  Common gen_o, train_o, eval_o, ablate_o, grad_o;
  std::string train_data, eval_data, eval_params;
  std::optional<std::string> corrupt;
  std::size_t samples = 8;

  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset to <out>/data");
  add_common(gen, gen_o);

  auto* trn = app.add_subcommand("train", "Train one fold; writes <out>/train");
  add_common(trn, train_o);
  trn->add_option("--data", train_data, "Dataset directory (default <out>/data)");

  auto* evl = app.add_subcommand("eval", "Score saved parameters on the validation fold; writes <out>/eval");
  add_common(evl, eval_o);
  evl->add_option("--data", eval_data, "Dataset directory (default <out>/data)");
  evl->add_option("--params", eval_params, "Parameter file (default <out>/train/params.avpm)");

  auto* abl = app.add_subcommand("ablate", "Sweep M = 1..4 for RJCA, GRJCA and HGRJCA; writes <out>/ablation.csv");
  add_common(abl, ablate_o);

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients of every parameter group");
  grad->add_option("--corrupt-grad", corrupt, "Perturb this group's analytic gradient (negative control)");
  grad->add_option("--samples", samples, "Entries checked per group and case")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*gen) {
    return guarded([&] {
      const auto cfg = resolve(gen_o);
      const fs::path dir = fs::path(cfg.out) / "data";
      const auto n = avf::cmd_gen(cfg, dir);
      std::cout << "wrote " << n << " clips to " << dir.string() << "\n";
      return kOk;
    });
  }
  if (*trn) {
    return guarded([&] {
      const auto cfg = resolve(train_o);
      const fs::path data = train_data.empty() ? fs::path(cfg.out) / "data" : fs::path(train_data);
      const fs::path out = fs::path(cfg.out) / "train";
      const auto s = avf::cmd_train(cfg, data, out);
      std::printf("%s M=%d fold %d: %zu train / %zu val windows, %d epochs, best val CCC %.6f at epoch %d\n",
                  avf::to_string(cfg.model.mode).c_str(), cfg.model.iterations, cfg.train.fold, s.train_clips,
                  s.val_clips, s.epochs, s.best_val_ccc, s.best_epoch);
      std::printf("wrote %s\n", out.string().c_str());
      return kOk;
    });
  }
  if (*evl) {
    return guarded([&] {
      const auto cfg = resolve(eval_o);
      const fs::path data = eval_data.empty() ? fs::path(cfg.out) / "data" : fs::path(eval_data);
      const fs::path params = eval_params.empty() ? fs::path(cfg.out) / "train" / "params.avpm" : fs::path(eval_params);
      const fs::path out = fs::path(cfg.out) / "eval";
      const auto ev = avf::cmd_eval(cfg, data, params, out);
      std::printf("val CCC %.6f over %zu frames\nwrote %s\n", ev.ccc.value, ev.frames, out.string().c_str());
      return kOk;
    });
  }
  if (*abl) {
    return guarded([&] {
      const auto cfg = resolve(ablate_o);
      const auto table = avf::cmd_ablate(cfg, avf::generate(cfg.gen, cfg.threads));
      const std::string csv = avf::ablation_csv(table);
      std::error_code ec;
      fs::create_directories(cfg.out, ec);
      if (ec) throw avf::IoError("cannot create '" + cfg.out + "': " + ec.message());
      avf::detail::write_file(fs::path(cfg.out) / "ablation.csv", csv);
      std::cout << csv;
      return kOk;
    });
  }
  if (*grad) {
    return guarded([&] {
      const auto report = avf::run_grad_suite(corrupt, samples);
      std::cout << avf::grad_suite_text(report);
      if (!report.passed()) {
        for (const auto& g : report.groups)
          if (!(g.worst < report.threshold))
            std::cerr << "avf: gradient mismatch in '" << g.name << "' (" << g.worst_case << ")\n";
        return kVerify;
      }
      return kOk;
    });
  }
  return kConfig;
}
