#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <random>
#include <string>
#include <vector>

#include "avf/ops.hpp"

namespace avf {

struct GradcheckOptions {
  double epsilon = 1e-6;
  /// Entries sampled per parameter group; groups smaller than this are checked exhaustively.
  std::size_t samples_per_group = 6;
  /// Also try steps 10ε, 100ε, ... (capped at 1e-3) and keep the closest
  /// kink-free estimate. Tiny gradients need large steps to clear roundoff.
  int step_refinements = 3;
  /// At each step also form the fourth-order estimate from f(θ±2h). Its small
  /// truncation error lets the larger steps resolve gradients near 1e-8.
  bool five_point = true;
  std::uint64_t seed = 0x5eed;
  /// Test fixture: perturb the analytic gradient of this group before comparing.
  std::optional<std::string> corrupt_group;
};

struct GroupCheck {
  std::string name;
  double worst_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;

  double worst() const {
    double w = 0.0;
    for (const auto& g : groups) w = std::max(w, g.worst_rel_error);
    return w;
  }
  const GroupCheck* worst_group() const {
    const GroupCheck* w = nullptr;
    for (const auto& g : groups)
      if (!w || g.worst_rel_error > w->worst_rel_error) w = &g;
    return w;
  }
};

/// |a - n| / max(1e-8, |a| + |n|)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace detail {

// `analytic()` fills params' grads; `eval()` returns the loss and ReLU
// fingerprint at the current values of `ref`, which is perturbed in place.
// `ref` may alias `params`.
template <typename T, typename R, typename Analytic, typename Eval>
GradcheckReport gradcheck_core(ModelParams<T>& params, ModelParams<R>& ref, Analytic&& analytic, Eval&& eval,
                               const GradcheckOptions& opts) {
  if (!(opts.epsilon >= 1e-7 && opts.epsilon <= 1e-3)) {
    throw ParameterError("gradcheck: epsilon must lie in [1e-7, 1e-3], got " + std::to_string(opts.epsilon));
  }
  params.zero_grad();
  analytic();
  if (opts.corrupt_group) {
    Param<T>& p = params.at(*opts.corrupt_group);
    for (auto& g : p.grad.values()) g = g * T(1.1) + T(1e-4);
  }
  const auto [base_loss, base_print] = eval();
  if (!std::isfinite(base_loss)) throw NumericError("gradcheck: non-finite base loss");

  auto probe = [&](const std::string& name) {
    const auto r = eval();
    if (!std::isfinite(r.first)) throw NumericError("gradcheck: non-finite loss while perturbing '" + name + "'");
    return r;
  };

  std::mt19937_64 rng(opts.seed);
  GradcheckReport report;
  auto rp = ref.begin();
  for (auto& p : params) {
    Param<R>& q = *rp++;
    GroupCheck gc{p.name};
    std::vector<std::size_t> idx(p.value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > opts.samples_per_group) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.samples_per_group);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const R saved = q.value[i];
      const double ga = static_cast<double>(p.grad[i]);
      double best = -1.0;
      double step = opts.epsilon;
      for (int r = 0; r <= opts.step_refinements && step <= 1e-3 * (1 + 1e-9); ++r, step *= 10.0) {
        const R h = static_cast<R>(step);
        q.value[i] = saved + h;
        const auto [fp, print_p] = probe(p.name);
        q.value[i] = saved - h;
        const auto [fm, print_m] = probe(p.name);
        q.value[i] = saved;
        if (print_p != base_print || print_m != base_print) continue;
        const long double hl = static_cast<long double>(h);
        const double err = relative_error(ga, static_cast<double>((fp - fm) / (2 * hl)));
        if (best < 0.0 || err < best) best = err;
        if (!opts.five_point) continue;
        q.value[i] = saved + 2 * h;
        const auto [fpp, print_pp] = probe(p.name);
        q.value[i] = saved - 2 * h;
        const auto [fmm, print_mm] = probe(p.name);
        q.value[i] = saved;
        if (print_pp != base_print || print_mm != base_print) continue;
        best = std::min(best, relative_error(ga, static_cast<double>((8 * (fp - fm) - (fpp - fmm)) / (12 * hl))));
      }
      if (best < 0.0) {
        ++gc.skipped_kinks;
        continue;
      }
      gc.worst_rel_error = std::max(gc.worst_rel_error, best);
      ++gc.checked;
    }
    report.groups.push_back(std::move(gc));
  }
  return report;
}

// Losses are differenced in long double so a higher-precision reference keeps
// its extra digits.
template <typename R>
std::pair<long double, std::uint64_t> value_and_print(Tape<R>& tape, Var<R> loss) {
  return {static_cast<long double>(loss.value()[0]), tape.relu_fingerprint()};
}

} // namespace detail

/// Compare reverse-mode gradients of a scalar loss against central differences
/// (f(θ+ε) − f(θ−ε)) / 2ε on sampled entries of every parameter group,
/// keeping the closest of the estimates described in GradcheckOptions.
///
/// `loss_fn(Tape<T>&)` must build the loss on the given tape, pulling weights
/// through Tape::param so they are registered. A step is discarded when either
/// perturbed evaluation takes a different ReLU branch than the base evaluation;
/// a coordinate with no usable step lies within ε of a kink and is skipped.
template <typename T, typename LossFn>
GradcheckReport gradcheck(LossFn&& loss_fn, ModelParams<T>& params, const GradcheckOptions& opts = {}) {
  auto analytic = [&] {
    Tape<T> tape;
    Var<T> loss = loss_fn(tape);
    if (!std::isfinite(static_cast<double>(loss.value()[0]))) throw NumericError("gradcheck: non-finite base loss");
    tape.backward(loss);
  };
  auto eval = [&] {
    Tape<T> tape(false);
    Var<T> loss = loss_fn(tape);
    return detail::value_and_print(tape, loss);
  };
  return detail::gradcheck_core(params, params, analytic, eval, opts);
}

/// Same check with the finite differences taken in precision R (e.g. long
/// double) on a copy of the parameters. `loss_fn(Tape<U>&, ModelParams<U>&)`
/// must work for both U = T and U = R. The higher-precision reference resolves
/// gradients far below the roundoff floor of differences taken in T.
template <typename R, typename T, typename LossFn>
GradcheckReport gradcheck_extended(LossFn&& loss_fn, ModelParams<T>& params, const GradcheckOptions& opts = {}) {
  ModelParams<R> ref;
  for (const auto& p : params) {
    Matrix<R> v(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<R>(p.value[i]);
    ref.add(p.name, std::move(v));
  }
  auto analytic = [&] {
    Tape<T> tape;
    Var<T> loss = loss_fn(tape, params);
    if (!std::isfinite(static_cast<double>(loss.value()[0]))) throw NumericError("gradcheck: non-finite base loss");
    tape.backward(loss);
  };
  auto eval = [&] {
    Tape<R> tape(false);
    Var<R> loss = loss_fn(tape, ref);
    return detail::value_and_print(tape, loss);
  };
  return detail::gradcheck_core(params, ref, analytic, eval, opts);
}

} // namespace avf
