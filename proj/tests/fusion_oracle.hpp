#pragma once

// Straight-line reference for the fusion forward pass. Uses only nested
// vectors and explicit loops so it shares no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat mm(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat tr(const Mat& a) {
  Mat t = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

struct Weights {
  std::map<std::string, Mat> w;
  const Mat& operator()(const std::string& name) const { return w.at(name); }
};

struct Config {
  std::string mode;  // JCA, RJCA, GRJCA, HGRJCA
  int M = 1;
  double T = 0.1;
  bool projection = true;
};

inline std::string it(int t, const std::string& n) { return "fusion.t" + std::to_string(t) + "." + n; }

// softmax over each row of (X^T W + b^T) / T, b a K x 1 column
inline Mat gate(const Mat& x, const Mat& w, const Mat& b, double T) {
  const std::size_t L = x[0].size(), K = w[0].size();
  Mat s = zeros(L, K);
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> z(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < x.size(); ++i) z[k] += x[i][l] * w[i][k];
    for (std::size_t k = 0; k < K; ++k) z[k] += b[k][0];
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double tot = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      s[l][k] = std::exp((z[k] - mx) / T);
      tot += s[l][k];
    }
    for (std::size_t k = 0; k < K; ++k) s[l][k] /= tot;
  }
  return s;
}

inline Mat combine(const std::vector<Mat>& cand, const Mat& s) {
  Mat out = zeros(cand[0].size(), cand[0][0].size());
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t l = 0; l < out[0].size(); ++l) {
      double v = 0.0;
      for (std::size_t k = 0; k < cand.size(); ++k) v += cand[k][i][l] * s[l][k];
      out[i][l] = std::max(v, 0.0);
    }
  return out;
}

struct Result {
  Mat audio, visual;
};

inline Result forward(const Mat& xa0, const Mat& xv0, const Weights& W, const Config& cfg) {
  const std::size_t da = xa0.size(), dv = xv0.size(), L = xa0[0].size(), d = da + dv;
  std::vector<Mat> as{xa0}, vs{xv0};
  for (int t = 1; t <= cfg.M; ++t) {
    const Mat& xa = as.back();
    const Mat& xv = vs.back();
    Mat j = zeros(d, L);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < da; ++i) j[i][l] = xa[i][l];
      for (std::size_t i = 0; i < dv; ++i) j[da + i][l] = xv[i][l];
    }
    if (cfg.projection) j = mm(W(it(t, "W_joint")), j);
    auto attend = [&](const Mat& x, const char* wj, const char* wc, const char* wh) {
      Mat c = mm(mm(tr(x), W(it(t, wj))), j);
      for (auto& row : c)
        for (double& v : row) v = std::tanh(v / std::sqrt(static_cast<double>(d)));
      Mat h = mm(mm(x, W(it(t, wc))), c);
      for (auto& row : h)
        for (double& v : row) v = std::max(v, 0.0);
      Mat out = mm(h, W(it(t, wh)));
      for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t l = 0; l < L; ++l) out[i][l] += x[i][l];
      return out;
    };
    Mat na = attend(xa, "W_ja", "W_ca", "W_ha");
    Mat nv = attend(xv, "W_jv", "W_cv", "W_hv");
    as.push_back(na);
    vs.push_back(nv);
  }
  if (cfg.mode == "JCA" || cfg.mode == "RJCA") return {as.back(), vs.back()};
  if (cfg.mode == "GRJCA") {
    return {combine(as, gate(as.back(), W("fusion.gate.W_gl_a"), W("fusion.gate.b_gl_a"), cfg.T)),
            combine(vs, gate(vs.back(), W("fusion.gate.W_gl_v"), W("fusion.gate.b_gl_v"), cfg.T))};
  }
  auto hier = [&](const std::vector<Mat>& xs, char m) {
    std::vector<Mat> gated;
    for (int t = 1; t <= cfg.M; ++t) {
      Mat s = gate(xs[t], W(it(t, std::string("W_gl_") + m)), W(it(t, std::string("b_gl_") + m)), cfg.T);
      gated.push_back(combine({xs[t - 1], xs[t]}, s));
    }
    Mat total = gated[0];
    for (std::size_t k = 1; k < gated.size(); ++k)
      for (std::size_t i = 0; i < total.size(); ++i)
        for (std::size_t l = 0; l < L; ++l) total[i][l] += gated[k][i][l];
    return combine(gated, gate(total, W(std::string("fusion.final_gate.W_") + m),
                               W(std::string("fusion.final_gate.b_") + m), cfg.T));
  };
  return {hier(as, 'a'), hier(vs, 'v')};
}

} // namespace oracle
