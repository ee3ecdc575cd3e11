#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "avf/gradcheck.hpp"
#include "avf/metrics.hpp"

using avf::Matrix;

namespace {

avf::GradcheckOptions sampled(std::size_t n) {
  avf::GradcheckOptions o;
  o.samples_per_group = n;
  return o;
}

std::vector<double> zero_mean_signal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(n);
  for (auto& v : y) v = g(rng);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  for (auto& v : y) v -= mean;
  return y;
}

double population_variance(const std::vector<double>& y) {
  double m = 0.0, s = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  for (double v : y) s += (v - m) * (v - m);
  return s / static_cast<double>(y.size());
}

Matrix<double> row(const std::vector<double>& v) {
  Matrix<double> m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i];
  return m;
}

} // namespace

TEST(Ccc, PerfectAgreement) {
  std::mt19937_64 rng(1);
  auto y = zero_mean_signal(257, rng);
  for (auto& v : y) v += 0.3;
  EXPECT_NEAR(avf::ccc(y, y).value, 1.0, 1e-12);
}

TEST(Ccc, NegatedZeroMeanSignal) {
  std::mt19937_64 rng(2);
  auto y = zero_mean_signal(300, rng);
  std::vector<double> neg(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
  EXPECT_NEAR(avf::ccc(y, neg).value, -1.0, 1e-12);
}

TEST(Ccc, MeanShiftClosedForm) {
  std::mt19937_64 rng(3);
  auto y = zero_mean_signal(500, rng);
  const double var = population_variance(y);
  for (double c : {0.1, 0.5, 1.0}) {
    std::vector<double> shifted(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) shifted[i] = y[i] + c;
    EXPECT_NEAR(avf::ccc(shifted, y).value, 2 * var / (2 * var + c * c), 1e-10) << "c=" << c;
  }
}

TEST(Ccc, HandComputedExample) {
  // pred {1,2,3}, truth {1,3,2}: means 2,2; var 2/3 each; cov 1/3 -> 2/3 / (4/3) = 0.5
  EXPECT_NEAR(avf::ccc(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}).value, 0.5, 1e-15);
}

TEST(Ccc, SymmetricAndBounded) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> len(2, 40);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(len(rng)), b(a.size());
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    const double ab = avf::ccc(a, b).value, ba = avf::ccc(b, a).value;
    ASSERT_NEAR(ab, ba, 1e-12);
    ASSERT_LE(std::abs(ab), 1.0 + 1e-12);
  }
}

TEST(Ccc, ConstantPredictionScoresZero) {
  auto r = avf::ccc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<double>{0.1, -0.2, 0.5, 0.3});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_FALSE(r.degenerate);
}

TEST(Ccc, BothConstantIsFlaggedDegenerate) {
  auto r = avf::ccc(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1, 1});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Ccc, RejectsBadLengths) {
  EXPECT_THROW(avf::ccc(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), avf::DimensionError);
  EXPECT_THROW(avf::ccc(std::vector<double>{1}, std::vector<double>{1}), avf::DimensionError);
}

TEST(Ccc, MaskSelectsFrames) {
  const std::vector<double> p{1, 2, 3, 100}, t{1, 3, 2, -50}, m{1, 1, 1, 0};
  auto masked = avf::ccc<double>(p, t, m);
  EXPECT_NEAR(masked.value, 0.5, 1e-15);
}

TEST(CccLoss, ValueIsOneMinusCcc) {
  avf::Tape<double> tape;
  const std::vector<double> p{0.1, 0.5, -0.3, 0.8}, t{0.0, 0.4, -0.1, 0.9};
  auto loss = avf::ccc_loss(tape.constant(row(p)), row(t));
  EXPECT_NEAR(loss.value()[0], 1.0 - avf::ccc(p, t).value, 1e-15);
}

TEST(CccLoss, GradcheckWithAndWithoutMask) {
  std::mt19937_64 rng(5);
  const auto truth = row(zero_mean_signal(12, rng));
  Matrix<double> mask(1, 12, 1.0);
  mask[3] = mask[7] = 0.0;
  for (bool use_mask : {false, true}) {
    avf::ModelParams<double> params;
    params.add("pred", row(zero_mean_signal(12, rng)));
    auto report = avf::gradcheck<double>(
        [&](avf::Tape<double>& tape) {
          auto p = tape.param(params.at("pred"));
          return use_mask ? avf::ccc_loss(p, truth, mask) : avf::ccc_loss(p, truth);
        },
        params, sampled(12));
    EXPECT_LT(report.worst(), 1e-6) << "mask=" << use_mask;
  }
}

TEST(CccLoss, MaskedFramesGetZeroGradient) {
  std::mt19937_64 rng(6);
  const auto truth = row(zero_mean_signal(10, rng));
  Matrix<double> mask(1, 10, 1.0);
  mask[0] = mask[9] = 0.0;
  avf::ModelParams<double> params;
  params.add("pred", row(zero_mean_signal(10, rng)));
  avf::Tape<double> tape;
  tape.backward(avf::ccc_loss(tape.param(params.at("pred")), truth, mask));
  const auto& g = params.at("pred").grad;
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[9], 0.0);
  EXPECT_NE(g[4], 0.0);
}

TEST(CccLoss, DegenerateInputGivesUnitLossAndZeroGradient) {
  avf::ModelParams<double> params;
  params.add("pred", Matrix<double>(1, 5, 0.2));
  avf::Tape<double> tape;
  auto loss = avf::ccc_loss(tape.param(params.at("pred")), Matrix<double>(1, 5, 0.2));
  EXPECT_EQ(loss.value()[0], 1.0);
  tape.backward(loss);
  for (double g : params.at("pred").grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(CccLoss, TwoTargetSum) {
  avf::Tape<double> tape;
  const auto pv = row({0.1, 0.2, 0.4}), tv = row({0.0, 0.3, 0.3});
  const auto pa = row({-0.5, 0.0, 0.5}), ta = row({-0.4, 0.1, 0.2});
  auto both = avf::ccc_loss(tape.constant(pv), tv, tape.constant(pa), ta);
  const double expect = (1 - avf::ccc<double>(pv.values(), tv.values()).value) +
                        (1 - avf::ccc<double>(pa.values(), ta.values()).value);
  EXPECT_NEAR(both.value()[0], expect, 1e-15);
}
