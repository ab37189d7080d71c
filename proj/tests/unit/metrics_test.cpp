#include <gtest/gtest.h>

#include <vector>

#include "pcrowd/common.hpp"
#include "pcrowd/metrics.hpp"

using namespace pcrowd;

namespace {
constexpr auto T = BinaryLabel::toxic;
constexpr auto F = BinaryLabel::not_toxic;
}  // namespace

TEST(Confusion, Examples) {
  const std::vector<BinaryLabel> a{T, F, T};
  const auto cm = confusion(a, a);
  EXPECT_EQ(cm, (ConfusionMatrix{2, 0, 0, 1}));
  const std::vector<BinaryLabel> p{T, T}, g{F, F};
  EXPECT_EQ(confusion(p, g), (ConfusionMatrix{0, 2, 0, 0}));
}

TEST(Confusion, LengthMismatchAndEmpty) {
  const std::vector<BinaryLabel> a{T}, b{T, F}, e;
  EXPECT_THROW(confusion(a, b), ValidationError);
  EXPECT_THROW(confusion(e, e), ValidationError);
}

TEST(Confusion, RandomPairMatchesTally) {
  Rng rng(5);
  std::vector<BinaryLabel> p, g;
  for (int i = 0; i < 20; ++i) {
    p.push_back(uniform_below(rng, 2) ? T : F);
    g.push_back(uniform_below(rng, 2) ? T : F);
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (int i = 0; i < 20; ++i) {
    if (p[i] == T && g[i] == T) ++tp;
    if (p[i] == T && g[i] == F) ++fp;
    if (p[i] == F && g[i] == T) ++fn;
    if (p[i] == F && g[i] == F) ++tn;
  }
  EXPECT_EQ(confusion(p, g), (ConfusionMatrix{tp, fp, fn, tn}));
}

TEST(Report, HandComputedExample) {
  const auto r = report({2, 1, 0, 1});
  EXPECT_DOUBLE_EQ(r.toxic.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.toxic.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.toxic.f1, 0.8);
  EXPECT_DOUBLE_EQ(r.not_toxic.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.not_toxic.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.not_toxic.f1, 2.0 / 3.0);
  EXPECT_NEAR(r.macro_avg_f1, (0.8 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_EQ(r.toxic.support, 2u);
  EXPECT_EQ(r.not_toxic.support, 2u);
  EXPECT_NEAR(r.weighted_avg_f1, (0.8 * 2 + 2.0 / 3.0 * 2) / 4.0, 1e-15);
}

TEST(Report, PerfectAndDegenerate) {
  EXPECT_DOUBLE_EQ(report({3, 0, 0, 4}).macro_avg_f1, 1.0);
  const auto r = report({0, 0, 0, 5});
  EXPECT_DOUBLE_EQ(r.toxic.f1, 0.0);
  EXPECT_DOUBLE_EQ(r.not_toxic.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.macro_avg_f1, 0.5);
  EXPECT_DOUBLE_EQ(r.toxic.precision, 0.0);
  EXPECT_DOUBLE_EQ(r.toxic.recall, 0.0);
}

TEST(Report, InvariantsOnRandomInputs) {
  Rng rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<BinaryLabel> p, g;
    const auto n = 1 + uniform_below(rng, 50);
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(uniform_below(rng, 2) ? T : F);
      g.push_back(uniform_below(rng, 2) ? T : F);
    }
    const auto r = report(confusion(p, g));
    for (double v : {r.accuracy, r.macro_avg_f1, r.weighted_avg_f1, r.toxic.f1, r.not_toxic.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(r.toxic.support + r.not_toxic.support, n);
    // Swapping both label vectors' classes swaps the per-class scores.
    std::vector<BinaryLabel> pn, gn;
    for (auto x : p) pn.push_back(x == T ? F : T);
    for (auto x : g) gn.push_back(x == T ? F : T);
    const auto s = report(confusion(pn, gn));
    EXPECT_DOUBLE_EQ(s.toxic.f1, r.not_toxic.f1);
    EXPECT_DOUBLE_EQ(s.macro_avg_f1, r.macro_avg_f1);
  }
}
