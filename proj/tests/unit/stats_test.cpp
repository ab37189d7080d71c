#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "pcrowd/common.hpp"
#include "pcrowd/stats.hpp"

using namespace pcrowd;

namespace {

nlohmann::json reference() {
  std::ifstream in(std::string(PCROWD_FIXTURE_DIR) + "/stats_reference.json");
  return nlohmann::json::parse(in);
}

std::vector<double> vec(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST(StatsReference, LeveneMatchesScipy) {
  const auto ref = reference();
  for (const auto& c : ref["cases"]) {
    const auto r = levene(vec(c["a"]), vec(c["b"]));
    EXPECT_LT(rel_err(r.statistic, c["levene"]["statistic"]), 1e-9);
    EXPECT_LT(std::abs(r.p_value - c["levene"]["p_value"].get<double>()), 1e-9);
  }
  const auto& s = ref["levene_small"];
  const auto r = levene(vec(s["a"]), vec(s["b"]));
  EXPECT_NEAR(r.statistic, 3.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.13397459621556132, 1e-9);
}

TEST(StatsReference, MannWhitneyMatchesScipy) {
  const auto ref = reference();
  std::size_t exact_cases = 0;
  for (const auto& c : ref["cases"]) {
    const auto r = wilcoxon_rank_sum(vec(c["a"]), vec(c["b"]), 8);
    EXPECT_DOUBLE_EQ(r.statistic, c["mannwhitney"]["statistic"].get<double>());
    EXPECT_NEAR(r.p_value, c["mannwhitney"]["p_value"].get<double>(), 1e-9);
    if (c["mannwhitney"]["exact"].get<bool>()) ++exact_cases;
  }
  EXPECT_GT(exact_cases, 0u);
}

TEST(StatsReference, SpearmanMatchesScipy) {
  const auto ref = reference();
  for (const auto& c : ref["cases"]) {
    const std::size_t n = c["spearman_prefix"];
    auto a = vec(c["a"]), b = vec(c["b"]);
    a.resize(n);
    b.resize(n);
    const auto r = spearman(a, b);
    EXPECT_NEAR(r.rho, c["spearman"]["rho"].get<double>(), 1e-9);
    EXPECT_NEAR(r.p_value, c["spearman"]["p_value"].get<double>(), 1e-9);
  }
}

TEST(MannWhitney, SmallExactCase) {
  const std::vector<double> a{1, 2}, b{10, 11};
  const auto r = wilcoxon_rank_sum(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_value, 1.0 / 3.0, 1e-12);
}

TEST(MannWhitney, ExactPmfAgreesWithEnumeration) {
  // Enumerate every assignment of ranks 1..n1+n2 to sample a.
  for (std::size_t n1 = 1; n1 <= 4; ++n1) {
    for (std::size_t n2 = 1; n2 <= 4; ++n2) {
      const std::size_t n = n1 + n2;
      std::vector<double> counts(n1 * n2 + 1, 0.0);
      double total = 0;
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        // U = number of (a, b) pairs with a above b.
        std::size_t u = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!((mask >> i) & 1u)) continue;
          for (std::size_t j = 0; j < i; ++j) u += ((mask >> j) & 1u) ? 0 : 1;
        }
        counts[u] += 1;
        total += 1;
      }
      const auto pmf = mann_whitney_exact_pmf(n1, n2);
      ASSERT_EQ(pmf.size(), counts.size());
      double sum = 0;
      for (std::size_t u = 0; u < pmf.size(); ++u) {
        EXPECT_NEAR(pmf[u], counts[u] / total, 1e-12);
        sum += pmf[u];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Spearman, KnownValues) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 3, 2, 5, 4};
  EXPECT_NEAR(spearman(x, y).rho, 0.8, 1e-12);
  const std::vector<double> up{2, 4, 6, 8, 10}, down{5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(x, up).rho, 1.0, 1e-12);
  EXPECT_NEAR(spearman(x, down).rho, -1.0, 1e-12);
  EXPECT_NEAR(spearman(x, up).p_value, 0.0, 1e-12);
  const std::vector<double> flat{3, 3, 3, 3, 3};
  EXPECT_THROW(spearman(x, flat), ValidationError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{2, 1}), ValidationError);
}

TEST(Midranks, AveragesTies) {
  const std::vector<double> v{10, 20, 20, 5};
  EXPECT_EQ(midranks(v), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Levene, IdenticalInputsAndConstants) {
  const std::vector<double> a{1, 2, 5, 7, 8};
  const auto same = levene(a, a);
  EXPECT_NEAR(same.statistic, 0.0, 1e-12);
  EXPECT_NEAR(same.p_value, 1.0, 1e-12);
  const std::vector<double> c{3, 3, 3}, d{4, 4};
  const auto flat = levene(c, d);
  EXPECT_EQ(flat.statistic, 0.0);
  EXPECT_EQ(flat.p_value, 1.0);
}

TEST(Levene, DetectsVarianceDifference) {
  Rng rng(5);
  std::vector<double> a, b;
  for (int i = 0; i < 200; ++i) {
    a.push_back(standard_normal(rng));
    b.push_back(3.0 * standard_normal(rng));
  }
  EXPECT_LT(levene(a, b).p_value, 1e-6);
  EXPECT_LT(levene(a, b, LeveneCenter::median).p_value, 1e-6);
}

TEST(Levene, NullRejectionRateNearAlpha) {
  Rng rng(6);
  int rejections = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> a, b;
    for (int i = 0; i < 30; ++i) {
      a.push_back(standard_normal(rng));
      b.push_back(standard_normal(rng));
    }
    if (levene(a, b).p_value < 0.05) ++rejections;
  }
  EXPECT_GT(rejections, 25);
  EXPECT_LT(rejections, 80);
}

TEST(SignificanceSummary, Examples) {
  std::vector<CorrelationResult> rs;
  for (double p : {0.01, 0.02, 0.03, 0.04, 0.5}) rs.push_back({0.4, p, 10, true});
  rs[3].rho = -0.4;
  rs.push_back({0.0, 1.0, 10, false});
  const auto s = significance_summary(rs, 0.05);
  EXPECT_EQ(s.n_defined, 5u);
  EXPECT_NEAR(s.frac_significant, 0.8, 1e-12);
  ASSERT_TRUE(s.frac_positive_among_significant);
  EXPECT_NEAR(*s.frac_positive_among_significant, 0.75, 1e-12);

  std::vector<CorrelationResult> none(4, {0.3, 0.5, 10, true});
  const auto n = significance_summary(none, 0.05);
  EXPECT_EQ(n.frac_significant, 0.0);
  EXPECT_FALSE(n.frac_positive_among_significant);
}

TEST(Descriptives, Basics) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(mean(v), 2.5);
  EXPECT_EQ(median(v), 2.5);
  EXPECT_NEAR(sample_variance(v), 5.0 / 3.0, 1e-12);
}
