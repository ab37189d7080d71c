#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pcrowd {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::string method;
};

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  // False when the correlation is undefined (a constant input).
  bool defined = true;
};

enum class LeveneCenter { mean, median };

struct StatConfig {
  LeveneCenter levene_center = LeveneCenter::mean;
  std::size_t wilcoxon_exact_threshold = 8;
  double alpha_variance = 0.001;
  double alpha_shift = 0.05;
};

// Midranks (average rank for ties), 1-based.
std::vector<double> midranks(std::span<const double> values);

// Two-group Levene W on absolute deviations from the group center; p from
// F(1, n1+n2-2). Both samples constant: W = 0, p = 1.
TestResult levene(std::span<const double> a, std::span<const double> b,
                  LeveneCenter center = LeveneCenter::mean);

// Two-sided Mann-Whitney U (statistic = U of sample a). Exact null
// distribution when min(n1,n2) <= exact_threshold and there are no ties;
// otherwise the tie-corrected normal approximation with continuity
// correction.
TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                             std::size_t exact_threshold = 8);

// Null distribution of U for tie-free samples: pmf[u] for u in [0, n1*n2].
std::vector<double> mann_whitney_exact_pmf(std::size_t n1, std::size_t n2);

// Two-sided exact p for an observed U: min(1, 2 * smaller tail).
double mann_whitney_exact_p(double u, std::size_t n1, std::size_t n2);

// Throws ValidationError on a constant input or n < 3.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

struct SignificanceSummary {
  double frac_significant = 0.0;
  // Over significant results only; none when nothing is significant.
  std::optional<double> frac_positive_among_significant;
  std::size_t n_defined = 0;
};

// Undefined results are excluded from both fractions.
SignificanceSummary significance_summary(std::span<const CorrelationResult> results,
                                         double alpha);

double mean(std::span<const double> v);
double median(std::span<const double> v);
double sample_variance(std::span<const double> v);

}  // namespace pcrowd
