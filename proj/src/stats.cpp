#include "pcrowd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcrowd/common.hpp"
#include "pcrowd/special_functions.hpp"

namespace pcrowd {

double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::span<const double> v) {
  if (v.empty()) throw ValidationError("median of an empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

TestResult levene(std::span<const double> a, std::span<const double> b, LeveneCenter center) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("levene: each sample needs >= 2 values");
  auto deviations = [&](std::span<const double> s) {
    const double c = center == LeveneCenter::mean ? mean(s) : median(s);
    std::vector<double> z;
    z.reserve(s.size());
    for (double x : s) z.push_back(std::fabs(x - c));
    return z;
  };
  const auto za = deviations(a);
  const auto zb = deviations(b);
  const double na = static_cast<double>(za.size());
  const double nb = static_cast<double>(zb.size());
  const double n = na + nb;
  const double ma = mean(za);
  const double mb = mean(zb);
  const double grand = (ma * na + mb * nb) / n;

  const double between = na * (ma - grand) * (ma - grand) + nb * (mb - grand) * (mb - grand);
  double within = 0.0;
  for (double z : za) within += (z - ma) * (z - ma);
  for (double z : zb) within += (z - mb) * (z - mb);

  TestResult r;
  r.n1 = a.size();
  r.n2 = b.size();
  r.method = center == LeveneCenter::mean ? "levene(mean)" : "levene(median)";
  if (within == 0.0) {
    r.statistic = between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p_value = between == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = (n - 2.0) * between / within;
  r.p_value = std::clamp(special::f_upper_tail(r.statistic, 1.0, n - 2.0), 0.0, 1.0);
  return r;
}

std::vector<double> mann_whitney_exact_pmf(std::size_t n1, std::size_t n2) {
  // The count of orderings with U = u is the coefficient of q^u in the
  // Gaussian binomial [n1+n2 choose n1] = prod_{i=1..m} (1 - q^{n+i}) / (1 - q^i)
  // with m = min(n1,n2), n = max(n1,n2). Each factor keeps the polynomial
  // equal to [n+i choose i], so every intermediate result is non-negative.
  const std::size_t m = std::min(n1, n2);
  const std::size_t n = std::max(n1, n2);
  std::vector<long double> poly(m * n + 1, 0.0L);
  poly[0] = 1.0L;
  std::size_t degree = 0;
  for (std::size_t i = 1; i <= m; ++i) {
    const std::size_t shift = n + i;
    const std::size_t new_degree = degree + n;
    // Multiply by (1 - q^shift), highest terms first.
    for (std::size_t k = degree + shift; k >= shift; --k) {
      if (k <= m * n) poly[k] -= poly[k - shift];
      if (k == shift) break;
    }
    // Divide by (1 - q^i): running sum with stride i.
    for (std::size_t k = i; k <= new_degree; ++k) poly[k] += poly[k - i];
    // Exact division leaves nothing above new_degree.
    for (std::size_t k = new_degree + 1; k <= std::min(m * n, degree + shift); ++k) poly[k] = 0.0L;
    degree = new_degree;
  }
  long double total = 0.0L;
  for (auto v : poly) total += v;
  std::vector<double> pmf(poly.size());
  for (std::size_t k = 0; k < poly.size(); ++k) pmf[k] = static_cast<double>(poly[k] / total);
  return pmf;
}

double mann_whitney_exact_p(double u, std::size_t n1, std::size_t n2) {
  const auto pmf = mann_whitney_exact_pmf(n1, n2);
  double lower = 0.0;
  double upper = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    const double kk = static_cast<double>(k);
    if (kk <= u + 1e-9) lower += pmf[k];
    if (kk >= u - 1e-9) upper += pmf[k];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                             std::size_t exact_threshold) {
  if (a.empty() || b.empty()) throw ValidationError("wilcoxon: samples must be non-empty");
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto ranks = midranks(all);
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
  const double u1 = r1 - dn1 * (dn1 + 1.0) / 2.0;

  // Tie groups.
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool has_ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) has_ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  TestResult r;
  r.statistic = u1;
  r.n1 = n1;
  r.n2 = n2;
  if (!has_ties && std::min(n1, n2) <= exact_threshold) {
    r.method = "mann-whitney exact";
    r.p_value = mann_whitney_exact_p(u1, n1, n2);
    return r;
  }
  r.method = "mann-whitney normal (tie + continuity corrected)";
  const double n = dn1 + dn2;
  const double mu = dn1 * dn2 / 2.0;
  const double var = dn1 * dn2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double u = std::max(u1, dn1 * dn2 - u1);
  const double z = (u - mu - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(2.0 * special::normal_upper_tail(z), 0.0, 1.0);
  return r;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
  if (x.size() < 3) throw ValidationError("spearman: need at least 3 pairs");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman: constant input");
  CorrelationResult r;
  r.n = x.size();
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::fabs(r.rho) == 1.0) {
    r.p_value = 0.0;
    return r;
  }
  const double df = static_cast<double>(r.n) - 2.0;
  const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
  r.p_value = std::clamp(special::student_t_two_sided(t, df), 0.0, 1.0);
  return r;
}

SignificanceSummary significance_summary(std::span<const CorrelationResult> results,
                                         double alpha) {
  if (results.empty()) throw ValidationError("significance_summary: no results");
  SignificanceSummary s;
  std::size_t significant = 0;
  std::size_t positive = 0;
  for (const auto& r : results) {
    if (!r.defined) continue;
    ++s.n_defined;
    if (r.p_value < alpha) {
      ++significant;
      if (r.rho > 0.0) ++positive;
    }
  }
  if (s.n_defined == 0) return s;
  s.frac_significant = static_cast<double>(significant) / static_cast<double>(s.n_defined);
  if (significant > 0) {
    s.frac_positive_among_significant =
        static_cast<double>(positive) / static_cast<double>(significant);
  }
  return s;
}

}  // namespace pcrowd
