#pragma once

// Descriptive statistics and the two-sample / k-sample comparisons used to
// contrast distributions of K. Asymptotic p-values throughout.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace phonosig {

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  // n - 1 denominator; 0 when n == 1.
  double sd = 0.0;
  // m4 / m2^2 - 3 with biased moments; unset for n < 4 or zero variance.
  std::optional<double> excess_kurtosis;
};

SampleSummary summarize(std::span<const double> xs);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Welch two-sample t test of mean(a) - mean(b) with a 95% interval.
TTestResult welch_t(std::span<const double> a, std::span<const double> b);

struct KsResult {
  double statistic = 0.0;
  double p = 1.0;
};

// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);
KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf);

struct AnovaResult {
  double f = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p = 1.0;
};

AnovaResult anova_oneway(std::span<const std::vector<double>> groups);

struct AndersonDarlingResult {
  // Midrank (ties-adjusted) A2akN.
  double ad = 0.0;
  // (ad - (k - 1)) / sigma_N
  double t_ad = 0.0;
  double p = 1.0;
};

AndersonDarlingResult anderson_darling_k(std::span<const std::vector<double>> groups);

// Asymptotic p for the standardized statistic with k samples, interpolating
// the Scholz-Stephens percentage points in logit scale.
double anderson_darling_k_pvalue(double t_ad, std::size_t k);

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;
};

CorrelationResult pearson_r(std::span<const double> a, std::span<const double> b);

// Pearson correlation of midranks.
double spearman_rho(std::span<const double> a, std::span<const double> b);

struct ShapiroWilkResult {
  double w = 0.0;
  double p = 1.0;
};

// Royston's approximation (AS R94); 3 <= n <= 5000.
ShapiroWilkResult shapiro_wilk(std::span<const double> xs);

// R type-7 sample quantile.
double quantile(std::span<const double> xs, double prob);

}  // namespace phonosig
