#include "phonosig/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "phonosig/error.hpp"

namespace phonosig {
namespace {

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

double t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

std::vector<double> midranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

SampleSummary summarize(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("summary of an empty sample");
  SampleSummary s;
  s.n = xs.size();
  s.mean = mean_of(xs);
  if (s.n > 1) s.sd = std::sqrt(sample_variance(xs, s.mean));
  if (s.n >= 4) {
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
      const double d2 = (x - s.mean) * (x - s.mean);
      m2 += d2;
      m4 += d2 * d2;
    }
    m2 /= static_cast<double>(s.n);
    m4 /= static_cast<double>(s.n);
    if (m2 > 0.0) s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

TTestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("Welch t needs at least two values per sample");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  if (va + vb == 0.0) throw DomainError("Welch t is undefined when both samples are constant");
  TTestResult r;
  const double se = std::sqrt(va + vb);
  r.t = (ma - mb) / se;
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = t_two_sided(r.t, r.df);
  const double q = boost::math::quantile(boost::math::students_t(r.df), 0.975);
  r.ci_low = (ma - mb) - q * se;
  r.ci_high = (ma - mb) + q * se;
  return r;
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form converges quickly for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs two nonempty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  // Once one sample is exhausted its ECDF is 1; the gap shrinks from here on.
  KsResult r;
  r.statistic = d;
  r.p = kolmogorov_survival(std::sqrt(na * nb / (na + nb)) * d);
  return r;
}

KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw DomainError("KS test needs a nonempty sample");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

AnovaResult anova_oneway(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw DomainError("ANOVA needs at least two groups");
  double grand = 0.0;
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw DomainError("ANOVA needs at least two values per group");
    grand += std::accumulate(g.begin(), g.end(), 0.0);
    total += g.size();
  }
  grand /= static_cast<double>(total);
  double between = 0.0, within = 0.0;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) within += (x - m) * (x - m);
  }
  if (within == 0.0) throw DomainError("ANOVA F is undefined with zero within-group variance");
  AnovaResult r;
  r.df1 = static_cast<double>(groups.size() - 1);
  r.df2 = static_cast<double>(total - groups.size());
  r.f = (between / r.df1) / (within / r.df2);
  r.p = boost::math::cdf(boost::math::complement(boost::math::fisher_f(r.df1, r.df2), r.f));
  return r;
}

AndersonDarlingResult anderson_darling_k(std::span<const std::vector<double>> groups) {
  const std::size_t k = groups.size();
  if (k < 2) throw DomainError("Anderson-Darling k-sample test needs at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw DomainError("Anderson-Darling k-sample test got an empty group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> distinct;
  std::vector<double> mult;
  for (double x : pooled) {
    if (distinct.empty() || x != distinct.back()) {
      distinct.push_back(x);
      mult.push_back(1.0);
    } else {
      mult.back() += 1.0;
    }
  }
  if (distinct.size() < 2) throw DomainError("Anderson-Darling k-sample test needs at least two distinct values");
  const double n_total = static_cast<double>(pooled.size());
  const std::size_t big_n = pooled.size();

  double a2 = 0.0;
  for (const auto& g : groups) {
    std::vector<double> sg(g.begin(), g.end());
    std::sort(sg.begin(), sg.end());
    const double ni = static_cast<double>(sg.size());
    double inner = 0.0;
    double b_cum = 0.0;  // B_j
    std::size_t pos = 0;
    double m_cum = 0.0;  // M_ij
    for (std::size_t j = 0; j < distinct.size(); ++j) {
      double f = 0.0;
      while (pos < sg.size() && sg[pos] == distinct[j]) {
        f += 1.0;
        ++pos;
      }
      const double lj = mult[j];
      const double b_mid = b_cum + lj / 2.0;
      const double m_mid = m_cum + f / 2.0;
      const double num = n_total * m_mid - ni * b_mid;
      const double den = b_mid * (n_total - b_mid) - n_total * lj / 4.0;
      if (den > 0.0) inner += (lj / n_total) * num * num / den;
      b_cum += lj;
      m_cum += f;
    }
    a2 += inner / ni;
  }
  a2 *= (n_total - 1.0) / n_total;

  // harmonic[i] = sum_{j=1}^{i} 1/j
  std::vector<double> harmonic(big_n, 0.0);
  for (std::size_t i = 1; i < big_n; ++i) harmonic[i] = harmonic[i - 1] + 1.0 / static_cast<double>(i);
  const double h_small = harmonic[big_n - 1];
  double g = 0.0;
  for (std::size_t i = 1; i + 1 < big_n; ++i)
    g += (harmonic[big_n - 1] - harmonic[i]) / static_cast<double>(big_n - i);
  double h_big = 0.0;
  for (const auto& grp : groups) h_big += 1.0 / static_cast<double>(grp.size());
  const double kk = static_cast<double>(k);
  const double a = (4 * g - 6) * (kk - 1) + (10 - 6 * g) * h_big;
  const double b = (2 * g - 4) * kk * kk + 8 * h_small * kk + (2 * g - 14 * h_small - 4) * h_big -
                   8 * h_small + 4 * g - 6;
  const double c = (6 * h_small + 2 * g - 2) * kk * kk + (4 * h_small - 4 * g + 6) * kk +
                   (2 * h_small - 6) * h_big + 4 * h_small;
  const double d = (2 * h_small + 6) * kk * kk - 4 * h_small * kk;
  const double n = n_total;
  const double var = (a * n * n * n + b * n * n + c * n + d) / ((n - 1) * (n - 2) * (n - 3));
  if (!(var > 0.0)) throw DomainError("Anderson-Darling variance is not positive (too few observations)");

  AndersonDarlingResult r;
  r.ad = a2;
  r.t_ad = (a2 - (kk - 1)) / std::sqrt(var);
  r.p = anderson_darling_k_pvalue(r.t_ad, k);
  return r;
}

double anderson_darling_k_pvalue(double t_ad, std::size_t k) {
  static constexpr double sig[] = {0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001};
  static constexpr double b0[] = {0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085};
  static constexpr double b1[] = {-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615};
  static constexpr double b2[] = {-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154};
  if (k < 2) throw DomainError("Anderson-Darling p-value needs k >= 2");
  const double m = static_cast<double>(k - 1);
  double tm[7], logit[7];
  for (int i = 0; i < 7; ++i) {
    tm[i] = b0[i] + b1[i] / std::sqrt(m) + b2[i] / m;
    logit[i] = std::log(sig[i] / (1.0 - sig[i]));
  }
  double fit;
  if (t_ad < tm[0] || t_ad > tm[6]) {
    const int i = t_ad < tm[0] ? 0 : 5;
    const double slope = (logit[i + 1] - logit[i]) / (tm[i + 1] - tm[i]);
    fit = logit[i] + slope * (t_ad - tm[i]);
  } else {
    // Least-squares quadratic in t through the seven tabulated points.
    double s[5] = {0, 0, 0, 0, 0}, y[3] = {0, 0, 0};
    for (int i = 0; i < 7; ++i) {
      double p = 1.0;
      for (int e = 0; e < 5; ++e) {
        s[e] += p;
        if (e < 3) y[e] += p * logit[i];
        p *= tm[i];
      }
    }
    // Normal equations [s0 s1 s2; s1 s2 s3; s2 s3 s4] c = y, by Cramer's rule.
    auto det3 = [](double a11, double a12, double a13, double a21, double a22, double a23, double a31,
                   double a32, double a33) {
      return a11 * (a22 * a33 - a23 * a32) - a12 * (a21 * a33 - a23 * a31) + a13 * (a21 * a32 - a22 * a31);
    };
    const double det = det3(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
    const double c0 = det3(y[0], s[1], s[2], y[1], s[2], s[3], y[2], s[3], s[4]) / det;
    const double c1 = det3(s[0], y[0], s[2], s[1], y[1], s[3], s[2], y[2], s[4]) / det;
    const double c2 = det3(s[0], s[1], y[0], s[1], s[2], y[1], s[2], s[3], y[2]) / det;
    fit = c0 + c1 * t_ad + c2 * t_ad * t_ad;
  }
  return 1.0 / (1.0 + std::exp(-fit));
}

CorrelationResult pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("correlation needs samples of equal length");
  if (a.size() < 3) throw DomainError("correlation needs at least three pairs");
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DomainError("correlation is undefined for constant input");
  CorrelationResult r;
  r.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double df = static_cast<double>(a.size() - 2);
  if (std::abs(r.r) == 1.0) {
    r.p = 0.0;
  } else {
    r.p = t_two_sided(r.r * std::sqrt(df / (1.0 - r.r * r.r)), df);
  }
  return r;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  return pearson_r(ra, rb).r;
}

double quantile(std::span<const double> xs, double prob) {
  if (xs.empty()) throw DomainError("quantile of an empty sample");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace phonosig
