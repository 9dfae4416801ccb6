#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "phonosig/error.hpp"
#include "phonosig/evolve.hpp"
#include "phonosig/stats.hpp"

using namespace phonosig;

TEST_CASE("zero-length branches give the root value everywhere") {
  const auto t = parse_newick("((A:0,B:0):0,C:0);");
  const auto v = simulate_bm(t, 2.0, 3.5, 11);
  for (double x : v.values) CHECK(x == 3.5);
}

TEST_CASE("BM tip variances and covariances match sigma2 * C") {
  const auto two = parse_newick("(A:1,B:4);");
  Rng rng(1);
  std::vector<double> a, b;
  for (int i = 0; i < 10000; ++i) {
    const auto v = simulate_bm(two, 1.0, 0.0, rng);
    a.push_back(v.values[0]);
    b.push_back(v.values[1]);
  }
  CHECK(std::abs(summarize(a).sd * summarize(a).sd - 1.0) < 0.1);
  CHECK(std::abs(summarize(b).sd * summarize(b).sd - 4.0) < 0.4);

  const auto t = parse_newick("((A:1,B:0.5):1.5,(C:2,D:1):0.5);");
  const auto c = vcv(t).entries;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
  Rng r2(2);
  const int reps = 10000;
  for (int i = 0; i < reps; ++i) {
    const auto v = simulate_bm(t, 1.0, 0.0, r2);
    const Eigen::Map<const Eigen::Vector4d> x(v.values.data());
    acc += x * x.transpose();
  }
  acc /= reps;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (c(i, j) > 0.1 * c.maxCoeff()) CHECK(std::abs(acc(i, j) - c(i, j)) / c(i, j) < 0.1);
}

TEST_CASE("simulate_mixed") {
  const auto t = yule_tree(40, 1.0, 8);
  Rng r1(77), r2(77);
  const auto bm = simulate_bm(t, 1.0, 0.0, r1);
  const auto mixed = simulate_mixed(t, 1.0, r2);
  // p = 1 is an affine image of the BM draw, so ranks agree.
  std::vector<std::size_t> i1(40), i2(40);
  std::iota(i1.begin(), i1.end(), 0);
  std::iota(i2.begin(), i2.end(), 0);
  std::sort(i1.begin(), i1.end(), [&](auto x, auto y) { return bm.values[x] < bm.values[y]; });
  std::sort(i2.begin(), i2.end(), [&](auto x, auto y) { return mixed.values[x] < mixed.values[y]; });
  CHECK(i1 == i2);

  for (double p : {0.0, 0.3, 0.7, 1.0}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
      const auto z = simulate_mixed(t, p, s);
      const auto sm = summarize(z.values);
      total += sm.sd * sm.sd;
    }
    CHECK(std::abs(total / 200 - 1.0) < 0.1);
  }
  CHECK(simulate_mixed(t, 0.4, 5).values == simulate_mixed(t, 0.4, 5).values);
  CHECK_THROWS_AS(simulate_mixed(t, 1.5, 5), InputError);
}

TEST_CASE("threshold_binarize") {
  const auto t = parse_newick("(A:1,B:1,C:1);");
  const auto v = TipValues::for_tree(t, {0.1, 0.5, 0.9});
  CHECK(threshold_binarize(v, 1).values == std::vector<double>{0, 0, 1});
  CHECK(threshold_binarize(v, 0).values == std::vector<double>{0, 0, 0});
  CHECK(threshold_binarize(v, 3).values == std::vector<double>{1, 1, 1});

  // Ties at the cut go to the earlier tip.
  const auto tied = TipValues::for_tree(t, {0.5, 0.5, 0.5});
  CHECK(threshold_binarize(tied, 1).values == std::vector<double>{1, 0, 0});
  CHECK(threshold_binarize(tied, 2).values == std::vector<double>{1, 1, 0});

  Rng rng(3);
  std::vector<double> x(50), out(50);
  for (int rep = 0; rep < 50; ++rep) {
    for (auto& e : x) e = std::round(rng.normal() * 2);
    const auto k = static_cast<std::size_t>(rng.below(51));
    threshold_binarize(x, k, out);
    CHECK(std::count(out.begin(), out.end(), 1.0) == static_cast<long>(k));
  }
}

TEST_CASE("pic on small trees") {
  const auto t = parse_newick("(A:1,B:1);");
  const auto c = pic(t, TipValues::for_tree(t, {3, 1}));
  REQUIRE(c.values.size() == 1);
  CHECK(std::abs(c.values[0] - 1.41421356237) < 1e-9);
  CHECK(pic_variance(c) == doctest::Approx(2.0).epsilon(1e-15));

  const auto four = parse_newick("((A:1,B:2):0.5,(C:1.5,D:0.25):1);");
  const auto flat = pic(four, TipValues::for_tree(four, {2, 2, 2, 2}));
  for (double x : flat.values) CHECK(x == 0.0);

  CHECK_THROWS_AS(pic(parse_newick("(A:1,B:1,C:1);"), TipValues::for_tree(parse_newick("(A:1,B:1,C:1);"), {1, 2, 3})), DomainError);
  CHECK_THROWS_AS(pic(parse_newick("((A:0,B:0):1,C:1);"), TipValues::for_tree(parse_newick("((A:0,B:0):1,C:1);"), {1, 2, 3})), DomainError);
  // One zero branch is fine.
  const auto z = parse_newick("((A:0,B:1):1,C:1);");
  for (double x : pic(z, TipValues::for_tree(z, {1, 2, 3})).values) CHECK(std::isfinite(x));
  CHECK_THROWS_AS(pic_variance(Contrasts{}), DomainError);
}

TEST_CASE("pic matches the recursive oracle and GLS whitening") {
  const auto four = parse_newick("((A:1,B:1):1,(C:1,D:1):1);");
  const std::vector<double> x{1.0, -0.5, 2.0, 0.25};
  const auto c = pic(four, TipValues::for_tree(four, x));
  auto o = oracle::pic_recursive(four, x);
  auto got = c.values;
  REQUIRE(got.size() == 3);
  // Same contrasts, possibly visited in another order.
  std::sort(got.begin(), got.end());
  std::sort(o.begin(), o.end());
  double ss = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(got[i] - o[i]) < 1e-12);
    ss += got[i] * got[i];
  }
  // Contrast sum of squares is the GLS residual quadratic form.
  const double q = oracle::gls_quadratic(vcv(four).entries, x);
  CHECK(std::abs(ss - q) < 1e-9);
  CHECK(std::abs(pic_variance(c) - q / 3) < 1e-9);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto t = yule_tree(25, 1.0, s + 100);
    const auto v = simulate_bm(t, 1.0, 0.0, s);
    const auto got = pic(t, v);
    const auto want = oracle::pic_recursive(t, v.values);
    REQUIRE(got.values.size() == want.size());
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      a += got.values[i] * got.values[i];
      b += want[i] * want[i];
    }
    CHECK(std::abs(a - b) < 1e-9 * std::max(1.0, b));
    CHECK(std::abs(a - oracle::gls_quadratic(vcv(t).entries, v.values)) < 1e-8 * std::max(1.0, b));
  }
}

TEST_CASE("ContrastPlan agrees with pic") {
  const auto t = yule_tree(30, 1.0, 4);
  const ContrastPlan plan(t);
  CHECK(plan.contrast_count() == 29);
  std::vector<double> scratch;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto v = simulate_bm(t, 1.0, 0.0, s);
    CHECK(std::abs(plan.variance(v.values, scratch) - pic_variance(pic(t, v))) < 1e-12);
  }
}

TEST_CASE("BM contrasts are uncorrelated") {
  const auto t = parse_newick("(((A:1,B:1):1,(C:1,D:1):1):1,((E:1,F:1):1,(G:1,H:1):1):1);");
  const ContrastPlan plan(t);
  const std::size_t m = plan.contrast_count();
  std::vector<std::vector<double>> cols(m);
  std::vector<double> out(m), scratch;
  std::vector<double> tips(8);
  Rng rng(12);
  BrownianSampler sampler(t);
  for (int rep = 0; rep < 1000; ++rep) {
    sampler.draw(1.0, 0.0, rng, tips);
    plan.contrasts(tips, out, scratch);
    for (std::size_t i = 0; i < m; ++i) cols[i].push_back(out[i]);
  }
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      total += std::abs(pearson_r(cols[i], cols[j]).r);
      ++pairs;
    }
  CHECK(total / pairs < 0.05);
}
