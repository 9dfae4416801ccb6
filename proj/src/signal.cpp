#include "phonosig/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "phonosig/error.hpp"
#include "phonosig/rng.hpp"

namespace phonosig {

KCalculator::KCalculator(const PhyloTree& tree) : KCalculator(vcv(tree)) {}

KCalculator::KCalculator(const VcvMatrix& c) : llt_(factor_vcv(c.entries)) {
  const auto n = c.entries.rows();
  if (n < 2) throw DomainError("K needs at least two tips");
  inv_ones_ = llt_.solve(Eigen::VectorXd::Ones(n));
  ones_inv_ones_ = inv_ones_.sum();
  expected_ratio_ =
      (c.entries.trace() - static_cast<double>(n) / ones_inv_ones_) / static_cast<double>(n - 1);
}

double KCalculator::phylo_mean(std::span<const double> values) const {
  if (values.size() != size()) throw InputError("value count does not match tip count");
  const Eigen::Map<const Eigen::VectorXd> x(values.data(), static_cast<Eigen::Index>(values.size()));
  return inv_ones_.dot(x) / ones_inv_ones_;
}

double KCalculator::k(std::span<const double> values) const {
  if (values.size() != size()) throw InputError("value count does not match tip count");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw DomainError("K is undefined for constant data");
  const Eigen::Map<const Eigen::VectorXd> x(values.data(), static_cast<Eigen::Index>(values.size()));
  const double mean = inv_ones_.dot(x) / ones_inv_ones_;
  const Eigen::VectorXd e = x.array() - mean;
  // The (n - 1) denominators of MSE0 and MSE cancel in their ratio.
  const double mse0 = e.squaredNorm();
  const double mse = e.dot(llt_.solve(e));
  if (!(mse > 0.0)) throw DomainError("phylogenetic MSE is not positive");
  return (mse0 / mse) / expected_ratio_;
}

double phylo_mean(const TipValues& values, const VcvMatrix& c) {
  if (values.labels.size() != c.tip_order.size()) throw InputError("value count does not match tip count");
  std::vector<double> aligned(c.tip_order.size());
  for (std::size_t i = 0; i < c.tip_order.size(); ++i) {
    auto it = std::find(values.labels.begin(), values.labels.end(), c.tip_order[i]);
    if (it == values.labels.end()) throw InputError("no value for tip '" + c.tip_order[i] + "'");
    aligned[i] = values.values[static_cast<std::size_t>(it - values.labels.begin())];
  }
  return KCalculator(c).phylo_mean(aligned);
}

double blomberg_k(const PhyloTree& tree, const TipValues& values) {
  return KCalculator(tree).k(values.aligned_to(tree));
}

namespace {

double fraction(std::size_t hits, std::size_t n, bool pseudocount) {
  if (pseudocount) return static_cast<double>(hits + 1) / static_cast<double>(n + 1);
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

KResult k_permutation_test(const PhyloTree& tree, const TipValues& values,
                           const PermutationOptions& options, std::uint64_t seed) {
  if (options.n_perm < 1) throw InputError("need at least one permutation");
  auto x = values.aligned_to(tree);
  const ContrastPlan plan(tree);
  const KCalculator calc(tree);

  KResult r;
  r.k = calc.k(x);
  r.n_used = x.size();
  r.n_perm = options.n_perm;

  std::vector<double> scratch;
  r.observed_pic_variance = plan.variance(x, scratch);
  Rng rng = Rng::derive(seed, {0});
  std::size_t hits = 0;
  for (std::size_t i = 0; i < options.n_perm; ++i) {
    rng.shuffle(std::span<double>(x));
    if (plan.variance(x, scratch) <= r.observed_pic_variance) ++hits;
  }
  r.p = fraction(hits, options.n_perm, options.pseudocount);
  return r;
}

std::string_view to_string(DClass c) {
  switch (c) {
    case DClass::over_clumped: return "over-clumped";
    case DClass::phylogenetic: return "phylogenetic";
    case DClass::intermediate: return "intermediate";
    case DClass::random: return "random";
    case DClass::over_dispersed: return "over-dispersed";
    case DClass::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

DifferencePlan::DifferencePlan(const PhyloTree& tree)
    : node_count_(tree.node_count()), tip_nodes_(tree.tips().begin(), tree.tips().end()) {
  if (!tree.is_bifurcating()) throw DomainError("D needs a fully bifurcating tree (polytomy found)");
  for (NodeId id : tree.postorder()) {
    const auto& ch = tree.node(id).children;
    if (ch.size() == 1) ops_.push_back({id, ch[0], ch[0]});
    else if (ch.size() == 2) ops_.push_back({id, ch[0], ch[1]});
  }
}

double DifferencePlan::sum(std::span<const double> tips, std::vector<double>& scratch) const {
  if (tips.size() != tip_nodes_.size()) throw InputError("value count does not match tip count");
  scratch.resize(node_count_);
  for (std::size_t i = 0; i < tip_nodes_.size(); ++i) scratch[tip_nodes_[i]] = tips[i];
  double total = 0.0;
  for (const Op& op : ops_) {
    const double l = scratch[op.left];
    const double r = scratch[op.right];
    total += std::abs(l - r);
    scratch[op.node] = 0.5 * (l + r);
  }
  return total;
}

double sum_of_differences(const PhyloTree& tree, const TipValues& values) {
  const auto x = values.aligned_to(tree);
  for (double v : x)
    if (v != 0.0 && v != 1.0) throw InputError("sum of differences needs 0/1 values");
  std::vector<double> scratch;
  return DifferencePlan(tree).sum(x, scratch);
}

double d_statistic(double sum_d_obs, double mean_random, double mean_brownian) {
  const double denom = mean_random - mean_brownian;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (sum_d_obs - mean_brownian) / denom;
}

DResult fritz_purvis_d(const PhyloTree& tree, const TipValues& values,
                       const PermutationOptions& options, std::uint64_t seed, double alpha) {
  if (options.n_perm < 1) throw InputError("need at least one permutation");
  auto x = values.aligned_to(tree);
  std::size_t ones = 0;
  for (double v : x) {
    if (v != 0.0 && v != 1.0) throw InputError("D needs 0/1 values");
    if (v == 1.0) ++ones;
  }
  if (ones == 0 || ones == x.size()) throw DomainError("D needs at least one 0 and one 1");

  const DifferencePlan plan(tree);
  BrownianSampler sampler(tree);
  std::vector<double> scratch;

  DResult r;
  r.n_used = x.size();
  r.n_perm = options.n_perm;
  r.sum_d_obs = plan.sum(x, scratch);

  std::vector<double> random_sums(options.n_perm);
  std::vector<double> brownian_sums(options.n_perm);
  Rng random_rng = Rng::derive(seed, {1});
  Rng brownian_rng = Rng::derive(seed, {2});
  std::vector<double> shuffled = x;
  std::vector<double> continuous(x.size());
  std::vector<double> binary(x.size());
  for (std::size_t i = 0; i < options.n_perm; ++i) {
    random_rng.shuffle(std::span<double>(shuffled));
    random_sums[i] = plan.sum(shuffled, scratch);
    sampler.draw(1.0, 0.0, brownian_rng, continuous);
    threshold_binarize(continuous, ones, binary);
    brownian_sums[i] = plan.sum(binary, scratch);
  }
  const double n = static_cast<double>(options.n_perm);
  r.mean_sum_d_random = std::accumulate(random_sums.begin(), random_sums.end(), 0.0) / n;
  r.mean_sum_d_brownian = std::accumulate(brownian_sums.begin(), brownian_sums.end(), 0.0) / n;
  r.d = d_statistic(r.sum_d_obs, r.mean_sum_d_random, r.mean_sum_d_brownian);

  if (std::isnan(r.d)) {
    r.p_d_eq_0 = r.p_d_eq_1 = std::numeric_limits<double>::quiet_NaN();
    r.classification = DClass::indeterminate;
    return r;
  }
  std::size_t random_below = 0;
  std::size_t brownian_above = 0;
  for (std::size_t i = 0; i < options.n_perm; ++i) {
    if (d_statistic(random_sums[i], r.mean_sum_d_random, r.mean_sum_d_brownian) < r.d) ++random_below;
    if (d_statistic(brownian_sums[i], r.mean_sum_d_random, r.mean_sum_d_brownian) > r.d) ++brownian_above;
  }
  r.p_d_eq_1 = fraction(random_below, options.n_perm, options.pseudocount);
  r.p_d_eq_0 = fraction(brownian_above, options.n_perm, options.pseudocount);
  r.classification = classify_d(r, alpha);
  return r;
}

DClass classify_d(const DResult& r, double alpha) {
  if (std::isnan(r.d) || std::isnan(r.p_d_eq_0) || std::isnan(r.p_d_eq_1)) return DClass::indeterminate;
  auto differs = [alpha](double p) { return p < alpha || p > 1.0 - alpha; };
  const bool from0 = differs(r.p_d_eq_0);
  const bool from1 = differs(r.p_d_eq_1);
  if (from0 && r.d < 0.0) return DClass::over_clumped;
  if (from1 && r.d > 1.0) return DClass::over_dispersed;
  if (from0 && from1) return DClass::intermediate;
  if (from1) return DClass::phylogenetic;
  if (from0) return DClass::random;
  return DClass::indeterminate;
}

}  // namespace phonosig
