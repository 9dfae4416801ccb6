#include "phonosig/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "phonosig/error.hpp"

namespace phonosig {

TipValues TipValues::for_tree(const PhyloTree& tree, std::vector<double> values) {
  if (values.size() != tree.tip_count()) throw InputError("value count does not match tip count");
  return TipValues{tree.tip_labels(), std::move(values)};
}

std::vector<double> TipValues::aligned_to(const PhyloTree& tree) const {
  if (labels.size() != values.size()) throw InputError("labels and values differ in length");
  if (labels.size() != tree.tip_count()) throw InputError("value count does not match tip count");
  std::vector<double> out(tree.tip_count());
  std::vector<char> filled(out.size(), 0);
  std::unordered_map<NodeId, std::size_t> pos;
  const auto tips = tree.tips();
  for (std::size_t i = 0; i < tips.size(); ++i) pos.emplace(tips[i], i);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto id = tree.find_tip(labels[i]);
    if (!id) throw InputError("no tip labelled '" + labels[i] + "'");
    const auto k = pos.at(*id);
    if (filled[k]) throw InputError("duplicate value for tip '" + labels[i] + "'");
    filled[k] = 1;
    out[k] = values[i];
  }
  return out;
}

BrownianSampler::BrownianSampler(const PhyloTree& tree)
    : preorder_(tree.preorder()),
      parent_(tree.node_count()),
      sqrt_length_(tree.node_count(), 0.0),
      tip_nodes_(tree.tips().begin(), tree.tips().end()),
      node_values_(tree.node_count(), 0.0) {
  for (NodeId id = 0; id < tree.node_count(); ++id) {
    parent_[id] = tree.node(id).parent;
    sqrt_length_[id] = std::sqrt(tree.branch_length(id));
  }
}

void BrownianSampler::draw(double sigma2, double root_value, Rng& rng, std::span<double> tips) {
  if (tips.size() != tip_nodes_.size()) throw InputError("value count does not match tip count");
  const double sigma = std::sqrt(sigma2);
  for (NodeId id : preorder_) {
    if (!parent_[id]) {
      node_values_[id] = root_value;
      continue;
    }
    node_values_[id] = node_values_[*parent_[id]] + sigma * sqrt_length_[id] * rng.normal();
  }
  for (std::size_t i = 0; i < tip_nodes_.size(); ++i) tips[i] = node_values_[tip_nodes_[i]];
}

TipValues simulate_bm(const PhyloTree& tree, double sigma2, double root_value, Rng& rng) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InputError("sigma2 must be finite and nonnegative");
  BrownianSampler sampler(tree);
  std::vector<double> tips(tree.tip_count());
  sampler.draw(sigma2, root_value, rng, tips);
  return TipValues::for_tree(tree, std::move(tips));
}

TipValues simulate_bm(const PhyloTree& tree, double sigma2, double root_value, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_bm(tree, sigma2, root_value, rng);
}

namespace {

void standardize(std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  for (double& x : xs) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

}  // namespace

TipValues simulate_mixed(const PhyloTree& tree, double p_brownian, Rng& rng) {
  if (!(p_brownian >= 0.0 && p_brownian <= 1.0)) throw InputError("Brownian share must lie in [0, 1]");
  auto signal = simulate_bm(tree, 1.0, 0.0, rng).values;
  std::vector<double> noise(signal.size());
  for (double& x : noise) x = rng.normal();
  standardize(signal);
  standardize(noise);
  const double a = std::sqrt(p_brownian);
  const double b = std::sqrt(1.0 - p_brownian);
  for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = a * signal[i] + b * noise[i];
  return TipValues::for_tree(tree, std::move(signal));
}

TipValues simulate_mixed(const PhyloTree& tree, double p_brownian, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_mixed(tree, p_brownian, rng);
}

void threshold_binarize(std::span<const double> values, std::size_t n_ones, std::span<double> out) {
  if (n_ones > values.size()) throw InputError("more ones requested than tips");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < n_ones; ++k) out[order[k]] = 1.0;
}

TipValues threshold_binarize(const TipValues& values, std::size_t n_ones) {
  TipValues out{values.labels, std::vector<double>(values.values.size())};
  threshold_binarize(values.values, n_ones, out.values);
  return out;
}

ContrastPlan::ContrastPlan(const PhyloTree& tree)
    : node_count_(tree.node_count()), tip_nodes_(tree.tips().begin(), tree.tips().end()) {
  if (!tree.is_bifurcating()) throw DomainError("independent contrasts need a bifurcating tree (polytomy found)");
  // Extended branch lengths: own length plus the contribution carried up from
  // the daughters of each internal node.
  std::vector<double> extended(tree.node_count(), 0.0);
  for (NodeId id : tree.postorder()) {
    const auto& n = tree.node(id);
    const double own = tree.branch_length(id);
    if (n.is_tip()) {
      extended[id] = own;
      continue;
    }
    if (n.children.size() == 1) {
      unary_.push_back({id, n.children[0]});
      ops_.push_back({true, unary_.size() - 1});
      extended[id] = own + extended[n.children[0]];
      continue;
    }
    const NodeId l = n.children[0];
    const NodeId r = n.children[1];
    const double bl = extended[l];
    const double br = extended[r];
    const double total = bl + br;
    if (!(total > 0.0)) throw DomainError("both daughter branches have zero length; contrast undefined");
    Step s{id, l, r, 0.0, 0.0, 1.0 / std::sqrt(total)};
    if (bl == 0.0) {
      s.left_weight = 1.0;
    } else if (br == 0.0) {
      s.right_weight = 1.0;
    } else {
      // (v1/b1 + v2/b2) / (1/b1 + 1/b2)
      s.left_weight = br / total;
      s.right_weight = bl / total;
    }
    steps_.push_back(s);
    ops_.push_back({false, steps_.size() - 1});
    extended[id] = own + bl * br / total;
  }
}

void ContrastPlan::contrasts(std::span<const double> tips, std::span<double> out,
                             std::vector<double>& scratch) const {
  if (tips.size() != tip_nodes_.size()) throw InputError("value count does not match tip count");
  scratch.resize(node_count_);
  for (std::size_t i = 0; i < tip_nodes_.size(); ++i) scratch[tip_nodes_[i]] = tips[i];
  for (const Op& op : ops_) {
    if (op.unary) {
      const auto& u = unary_[op.index];
      scratch[u.node] = scratch[u.child];
      continue;
    }
    const Step& s = steps_[op.index];
    const double vl = scratch[s.left];
    const double vr = scratch[s.right];
    out[op.index] = (vl - vr) * s.inv_sd;
    scratch[s.node] = s.left_weight * vl + s.right_weight * vr;
  }
}

double ContrastPlan::variance(std::span<const double> tips, std::vector<double>& scratch) const {
  if (tips.size() != tip_nodes_.size()) throw InputError("value count does not match tip count");
  if (steps_.empty()) throw DomainError("tree has no contrasts");
  scratch.resize(node_count_);
  for (std::size_t i = 0; i < tip_nodes_.size(); ++i) scratch[tip_nodes_[i]] = tips[i];
  double sum = 0.0;
  for (const Op& op : ops_) {
    if (op.unary) {
      const auto& u = unary_[op.index];
      scratch[u.node] = scratch[u.child];
      continue;
    }
    const Step& s = steps_[op.index];
    const double vl = scratch[s.left];
    const double vr = scratch[s.right];
    const double c = (vl - vr) * s.inv_sd;
    sum += c * c;
    scratch[s.node] = s.left_weight * vl + s.right_weight * vr;
  }
  return sum / static_cast<double>(steps_.size());
}

Contrasts pic(const PhyloTree& tree, const TipValues& values) {
  const auto aligned = values.aligned_to(tree);
  for (double v : aligned)
    if (!std::isfinite(v)) throw InputError("tip values must be finite");
  ContrastPlan plan(tree);
  Contrasts out{std::vector<double>(plan.contrast_count())};
  std::vector<double> scratch;
  plan.contrasts(aligned, out.values, scratch);
  return out;
}

double pic_variance(const Contrasts& contrasts) {
  if (contrasts.values.empty()) throw DomainError("no contrasts");
  double sum = 0.0;
  for (double c : contrasts.values) sum += c * c;
  return sum / static_cast<double>(contrasts.values.size());
}

}  // namespace phonosig
