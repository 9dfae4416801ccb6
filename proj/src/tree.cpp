#include "phonosig/tree.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "phonosig/error.hpp"
#include "phonosig/rng.hpp"

namespace phonosig {

PhyloTree::PhyloTree(std::vector<TreeNode> nodes, NodeId root)
    : nodes_(std::move(nodes)), root_(root) {
  if (nodes_.empty()) throw InputError("empty tree");
  if (root_ >= nodes_.size()) throw InputError("root index out of range");
  if (nodes_[root_].parent) throw InputError("root has a parent");

  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    if (id != root_) {
      if (!n.parent) throw InputError("tree has more than one root");
      const auto& siblings = nodes_.at(*n.parent).children;
      if (std::count(siblings.begin(), siblings.end(), id) != 1)
        throw InputError("parent/child links are inconsistent");
      if (!std::isfinite(n.length) || n.length < 0.0)
        throw InputError("branch lengths must be finite and nonnegative");
    }
    for (NodeId c : n.children) {
      if (c >= nodes_.size() || nodes_[c].parent != id)
        throw InputError("parent/child links are inconsistent");
    }
  }

  // Iterative DFS from the root; reaching every node exactly once proves the
  // structure is a connected tree.
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (seen[id]) throw InputError("tree contains a cycle");
    seen[id] = 1;
    order.push_back(id);
    const auto& ch = nodes_[id].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  if (order.size() != nodes_.size()) throw InputError("tree is not connected");

  for (NodeId id : order) {
    auto& n = nodes_[id];
    if (n.is_tip()) {
      if (n.label.empty()) throw InputError("tip without a label");
      if (!tip_index_.emplace(n.label, id).second)
        throw InputError("duplicate tip label '" + n.label + "'");
      tips_.push_back(id);
    } else {
      n.label.clear();
    }
  }
  // Reversed preorder: children always precede their parent.
  postorder_.assign(order.rbegin(), order.rend());
}

std::vector<std::string> PhyloTree::tip_labels() const {
  std::vector<std::string> out;
  out.reserve(tips_.size());
  for (NodeId t : tips_) out.push_back(nodes_[t].label);
  return out;
}

std::optional<NodeId> PhyloTree::find_tip(std::string_view label) const {
  auto it = tip_index_.find(std::string(label));
  if (it == tip_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> PhyloTree::preorder() const {
  return {postorder_.rbegin(), postorder_.rend()};
}

double PhyloTree::root_distance(NodeId id) const {
  double d = 0.0;
  while (id != root_) {
    d += nodes_[id].length;
    id = *nodes_[id].parent;
  }
  return d;
}

bool PhyloTree::is_bifurcating() const {
  return std::none_of(nodes_.begin(), nodes_.end(),
                      [](const TreeNode& n) { return n.children.size() > 2; });
}

namespace {

// Root-to-node path lengths, accumulated top-down.
std::vector<double> node_depths(const PhyloTree& tree) {
  std::vector<double> d(tree.node_count(), 0.0);
  auto order = tree.postorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& node = tree.node(*it);
    if (node.parent) d[*it] = d[*node.parent] + tree.branch_length(*it);
  }
  return d;
}

}  // namespace

PhyloTree prune_to_tips(const PhyloTree& tree, std::span<const std::string> keep) {
  if (keep.size() < 2) throw InputError("pruning needs at least two tips");
  std::vector<char> kept(tree.node_count(), 0);
  std::unordered_set<std::string_view> distinct;
  for (const auto& label : keep) {
    auto id = tree.find_tip(label);
    if (!id) throw InputError("unknown tip label '" + label + "'");
    distinct.insert(label);
    kept[*id] = 1;
  }
  if (distinct.size() < 2) throw InputError("pruning needs at least two tips");
  for (NodeId id : tree.postorder()) {
    if (!kept[id]) continue;
    if (auto p = tree.node(id).parent) kept[*p] = 1;
  }

  // Rebuild top-down. Each kept node with exactly one kept child is skipped
  // and its length pushed onto that child, except at the root. Merged lengths
  // are chosen so that root-to-node depths match the full tree bit for bit.
  const auto full_depth = node_depths(tree);
  std::vector<TreeNode> out;
  out.reserve(tree.node_count());
  std::vector<double> out_depth;
  struct Frame {
    NodeId source;
    std::optional<NodeId> new_parent;
    double carried;
  };
  std::vector<Frame> stack{{tree.root(), std::nullopt, 0.0}};
  std::optional<NodeId> new_root;
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const auto& src = tree.node(f.source);
    std::vector<NodeId> live;
    for (NodeId c : src.children)
      if (kept[c]) live.push_back(c);
    double len = f.carried + tree.branch_length(f.source);
    if (live.size() == 1 && f.new_parent) {
      stack.push_back({live.front(), f.new_parent, len});
      continue;
    }
    NodeId nid = out.size();
    double depth = 0.0;
    if (f.new_parent) {
      const double base = out_depth[*f.new_parent];
      const double target = full_depth[f.source];
      if (f.carried != 0.0 && base + len != target) {
        double l = target - base;
        for (int i = 0; i < 64 && base + l != target; ++i)
          l = std::nextafter(l, base + l < target ? HUGE_VAL : -HUGE_VAL);
        if (base + l == target) len = l;
      }
      depth = base + len;
    }
    TreeNode n;
    n.parent = f.new_parent;
    n.length = f.new_parent ? len : 0.0;
    n.label = src.is_tip() ? src.label : std::string();
    out.push_back(std::move(n));
    out_depth.push_back(depth);
    if (f.new_parent) out[*f.new_parent].children.push_back(nid);
    else new_root = nid;
    for (auto it = live.rbegin(); it != live.rend(); ++it) stack.push_back({*it, nid, 0.0});
  }
  return PhyloTree(std::move(out), *new_root);
}

VcvMatrix vcv(const PhyloTree& tree) {
  const auto tips = tree.tips();
  const std::size_t n = tips.size();
  VcvMatrix out;
  out.tip_order = tree.tip_labels();
  out.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  // C[i][j] is the root depth of the MRCA of i and j.
  const auto depth = node_depths(tree);
  std::vector<std::vector<Eigen::Index>> below(tree.node_count());
  std::vector<Eigen::Index> tip_pos(tree.node_count(), -1);
  for (std::size_t i = 0; i < n; ++i) tip_pos[tips[i]] = static_cast<Eigen::Index>(i);
  for (NodeId id : tree.postorder()) {
    const auto& node = tree.node(id);
    if (node.is_tip()) {
      const auto i = tip_pos[id];
      below[id].push_back(i);
      out.entries(i, i) = depth[id];
      continue;
    }
    auto& mine = below[id];
    for (NodeId c : node.children) {
      for (auto i : mine)
        for (auto j : below[c]) {
          out.entries(i, j) = depth[id];
          out.entries(j, i) = depth[id];
        }
      mine.insert(mine.end(), below[c].begin(), below[c].end());
      below[c].clear();
      below[c].shrink_to_fit();
    }
  }
  return out;
}

Eigen::LLT<Eigen::MatrixXd> factor_vcv(const Eigen::MatrixXd& c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd jittered = c;
  jittered.diagonal().array() += 1e-10 * c.diagonal().mean();
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    throw DomainError("variance-covariance matrix is not positive definite");
  return llt;
}

PhyloTree yule_tree(std::size_t tips, double birth_rate, std::uint64_t seed) {
  if (tips < 2) throw InputError("a Yule tree needs at least two tips");
  if (!(birth_rate > 0.0)) throw InputError("birth rate must be positive");
  Rng rng(seed);
  auto exponential = [&](double rate) { return -std::log1p(-rng.uniform()) / rate; };

  std::vector<TreeNode> nodes(1);
  std::vector<double> start{0.0};
  std::vector<NodeId> active;
  auto spawn = [&](NodeId parent, double t) {
    NodeId id = nodes.size();
    nodes.push_back(TreeNode{parent, {}, 0.0, {}});
    start.push_back(t);
    nodes[parent].children.push_back(id);
    active.push_back(id);
  };
  spawn(0, 0.0);
  spawn(0, 0.0);
  double t = 0.0;
  while (active.size() < tips) {
    t += exponential(birth_rate * static_cast<double>(active.size()));
    const auto pick = static_cast<std::size_t>(rng.below(active.size()));
    NodeId id = active[pick];
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(pick));
    nodes[id].length = t - start[id];
    spawn(id, t);
    spawn(id, t);
  }
  t += exponential(birth_rate * static_cast<double>(active.size()));
  for (NodeId id : active) nodes[id].length = t - start[id];

  // Label tips t1..tn in left-to-right order.
  std::vector<NodeId> stack{0};
  std::size_t next = 1;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    auto& ch = nodes[id].children;
    if (ch.empty()) nodes[id].label = "t" + std::to_string(next++);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return PhyloTree(std::move(nodes), 0);
}

PhyloTree balanced_tree(unsigned depth, double branch_length) {
  if (depth == 0) throw InputError("a balanced tree needs depth >= 1");
  std::vector<TreeNode> nodes(1);
  std::vector<NodeId> level{0};
  for (unsigned d = 0; d < depth; ++d) {
    std::vector<NodeId> next;
    for (NodeId p : level) {
      for (int k = 0; k < 2; ++k) {
        NodeId id = nodes.size();
        nodes.push_back(TreeNode{p, {}, branch_length, {}});
        nodes[p].children.push_back(id);
        next.push_back(id);
      }
    }
    level = std::move(next);
  }
  for (std::size_t i = 0; i < level.size(); ++i) nodes[level[i]].label = "t" + std::to_string(i + 1);
  return PhyloTree(std::move(nodes), 0);
}

}  // namespace phonosig
