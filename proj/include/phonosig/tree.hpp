#pragma once

// Rooted phylogenetic trees with branch lengths, Newick I/O, pruning and the
// Brownian variance-covariance matrix.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace phonosig {

using NodeId = std::size_t;

struct TreeNode {
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  // Length of the branch leading to this node. Ignored for the root.
  double length = 0.0;
  // Empty for internal nodes.
  std::string label;

  bool is_tip() const { return children.empty(); }
};

// Immutable once built. All constructors validate: a single root, unique
// nonempty tip labels, finite nonnegative lengths, every node reachable.
class PhyloTree {
 public:
  PhyloTree(std::vector<TreeNode> nodes, NodeId root);

  NodeId root() const { return root_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t tip_count() const { return tips_.size(); }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const TreeNode> nodes() const { return nodes_; }

  // Tips in left-to-right order.
  std::span<const NodeId> tips() const { return tips_; }
  std::vector<std::string> tip_labels() const;
  std::optional<NodeId> find_tip(std::string_view label) const;

  // Children before parents / parents before children.
  std::span<const NodeId> postorder() const { return postorder_; }
  std::vector<NodeId> preorder() const;

  // Incoming branch length, with the root's treated as zero.
  double branch_length(NodeId id) const { return id == root_ ? 0.0 : nodes_[id].length; }
  double root_distance(NodeId id) const;

  // No node has more than two children. Unary nodes (e.g. the stem kept by
  // prune_to_tips) count as bifurcating; algorithms pass values through them.
  bool is_bifurcating() const;

 private:
  std::vector<TreeNode> nodes_;
  NodeId root_;
  std::vector<NodeId> tips_;
  std::vector<NodeId> postorder_;
  std::unordered_map<std::string, NodeId> tip_index_;
};

struct NewickOptions {
  // Length given to edges that omit ":length". Unset means such edges are an error.
  std::optional<double> default_length;
};

PhyloTree parse_newick(std::string_view text, const NewickOptions& options = {});
PhyloTree read_newick_file(const std::string& path, const NewickOptions& options = {});

// Shortest round-trip decimal branch lengths; labels quoted when needed.
std::string write_newick(const PhyloTree& tree);

// Restrict to `keep`, collapsing internal unary nodes and summing their
// branch lengths. If the root is left with a single child the stem is kept,
// so root-to-tip distances (and hence the VCV) are unchanged.
PhyloTree prune_to_tips(const PhyloTree& tree, std::span<const std::string> keep);

struct VcvMatrix {
  std::vector<std::string> tip_order;
  Eigen::MatrixXd entries;
};

VcvMatrix vcv(const PhyloTree& tree);

// Cholesky factor of C. On failure adds 1e-10 * mean(diag) once; throws
// DomainError if the jittered matrix still fails.
Eigen::LLT<Eigen::MatrixXd> factor_vcv(const Eigen::MatrixXd& c);

// Generators used by calibration runs.
PhyloTree yule_tree(std::size_t tips, double birth_rate, std::uint64_t seed);
// Perfectly balanced tree with 2^depth tips and unit branch lengths.
PhyloTree balanced_tree(unsigned depth, double branch_length = 1.0);

}  // namespace phonosig
