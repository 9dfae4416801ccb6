#pragma once

// Trait simulation on trees and Felsenstein's independent contrasts.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phonosig/rng.hpp"
#include "phonosig/tree.hpp"

namespace phonosig {

// Values in the tip order of the tree they were made for.
struct TipValues {
  std::vector<std::string> labels;
  std::vector<double> values;

  static TipValues for_tree(const PhyloTree& tree, std::vector<double> values);
  // Values reordered to `tree`'s tip order. Throws InputError on label mismatch.
  std::vector<double> aligned_to(const PhyloTree& tree) const;
};

// Draws tip values under Brownian motion with a preorder walk fixed at
// construction; repeated draws reuse its buffers.
class BrownianSampler {
 public:
  explicit BrownianSampler(const PhyloTree& tree);

  // One draw into `tips` (tree tip order).
  void draw(double sigma2, double root_value, Rng& rng, std::span<double> tips);

 private:
  std::vector<NodeId> preorder_;
  std::vector<std::optional<NodeId>> parent_;
  std::vector<double> sqrt_length_;
  std::vector<NodeId> tip_nodes_;
  std::vector<double> node_values_;
};

TipValues simulate_bm(const PhyloTree& tree, double sigma2, double root_value, Rng& rng);
TipValues simulate_bm(const PhyloTree& tree, double sigma2, double root_value, std::uint64_t seed);

// sqrt(p) * standardized BM draw + sqrt(1 - p) * standardized iid noise.
TipValues simulate_mixed(const PhyloTree& tree, double p_brownian, Rng& rng);
TipValues simulate_mixed(const PhyloTree& tree, double p_brownian, std::uint64_t seed);

// The n_ones largest values become 1, the rest 0; ties favour earlier tips.
TipValues threshold_binarize(const TipValues& values, std::size_t n_ones);
void threshold_binarize(std::span<const double> values, std::size_t n_ones, std::span<double> out);

struct Contrasts {
  std::vector<double> values;
};

Contrasts pic(const PhyloTree& tree, const TipValues& values);

// Mean squared contrast (variance about zero).
double pic_variance(const Contrasts& contrasts);

// Independent contrasts are linear in the tip values with weights fixed by the
// tree, so a permutation test only needs to build them once.
class ContrastPlan {
 public:
  // Throws DomainError on a polytomy or on a node whose two (extended) daughter
  // branches are both zero.
  explicit ContrastPlan(const PhyloTree& tree);

  std::size_t contrast_count() const { return steps_.size(); }
  std::size_t tip_count() const { return tip_nodes_.size(); }

  // `tips` in tree tip order; `scratch` is resized as needed.
  void contrasts(std::span<const double> tips, std::span<double> out, std::vector<double>& scratch) const;
  double variance(std::span<const double> tips, std::vector<double>& scratch) const;

 private:
  struct Step {
    NodeId node;
    NodeId left;
    NodeId right;
    double left_weight;
    double right_weight;
    double inv_sd;
  };
  struct PassThrough {
    NodeId node;
    NodeId child;
  };
  // Postorder sequence; a step is either a contrast or a unary pass-through.
  struct Op {
    bool unary;
    std::size_t index;
  };

  std::size_t node_count_;
  std::vector<NodeId> tip_nodes_;
  std::vector<Step> steps_;
  std::vector<PassThrough> unary_;
  std::vector<Op> ops_;
};

}  // namespace phonosig
