#pragma once

// Phylogenetic signal: Blomberg's K with its independent-contrast
// randomization test, and Fritz & Purvis' D for binary characters.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "phonosig/evolve.hpp"
#include "phonosig/tree.hpp"

namespace phonosig {

// Quantities of K that depend on the tree only, shared across characters
// and permutations.
class KCalculator {
 public:
  explicit KCalculator(const PhyloTree& tree);
  explicit KCalculator(const VcvMatrix& vcv);

  std::size_t size() const { return static_cast<std::size_t>(inv_ones_.size()); }

  // GLS mean (1' C^-1 x) / (1' C^-1 1); values in tip order.
  double phylo_mean(std::span<const double> values) const;
  // Observed MSE0/MSE over its Brownian expectation. DomainError on constant data.
  double k(std::span<const double> values) const;
  // (trace(C) - n / (1' C^-1 1)) / (n - 1)
  double expected_ratio() const { return expected_ratio_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd inv_ones_;
  double ones_inv_ones_;
  double expected_ratio_;
};

double phylo_mean(const TipValues& values, const VcvMatrix& vcv);
double blomberg_k(const PhyloTree& tree, const TipValues& values);

struct KResult {
  std::string key;
  double k = 0.0;
  double p = 1.0;
  std::size_t n_used = 0;
  std::size_t n_perm = 0;
  double observed_pic_variance = 0.0;
};

struct PermutationOptions {
  std::size_t n_perm = 10000;
  // Report (r + 1) / (n + 1) instead of r / n.
  bool pseudocount = false;
};

// p is the share of tip shuffles whose contrast variance is <= the observed.
KResult k_permutation_test(const PhyloTree& tree, const TipValues& values,
                           const PermutationOptions& options, std::uint64_t seed);

enum class DClass { over_clumped, phylogenetic, intermediate, random, over_dispersed, indeterminate };

std::string_view to_string(DClass c);

struct DResult {
  std::string key;
  // NaN when the random and Brownian nulls have equal means.
  double d = 0.0;
  double sum_d_obs = 0.0;
  double mean_sum_d_random = 0.0;
  double mean_sum_d_brownian = 0.0;
  // Share of Brownian-arm D values greater than D.
  double p_d_eq_0 = 1.0;
  // Share of random-arm D values smaller than D.
  double p_d_eq_1 = 1.0;
  std::size_t n_used = 0;
  std::size_t n_perm = 0;
  DClass classification = DClass::indeterminate;
};

// Sum of sister differences; values must be 0/1 in tip order.
class DifferencePlan {
 public:
  explicit DifferencePlan(const PhyloTree& tree);
  double sum(std::span<const double> tips, std::vector<double>& scratch) const;

 private:
  struct Op {
    NodeId node;
    NodeId left;
    // Same as `left` for a unary pass-through.
    NodeId right;
  };
  std::size_t node_count_;
  std::vector<NodeId> tip_nodes_;
  std::vector<Op> ops_;
};

double sum_of_differences(const PhyloTree& tree, const TipValues& values);

// `d` computed from the three sums; NaN if the null means coincide.
double d_statistic(double sum_d_obs, double mean_random, double mean_brownian);

// Both nulls use n_perm draws: tip shuffles, and unit-rate Brownian
// simulations thresholded to the observed count of ones. Classification uses
// `alpha`; pass the per-hypothesis threshold (0.025 by default in the CLI).
DResult fritz_purvis_d(const PhyloTree& tree, const TipValues& values,
                       const PermutationOptions& options, std::uint64_t seed, double alpha = 0.025);

// D differs from 0 (or 1) when its p-value lies in either alpha tail; the sign
// of D, and its position relative to 1, give the direction.
DClass classify_d(const DResult& r, double alpha);

}  // namespace phonosig
