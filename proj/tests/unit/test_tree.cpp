#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "phonosig/error.hpp"
#include "phonosig/rng.hpp"
#include "phonosig/tree.hpp"

using namespace phonosig;

namespace {

double length_of(const PhyloTree& t, std::string_view tip) { return t.node(*t.find_tip(tip)).length; }

// Canonical text ignoring child order, built from tips upward.
std::string canonical(const PhyloTree& t, NodeId id) {
  const auto& n = t.node(id);
  std::string len = id == t.root() ? "" : ":" + std::to_string(n.length);
  if (n.is_tip()) return n.label + len;
  std::vector<std::string> parts;
  for (auto c : n.children) parts.push_back(canonical(t, c));
  std::sort(parts.begin(), parts.end());
  std::string out = "(";
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out + ")" + len;
}

std::string canonical(const PhyloTree& t) { return canonical(t, t.root()); }

}  // namespace

TEST_CASE("parse minimal and nested trees") {
  const auto t = parse_newick("(A:1,B:1);");
  CHECK(t.tip_count() == 2);
  CHECK(length_of(t, "A") == 1.0);
  CHECK(length_of(t, "B") == 1.0);

  const auto u = parse_newick("((A:1,B:1):1,C:2);");
  CHECK(u.tip_count() == 3);
  CHECK(u.node(*u.find_tip("A")).parent == u.node(*u.find_tip("B")).parent);
  CHECK(u.node(*u.find_tip("C")).parent == u.root());
  CHECK(u.tip_labels() == std::vector<std::string>{"A", "B", "C"});
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_newick("((A:1,B:1):1,C:2"), InputError);
  CHECK_THROWS_AS(parse_newick("((A:1,B:1):1,C:2));"), InputError);
  CHECK_THROWS_AS(parse_newick("((A:1,B:1:1,C:2);"), InputError);
  CHECK_THROWS_AS(parse_newick("(A:1,A:1);"), InputError);
  CHECK_THROWS_AS(parse_newick("(A:-1,B:1);"), InputError);
  CHECK_THROWS_AS(parse_newick(";"), InputError);
  CHECK_THROWS_AS(parse_newick(""), InputError);
  CHECK_THROWS_AS(parse_newick("(A,B:1);"), InputError);
}

TEST_CASE("default lengths, comments and internal labels") {
  NewickOptions opt;
  opt.default_length = 0.5;
  const auto t = parse_newick("((A,B)x:2,'C d'[&note]:1)root;", opt);
  CHECK(length_of(t, "A") == 0.5);
  CHECK(length_of(t, "C d") == 1.0);
  CHECK(t.tip_count() == 3);
}

TEST_CASE("vcv of small trees") {
  const auto c = vcv(parse_newick("((A:1,B:1):1,C:2);"));
  Eigen::Matrix3d expected;
  expected << 2, 1, 0, 1, 2, 0, 0, 0, 2;
  CHECK(c.entries == Eigen::MatrixXd(expected));
  CHECK(c.tip_order == std::vector<std::string>{"A", "B", "C"});

  const auto star = vcv(parse_newick("(A:0.7,B:0.7,C:0.7,D:0.7);"));
  CHECK(star.entries.isApprox(0.7 * Eigen::MatrixXd::Identity(4, 4), 0.0));

  const auto two = vcv(parse_newick("(A:1,B:3);"));
  Eigen::Matrix2d e2;
  e2 << 1, 0, 0, 3;
  CHECK(two.entries == Eigen::MatrixXd(e2));
}

TEST_CASE("vcv matches the ancestor-walk oracle on random trees") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t = yule_tree(30, 1.0, seed);
    const auto c = vcv(t);
    const auto o = oracle::vcv_by_paths(t);
    CHECK((c.entries - o).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(c.entries.isApprox(c.entries.transpose(), 0.0));
  }
}

TEST_CASE("prune to tips") {
  const auto t = parse_newick("((A:1,B:1):1,C:2);");
  const std::vector<std::string> keep{"A", "C"};
  const auto p = prune_to_tips(t, keep);
  CHECK(p.tip_count() == 2);
  CHECK(length_of(p, "A") == 2.0);
  CHECK(length_of(p, "C") == 2.0);
  CHECK(p.node(*p.find_tip("A")).parent == p.root());

  const auto all = prune_to_tips(t, t.tip_labels());
  CHECK(canonical(all) == canonical(t));

  const std::vector<std::string> one{"A"};
  CHECK_THROWS_AS(prune_to_tips(t, one), InputError);
  const std::vector<std::string> unknown{"A", "Z"};
  CHECK_THROWS_AS(prune_to_tips(t, unknown), InputError);
}

TEST_CASE("pruning preserves the sub-vcv exactly") {
  const auto t = yule_tree(60, 1.0, 99);
  const auto full = vcv(t);
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::string> keep;
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < 60; ++i)
      if (rng.uniform() < 0.4) {
        keep.push_back(full.tip_order[i]);
        idx.push_back(i);
      }
    if (keep.size() < 2) continue;
    const auto sub = vcv(prune_to_tips(t, keep));
    REQUIRE(sub.tip_order == keep);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) CHECK(sub.entries(i, j) == full.entries(idx[i], idx[j]));
  }
}

TEST_CASE("newick round trip") {
  const auto t = parse_newick("(A:1,B:1);");
  CHECK(canonical(parse_newick(write_newick(t))) == canonical(t));

  const auto big = yule_tree(111, 1.0, 2024);
  const auto back = parse_newick(write_newick(big));
  CHECK(back.tip_count() == 111);
  CHECK(vcv(back).entries == vcv(big).entries);
  CHECK(write_newick(back) == write_newick(big));

  std::vector<TreeNode> nodes(3);
  nodes[0].children = {1, 2};
  nodes[1] = TreeNode{0, {}, 0.1, "odd (label)"};
  nodes[2] = TreeNode{0, {}, 0.2, "it's"};
  const PhyloTree q(nodes, 0);
  const auto text = write_newick(q);
  const auto parsed = parse_newick(text);
  CHECK(parsed.find_tip("odd (label)"));
  CHECK(parsed.find_tip("it's"));
  CHECK(length_of(parsed, "odd (label)") == 0.1);
}

TEST_CASE("generators") {
  const auto b = balanced_tree(6);
  CHECK(b.tip_count() == 64);
  CHECK(b.is_bifurcating());
  for (auto tip : b.tips()) CHECK(b.root_distance(tip) == 6.0);

  const auto y1 = yule_tree(111, 1.0, 3);
  const auto y2 = yule_tree(111, 1.0, 3);
  CHECK(y1.tip_count() == 111);
  CHECK(write_newick(y1) == write_newick(y2));
  CHECK(y1.find_tip("t1"));
  CHECK(y1.find_tip("t111"));
  CHECK(y1.is_bifurcating());
}

TEST_CASE("polytomies parse and give a vcv") {
  const auto t = parse_newick("((A:1,B:1,C:1):1,D:2);");
  CHECK_FALSE(t.is_bifurcating());
  CHECK(vcv(t).entries(0, 1) == 1.0);
}
